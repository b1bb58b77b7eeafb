"""Simulation designs, baseline estimators, and the benchmark harness.

Five data-generating settings share one separable cosine covariance; the
harness runs seeded replications over sample sizes and methods, scores every
estimate by the closed-form excess risk under the true covariance, and fits
log-log rate slopes.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .bilinear import (
    FblrConfig,
    FblrFit,
    fblr_fit,
    igcv_fit,
    init_ridge_svd,
    predict,
    rank_r_fit,
)
from .covariance import SeparableCov, excess_risk_oracle
from .errors import (
    DimensionError,
    IllPosedError,
    InsufficientSampleError,
    PreconditionError,
    UnsupportedSpecError,
)
from .flr import GCV_DF_CAP, default_lambda_grid, ridge_gcv
from .grids import Func1D, Grid1D, TwoWayDataset, center_dataset, make_uniform_grid
from .kernels import SimBernoulli, SpectralModel, cosine_covariance, kernel_gram

# splitmix64 mixing constants; the seed of cell (setting, n-index, rep) is the
# fold of these words over (base_seed, setting_id, n_index, rep_index).
_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX_B = 0xBF58476D1CE4E5B9
_MIX_C = 0x94D049BB133111EB

#: Number of eigen terms in the simulation covariance.
COV_TERMS = 200


def _splitmix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_B) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_C) & _MASK64
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Deterministic 64-bit hash of integer parts (order-sensitive)."""
    acc = 0
    for p in parts:
        acc = (acc + _GAMMA + int(p)) & _MASK64
        acc = _splitmix64(acc)
    return acc


_TABLE_1TO4 = {1: (4, 0), 2: (200, 0), 3: (4, 4), 4: (200, 4)}


@dataclass(frozen=True)
class SettingSpec:
    """One simulation cell: design id, covariance decay, size, and seed."""

    id: int
    r_c: float
    n_eig: int
    k_mis: int
    n: int
    seed: int
    sigma: float = 0.5
    grid_len: int = 100

    def __post_init__(self):
        if self.id not in (1, 2, 3, 4, 5):
            raise UnsupportedSpecError(
                f"setting {self.id} is not supported (1-5 are implemented)"
            )
        if self.id in _TABLE_1TO4 and (self.n_eig, self.k_mis) != _TABLE_1TO4[self.id]:
            raise ValueError(
                f"setting {self.id} requires (n_eig, k_mis) = {_TABLE_1TO4[self.id]}"
            )
        if self.sigma < 0:
            raise ValueError("noise level must be nonnegative")

    @classmethod
    def from_id(
        cls,
        setting_id: int,
        r_c: float,
        n: int,
        seed: int,
        sigma: float = 0.5,
        grid_len: int = 100,
    ) -> "SettingSpec":
        n_eig, k_mis = _TABLE_1TO4.get(setting_id, (4, 0))
        return cls(
            id=setting_id, r_c=r_c, n_eig=n_eig, k_mis=k_mis,
            n=n, seed=seed, sigma=sigma, grid_len=grid_len,
        )


@dataclass(frozen=True)
class CoefficientTruth:
    """True coefficients of one setting; rank-one settings also expose the pair."""

    alpha0: Optional[Func1D]
    beta0: Optional[Func1D]
    b_field: np.ndarray


def _coef_series(n_eig: int, k_mis: int, points: np.ndarray) -> np.ndarray:
    i = np.arange(1, n_eig + 1)
    coefs = 4.0 * np.sqrt(2.0) * (-1.0) ** i * i**-2.0
    return np.cos(np.pi * np.outer(points, i + k_mis)) @ coefs


def coefficients_for_setting(
    spec: SettingSpec, s_grid: Grid1D, t_grid: Grid1D
) -> CoefficientTruth:
    """True coefficient functions (settings 1-4) or field (setting 5)."""
    if spec.id in _TABLE_1TO4:
        a = Func1D(s_grid, _coef_series(spec.n_eig, spec.k_mis, s_grid.points))
        b = Func1D(t_grid, _coef_series(spec.n_eig, spec.k_mis, t_grid.points))
        return CoefficientTruth(a, b, np.outer(a.values, b.values))
    # setting 5: aligned four-term block plus 0.4 x a shifted block
    a1 = _coef_series(4, 0, s_grid.points)
    b1 = _coef_series(4, 0, t_grid.points)
    a2 = _coef_series(4, 4, s_grid.points)
    b2 = _coef_series(4, 4, t_grid.points)
    return CoefficientTruth(None, None, np.outer(a1, b1) + 0.4 * np.outer(a2, b2))


def sample_gp_separable(
    model_s: SpectralModel, model_t: SpectralModel, n: int, seed: int
) -> np.ndarray:
    """Eigen-expansion sampler of a centered separable Gaussian field.

    X = sum_ij sqrt(s_i s_j) z_ij phi_i phi_j' with iid standard normal scores
    from a generator seeded by ``seed``; bitwise deterministic.
    """
    fs = model_s.basis_matrix() * np.sqrt(model_s.eigenvalues)
    ft = model_t.basis_matrix() * np.sqrt(model_t.eigenvalues)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, fs.shape[1], ft.shape[1]))
    return np.einsum("pa,nab,qb->npq", fs, z, ft, optimize=True)


def generate_response(
    x: np.ndarray, truth: CoefficientTruth, sigma: float, seed: int, s_grid: Grid1D, t_grid: Grid1D
) -> np.ndarray:
    """y_i = <x_i, B0> under double quadrature plus seeded Gaussian noise."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[1:] != truth.b_field.shape:
        raise DimensionError("covariate batch does not match the coefficient field")
    weighted = (s_grid.weights[:, None] * truth.b_field * t_grid.weights[None, :]).ravel()
    signal = x.reshape(x.shape[0], -1) @ weighted
    noise = np.random.default_rng(seed).standard_normal(x.shape[0])
    return signal + sigma * noise


@dataclass(frozen=True)
class SettingData:
    """Everything one replication produces before any method runs."""

    data: TwoWayDataset
    truth: CoefficientTruth
    cov_true: SeparableCov
    null_risk: float


def make_setting_data(spec: SettingSpec) -> SettingData:
    """Generate one seeded replication of the given setting."""
    grid = make_uniform_grid(spec.grid_len)
    c_mat, model = cosine_covariance(spec.r_c, COV_TERMS, grid)
    cov = SeparableCov(c_mat, c_mat, "simulation-truth")
    truth = coefficients_for_setting(spec, grid, grid)
    x = sample_gp_separable(model, model, spec.n, mix_seed(spec.seed, 0))
    y = generate_response(x, truth, spec.sigma, mix_seed(spec.seed, 1), grid, grid)
    data = center_dataset(x, y, grid, grid)
    return SettingData(
        data=data,
        truth=truth,
        cov_true=cov,
        null_risk=excess_risk_oracle(truth.b_field, cov, grid, grid),
    )


# ---------------------------------------------------------------------------
# baseline estimators
# ---------------------------------------------------------------------------

def ridge_vec_fit(data: TwoWayDataset, lambdas=None) -> np.ndarray:
    """GCV-tuned ridge on the vectorized (quadrature-weighted) design.

    Returns the estimated coefficient field.
    """
    if not data.centered:
        raise PreconditionError("ridge baseline expects centered data")
    if lambdas is None:
        lambdas = default_lambda_grid()
    ws, wt = data.s_grid.weights, data.t_grid.weights
    design = (data.x * ws[:, None] * wt[None, :]).reshape(data.n, -1)
    _, coef, _, _ = ridge_gcv(design, data.y, lambdas)
    return coef.reshape(data.s_grid.m, data.t_grid.m)


def blr_fit(data: TwoWayDataset, config: FblrConfig | None = None) -> FblrFit:
    """Unpenalized alternating bilinear least squares (tiny jitter for rank)."""
    p, q = data.s_grid.m, data.t_grid.m
    if data.n <= p + q:
        raise InsufficientSampleError(
            f"bilinear least squares needs n > p + q = {p + q}, got n = {data.n}"
        )
    if config is None:
        config = FblrConfig()
    config = replace(config, lambda_alpha=0.0, lambda_beta=0.0)
    try:
        return fblr_fit(data, config, _jitter=1e-10)
    except IllPosedError as exc:
        raise InsufficientSampleError(f"singular half-step: {exc}") from exc


_VEC_MODES = ("vec", "vecT", "vecStar", "vecStarT")


def vectorize(x: np.ndarray, mode: str) -> np.ndarray:
    """Stack a matrix into a vector; the starred modes flip every second
    column (row) head-to-head so smooth fields stay smooth across seams."""
    x = np.asarray(x)
    if mode == "vec":
        return x.T.ravel()
    if mode == "vecStar":
        xc = x.copy()
        xc[:, 1::2] = xc[::-1, 1::2]
        return xc.T.ravel()
    if mode == "vecT":
        return x.ravel()
    if mode == "vecStarT":
        xr = x.copy()
        xr[1::2, :] = xr[1::2, ::-1]
        return xr.ravel()
    raise ValueError(f"unknown vectorization mode {mode!r}; pick from {_VEC_MODES}")


def field_from_vec(v: np.ndarray, p: int, q: int, mode: str) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v)
    if v.size != p * q:
        raise DimensionError(f"vector length {v.size} != p*q = {p * q}")
    if mode == "vec":
        return v.reshape(q, p).T.copy()
    if mode == "vecStar":
        x = v.reshape(q, p).T.copy()
        x[:, 1::2] = x[::-1, 1::2]
        return x
    if mode == "vecT":
        return v.reshape(p, q).copy()
    if mode == "vecStarT":
        x = v.reshape(p, q).copy()
        x[1::2, :] = x[1::2, ::-1]
        return x
    raise ValueError(f"unknown vectorization mode {mode!r}; pick from {_VEC_MODES}")


@dataclass(frozen=True)
class FlrVecFit:
    """One-way fit of stacked covariates plus the mapped-back field."""

    lam: float
    coef: Func1D
    field: np.ndarray


def flr_vec_fit(
    data: TwoWayDataset,
    mode: str = "vecStar",
    kernel=None,
    lambdas=None,
    n_modes: int = 2000,
) -> FlrVecFit:
    """One-way regression on stacked covariates, tuned by GCV.

    For the default kernel the exact cosine eigen-expansion (eigenvalues
    (pi k)^-4) truncated at ``n_modes`` stands in for the stacked Gram
    matrix, which is never materialized; other kernel specs take a dense
    route and are limited to small stacked grids.  One eigendecomposition of
    the n x n kernelized design Gram serves the whole tuning grid.  The
    returned field rescales the 1-d coefficient by the quadrature-weight
    ratio so <x, field> under the grid pair equals the fitted 1-d pairing.

    The default tuning grid sits far below the two-way one: compressing p
    columns onto the unit interval scales the roughness of the stacked
    signal by about q^4, so the useful trade-off lives at correspondingly
    tiny tuning values.
    """
    if not data.centered:
        raise PreconditionError("the stacked baseline expects centered data")
    if kernel is None:
        kernel = SimBernoulli()
    if lambdas is None:
        lambdas = default_lambda_grid(1e-20, 1e-6, 29)
    p, q = data.s_grid.m, data.t_grid.m
    m_tot = p * q
    grid_u = make_uniform_grid(m_tot)
    xv = np.stack([vectorize(data.x[i], mode) for i in range(data.n)])
    b = xv * grid_u.weights
    if isinstance(kernel, SimBernoulli):
        # aliased high modes are part of the grid kernel too, so n_modes is
        # not capped by the grid size; the (pi k)^-4 tail controls the error
        modes = np.arange(1, n_modes + 1)
        phi = np.sqrt(2.0) * np.cos(np.pi * np.outer(grid_u.points, modes))
        d = (np.pi * modes) ** -4.0
        zc = b @ phi  # n x k cosine coefficients
        sigma = (zc * d) @ zc.T
        coef_from_c = lambda c: phi @ (d * (zc.T @ c))
    else:
        if m_tot > 1500:
            raise UnsupportedSpecError(
                f"dense stacked Gram of size {m_tot} is too large; use the default kernel"
            )
        gram = kernel_gram(kernel, grid_u)
        sigma = b @ gram @ b.T
        coef_from_c = lambda c: gram @ (b.T @ c)
    sigma = 0.5 * (sigma + sigma.T)
    evals, evecs = np.linalg.eigh(sigma)
    evals = np.clip(evals, 0.0, None)
    uy = evecs.T @ data.y
    n = data.n
    best = None
    fallback = None
    for lam in sorted(float(l) for l in np.asarray(lambdas, dtype=float)):
        shrink = evals / (evals + n * lam)
        hat = float(shrink.sum())
        if hat >= n:
            continue
        resid = (1.0 - shrink) * uy
        score = float(resid @ resid / n) / (1.0 - hat / n) ** 2
        if hat > GCV_DF_CAP * n:
            fallback = (score, lam)
            continue
        if best is None or score <= best[0]:
            best = (score, lam)
    if best is None:
        best = fallback
    if best is None:
        raise IllPosedError("no usable tuning value for the stacked fit")
    lam = best[1]
    c = evecs @ (uy / (evals + n * lam))
    coef1d = coef_from_c(c)
    scaled = coef1d * grid_u.weights
    field = field_from_vec(scaled, p, q, mode)
    field /= data.s_grid.weights[:, None] * data.t_grid.weights[None, :]
    return FlrVecFit(lam=lam, coef=Func1D(grid_u, coef1d), field=field)


def cv2d_fit(
    data: TwoWayDataset,
    config: FblrConfig,
    cv_lambdas=None,
    n_folds: int = 5,
    fold_seed: int = 0,
) -> FblrFit:
    """Exhaustive two-dimensional tuning by K-fold cross validation.

    The slow comparator for the iterated-GCV tuner: every pair on the grid is
    scored by out-of-fold squared error and the winner is refit on all data.
    """
    if cv_lambdas is None:
        cv_lambdas = default_lambda_grid(1e-10, 1.0, 9)
    cv_lambdas = sorted(float(l) for l in np.asarray(cv_lambdas, dtype=float))
    from .bilinear import build_forms  # local import to avoid cycle at module load

    forms, cov = build_forms(data, config)
    n = data.n
    perm = np.random.default_rng(fold_seed).permutation(n)
    raw_x = data.x + data.x_mean
    raw_y = data.y + data.y_mean
    folds = []
    for f in range(n_folds):
        val = perm[f::n_folds]
        tr = np.setdiff1d(perm, val)
        fold_data = center_dataset(raw_x[tr], raw_y[tr], data.s_grid, data.t_grid)
        init, _ = init_ridge_svd(fold_data, config.lambda_grid)
        folds.append((fold_data, init, val))
    best = None
    for la in cv_lambdas:
        for lb in cv_lambdas:
            cfg = replace(config, lambda_alpha=la, lambda_beta=lb)
            err = 0.0
            try:
                for fold_data, init, val in folds:
                    fit = fblr_fit(fold_data, cfg, forms=forms, cov=cov, alpha_init=init)
                    pred = predict(fit, raw_x[val])
                    err += float(np.sum((raw_y[val] - pred) ** 2))
            except IllPosedError:
                continue
            if best is None or err <= best[0]:
                best = (err, la, lb)
    if best is None:
        raise IllPosedError("cross validation found no usable tuning pair")
    _, la, lb = best
    cfg = replace(config, lambda_alpha=la, lambda_beta=lb)
    return fblr_fit(data, cfg, forms=forms, cov=cov)


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkRow:
    method: str
    setting_id: int
    r_c: float
    n: int
    rep: int
    risk: float
    seconds: float
    error: Optional[str] = None


@dataclass(frozen=True)
class AggregateRow:
    method: str
    setting_id: int
    r_c: float
    n: int
    mean_risk: float
    se_risk: float
    n_reps: int


@dataclass(frozen=True)
class SlopeRow:
    method: str
    setting_id: int
    r_c: float
    slope: float
    stderr: float


@dataclass
class BenchmarkResult:
    rows: list[BenchmarkRow]
    aggregates: list[AggregateRow] = field(default_factory=list)
    slopes: list[SlopeRow] = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def mean_risk(self, method: str, setting_id: int, r_c: float, n: int) -> float:
        for a in self.aggregates:
            if (a.method, a.setting_id, a.r_c, a.n) == (method, setting_id, r_c, n):
                return a.mean_risk
        raise KeyError((method, setting_id, r_c, n))

    def rep_risks(self, method: str, setting_id: int, r_c: float, n: int) -> np.ndarray:
        vals = [
            r.risk
            for r in self.rows
            if (r.method, r.setting_id, r.r_c, r.n) == (method, setting_id, r_c, n)
            and r.error is None
        ]
        return np.array(vals)

    def total_seconds(self, method: str) -> float:
        return float(sum(r.seconds for r in self.rows if r.method == method))


def fit_rate_slope(ns: Sequence[int], mean_risks: Sequence[float]) -> tuple[float, float]:
    """OLS slope (with standard error) of log2 mean risk against log2 n."""
    ns = np.asarray(ns, dtype=float)
    risks = np.asarray(mean_risks, dtype=float)
    if ns.size < 3:
        raise ValueError("rate fitting needs at least 3 sample sizes")
    x = np.log2(ns)
    z = np.log2(risks)
    xc = x - x.mean()
    slope = float(xc @ z / (xc @ xc))
    intercept = float(z.mean() - slope * x.mean())
    resid = z - (intercept + slope * x)
    dof = max(ns.size - 2, 1)
    stderr = float(np.sqrt(resid @ resid / dof / (xc @ xc)))
    return slope, stderr


def _method_registry() -> dict[str, Callable]:
    def run_fblr(sd: SettingData, cfg: FblrConfig, seed: int):
        fit = igcv_fit(sd.data, replace(cfg, covariance=sd.cov_true))
        return fit.coefficient_field(), fit

    def run_fblr_est(sd: SettingData, cfg: FblrConfig, seed: int):
        fit = igcv_fit(sd.data, replace(cfg, covariance="estimate"))
        return fit.coefficient_field(), fit

    def run_fblr_cv(sd: SettingData, cfg: FblrConfig, seed: int):
        fit = cv2d_fit(
            sd.data, replace(cfg, covariance=sd.cov_true), fold_seed=mix_seed(seed, 2)
        )
        return fit.coefficient_field(), fit

    def run_fblr_r2(sd: SettingData, cfg: FblrConfig, seed: int):
        rr = rank_r_fit(sd.data, 2, replace(cfg, covariance=sd.cov_true))
        return rr.b_field, rr

    def run_blr(sd: SettingData, cfg: FblrConfig, seed: int):
        fit = blr_fit(sd.data, replace(cfg, covariance=sd.cov_true))
        return fit.coefficient_field(), fit

    def run_ridge(sd: SettingData, cfg: FblrConfig, seed: int):
        return ridge_vec_fit(sd.data), None

    def make_flr(mode):
        def run(sd: SettingData, cfg: FblrConfig, seed: int):
            out = flr_vec_fit(sd.data, mode=mode)
            return out.field, out

        return run

    return {
        "fblr": run_fblr,
        "fblr_est": run_fblr_est,
        "fblr_cv": run_fblr_cv,
        "fblr_r2": run_fblr_r2,
        "blr": run_blr,
        "ridge": run_ridge,
        "flr_vec": make_flr("vec"),
        "flr_vect": make_flr("vecT"),
        "flr_vecstar": make_flr("vecStar"),
        "flr_vecstart": make_flr("vecStarT"),
    }


METHOD_NAMES = tuple(_method_registry())


def run_benchmark(
    settings: Sequence[tuple[int, float]],
    ns: Sequence[int],
    methods: Sequence[str],
    reps: int,
    base_seed: int,
    sigma: float = 0.5,
    grid_len: int = 100,
    config: FblrConfig | None = None,
    keep_fits: bool = False,
    threads: int = 1,
) -> BenchmarkResult:
    """Seeded replication loop over (setting, n, rep, method) cells.

    The data of a cell depend only on (base_seed, setting id, n index, rep),
    never on the method list or replication count, so runs are extendable and
    methods see identical draws.  Failures are recorded per cell, not raised.
    """
    registry = _method_registry()
    for m in methods:
        if m not in registry:
            raise ValueError(f"unknown method {m!r}; choose from {sorted(registry)}")
    if config is None:
        config = FblrConfig()

    tasks = []
    for s_idx, (setting_id, r_c) in enumerate(settings):
        for n_idx, n in enumerate(ns):
            for rep in range(reps):
                seed = mix_seed(base_seed, setting_id, n_idx, rep)
                spec = SettingSpec.from_id(
                    setting_id, r_c, int(n), seed, sigma=sigma, grid_len=grid_len
                )
                tasks.append((s_idx, n_idx, rep, spec, r_c))

    def run_cell(task):
        s_idx, n_idx, rep, spec, r_c = task
        sd = make_setting_data(spec)
        out = []
        for method in methods:
            t0 = time.perf_counter()
            try:
                b_hat, fit = registry[method](sd, config, spec.seed)
                risk = excess_risk_oracle(
                    b_hat - sd.truth.b_field,
                    sd.cov_true,
                    sd.data.s_grid,
                    sd.data.t_grid,
                )
                row = BenchmarkRow(
                    method, spec.id, r_c, spec.n, rep, risk, time.perf_counter() - t0
                )
            except Exception as exc:  # recorded, not fatal
                row = BenchmarkRow(
                    method, spec.id, r_c, spec.n, rep,
                    float("nan"), time.perf_counter() - t0, error=str(exc),
                )
                fit = None
            out.append((row, fit))
        return out

    results: list[list] = [None] * len(tasks)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, res in enumerate(pool.map(run_cell, tasks)):
                results[i] = res
    else:
        for i, task in enumerate(tasks):
            results[i] = run_cell(task)

    rows: list[BenchmarkRow] = []
    fits: dict = {}
    for task, cell in zip(tasks, results):
        for row, fit in cell:
            rows.append(row)
            if keep_fits and fit is not None:
                fits[(row.method, row.setting_id, row.r_c, row.n, row.rep)] = fit

    aggregates = []
    for (setting_id, r_c) in settings:
        for n in ns:
            for method in methods:
                vals = np.array(
                    [
                        r.risk
                        for r in rows
                        if (r.method, r.setting_id, r.r_c, r.n)
                        == (method, setting_id, r_c, n)
                        and r.error is None
                    ]
                )
                if vals.size == 0:
                    continue
                se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
                aggregates.append(
                    AggregateRow(
                        method, setting_id, r_c, int(n),
                        float(vals.mean()), se, int(vals.size),
                    )
                )

    slopes = []
    for (setting_id, r_c) in settings:
        for method in methods:
            pts = [
                (a.n, a.mean_risk)
                for a in aggregates
                if (a.method, a.setting_id, a.r_c) == (method, setting_id, r_c)
            ]
            if len(pts) >= 3 and all(p[1] > 0 for p in pts):
                slope, stderr = fit_rate_slope([p[0] for p in pts], [p[1] for p in pts])
                slopes.append(SlopeRow(method, setting_id, r_c, slope, stderr))

    return BenchmarkResult(rows=rows, aggregates=aggregates, slopes=slopes, fits=fits)
