"""Bilinear regression of a scalar on a matrix-valued functional covariate.

The estimator minimizes a squared loss plus a three-term penalty that mixes
the kernel norms with covariance semi-norms of the two coefficient functions.
Each block update is an exactly-solvable one-way penalized regression, so the
objective decreases monotonically; tuning is per-half-step GCV iterated to a
joint fixed point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .covariance import SeparableCov, flipflop_estimate, seminorm0_quadform
from .errors import (
    DegenerateIterateError,
    DegenerateStepNormError,
    InternalError,
    PreconditionError,
)
from .flr import FlrFit, default_lambda_grid, flr_fit_ridge_form, ridge_gcv, select_lambda
from .grids import (
    Func1D,
    Grid1D,
    QuadForm,
    TwoWayDataset,
    bilinear_batch,
    combine_quadforms,
    quad_inner,
)
from .kernels import KernelSpec, SecondDerivRoughness, rkhs_quadform

TUNE = "tune"

#: Iterate magnitudes below this are treated as a collapsed block.
ITERATE_FLOOR = 1e-12

#: Relative slack allowed before the monotone-descent guard trips.
MONOTONE_TOL = 1e-9


class PenaltyMode(enum.Enum):
    """Which of the three candidate penalties is active (3 is the default)."""

    CANDIDATE1 = 1
    CANDIDATE2 = 2
    CANDIDATE3 = 3


@dataclass
class FblrConfig:
    """Tuning and model choices for a bilinear fit."""

    lambda_alpha: Union[float, str] = TUNE
    lambda_beta: Union[float, str] = TUNE
    lambda_grid: np.ndarray = field(default_factory=default_lambda_grid)
    penalty_mode: PenaltyMode = PenaltyMode.CANDIDATE3
    max_outer_iter: int = 50
    obj_tol: float = 1e-6
    coef_tol: float = 1e-4
    kernel_s: KernelSpec = field(default_factory=SecondDerivRoughness)
    kernel_t: KernelSpec = field(default_factory=SecondDerivRoughness)
    covariance: Union[SeparableCov, str] = "estimate"

    def __post_init__(self):
        if self.obj_tol <= 0 or self.coef_tol <= 0:
            raise ValueError("tolerances must be positive")
        self.lambda_grid = np.asarray(self.lambda_grid, dtype=float)
        if self.tunes_any() and self.lambda_grid.size == 0:
            raise ValueError("tuning requested but the lambda grid is empty")

    def tunes_any(self) -> bool:
        return self.lambda_alpha == TUNE or self.lambda_beta == TUNE


@dataclass(frozen=True)
class PenaltyForms:
    """The four quadratic forms entering the penalty, one pair per axis."""

    m0s: QuadForm
    mks: QuadForm
    m0t: QuadForm
    mkt: QuadForm


@dataclass(frozen=True)
class FblrFit:
    """A fitted bilinear model; alpha is unit-norm, beta carries the scale."""

    alpha_hat: Func1D
    beta_hat: Func1D
    mu_hat: float
    lambda_alpha: float
    lambda_beta: float
    objective_trace: np.ndarray
    n_iter: int
    converged: bool
    cov_used: SeparableCov
    x_mean: np.ndarray

    def coefficient_field(self) -> np.ndarray:
        return np.outer(self.alpha_hat.values, self.beta_hat.values)


def build_forms(data: TwoWayDataset, config: FblrConfig) -> tuple[PenaltyForms, SeparableCov]:
    """Assemble the covariance semi-norm and kernel-norm forms for both axes."""
    cov = config.covariance
    if isinstance(cov, str):
        if cov != "estimate":
            raise ValueError(f"unknown covariance source {cov!r}")
        cov = flipflop_estimate(data)
    return (
        PenaltyForms(
            m0s=seminorm0_quadform(cov.c_alpha, data.s_grid),
            mks=rkhs_quadform(config.kernel_s, data.s_grid),
            m0t=seminorm0_quadform(cov.c_beta, data.t_grid),
            mkt=rkhs_quadform(config.kernel_t, data.t_grid),
        ),
        cov,
    )


def penalty_j(
    alpha: Func1D,
    beta: Func1D,
    lam_a: float,
    lam_b: float,
    forms: PenaltyForms,
    mode: PenaltyMode = PenaltyMode.CANDIDATE3,
) -> float:
    """Evaluate the active penalty candidate; scale-invariant in (alpha, beta)."""
    a0 = forms.m0s.value(alpha)
    ak = forms.mks.value(alpha)
    b0 = forms.m0t.value(beta)
    bk = forms.mkt.value(beta)
    if mode is PenaltyMode.CANDIDATE1:
        return lam_a * lam_b * ak * bk
    if mode is PenaltyMode.CANDIDATE2:
        return lam_a * ak * b0 + lam_b * a0 * bk
    return lam_a * ak * b0 + lam_b * a0 * bk + lam_a * lam_b * ak * bk


def objective(
    alpha: Func1D,
    beta: Func1D,
    data: TwoWayDataset,
    lam_a: float,
    lam_b: float,
    forms: PenaltyForms,
    mode: PenaltyMode = PenaltyMode.CANDIDATE3,
) -> float:
    """Mean squared loss on the centered data plus the penalty."""
    if not data.centered:
        raise PreconditionError("the objective is defined on centered data")
    resid = data.y - bilinear_batch(alpha, data.x, beta)
    return float(resid @ resid) / data.n + penalty_j(alpha, beta, lam_a, lam_b, forms, mode)


def step_penalty_quadform(
    fixed: Func1D,
    lam_fixed: float,
    lam_free: float,
    m0_fixed: QuadForm,
    mk_fixed: QuadForm,
    m0_free: QuadForm,
    mk_free: QuadForm,
    mode: PenaltyMode = PenaltyMode.CANDIDATE3,
) -> QuadForm:
    """Merged penalty for the free block given the fixed block's norms.

    Under the default candidate the coefficient on the covariance form is
    lam_fixed * |fixed|_K^2 and on the kernel form lam_free * (|fixed|_0^2 +
    lam_fixed * |fixed|_K^2); both multipliers are plain scalars once the
    fixed block is known.
    """
    n0 = m0_fixed.value(fixed)
    nk = mk_fixed.value(fixed)
    if mode is PenaltyMode.CANDIDATE1:
        c0 = 0.0
        ck = lam_fixed * lam_free * nk
    elif mode is PenaltyMode.CANDIDATE2:
        c0 = lam_fixed * nk
        ck = lam_free * n0
    else:
        c0 = lam_fixed * nk
        ck = lam_free * n0 + lam_fixed * lam_free * nk
    if c0 == 0.0 and ck == 0.0:
        raise DegenerateStepNormError(
            "the merged half-step penalty vanished; fix nonzero tuning values"
        )
    return combine_quadforms([(c0, m0_free), (ck, mk_free)])


def tilde_x(alpha: Func1D, data: TwoWayDataset) -> np.ndarray:
    """Contract the covariates against alpha: one 1-d function per sample (n x q)."""
    if not data.centered:
        raise PreconditionError("tilde_x expects centered data")
    if not alpha.grid.matches(data.s_grid):
        raise PreconditionError("alpha must live on the dataset's s grid")
    wa = data.s_grid.weights * alpha.values
    return np.einsum("p,npq->nq", wa, data.x, optimize=True)


def _breve_x(beta: Func1D, data: TwoWayDataset) -> np.ndarray:
    """Symmetric contraction against beta (n x p)."""
    wb = data.t_grid.weights * beta.values
    return np.einsum("q,npq->np", wb, data.x, optimize=True)


def init_ridge_svd(data: TwoWayDataset, ridge_grid=None) -> tuple[Func1D, bool]:
    """Vectorized-ridge initializer for the first block.

    Fits a GCV-tuned ridge on rows vec(W_s x_i W_t), reshapes the coefficient
    to a p x q field and returns its leading left singular vector, sign-fixed.
    Falls back to the constant function when the ridge coefficient vanishes;
    the flag reports whether the fallback was taken.
    """
    if not data.centered:
        raise PreconditionError("initialization expects centered data")
    if ridge_grid is None:
        ridge_grid = default_lambda_grid()
    ws = data.s_grid.weights
    wt = data.t_grid.weights
    design = (data.x * ws[:, None] * wt[None, :]).reshape(data.n, -1)
    _, coef, _, _ = ridge_gcv(design, data.y, ridge_grid)
    b_field = coef.reshape(data.s_grid.m, data.t_grid.m)
    if not np.all(np.isfinite(b_field)) or np.linalg.norm(b_field) <= 1e-14 * (
        1.0 + float(np.linalg.norm(data.y))
    ):
        ones = np.ones(data.s_grid.m)
        return Func1D(data.s_grid, ones), True
    u, _, _ = np.linalg.svd(b_field, full_matrices=False)
    a0 = u[:, 0]
    if a0[np.argmax(np.abs(a0))] < 0:
        a0 = -a0
    return Func1D(data.s_grid, a0), False


def normalize_pair(alpha: Func1D, beta: Func1D) -> tuple[Func1D, Func1D]:
    """Unit quadrature-L2 alpha with positive peak; beta absorbs the scalar."""
    norm_a = np.sqrt(quad_inner(alpha, alpha))
    peak = float(np.max(np.abs(beta.values)))
    if norm_a == 0.0 or peak == 0.0:
        raise DegenerateIterateError("cannot normalize a zero coefficient pair")
    sign = 1.0 if alpha.values[np.argmax(np.abs(alpha.values))] >= 0 else -1.0
    scale = sign / norm_a
    return (
        Func1D(alpha.grid, alpha.values * scale),
        Func1D(beta.grid, beta.values / scale),
    )


def _jitter_form(grid: Grid1D, jitter: float) -> QuadForm:
    eye = QuadForm(grid, np.eye(grid.m))
    return combine_quadforms([(jitter, eye)])


class _HalfStep:
    """One axis of the descent: contraction, penalty assembly, solve, GCV."""

    def __init__(self, data, forms, mode, free_axis: str, jitter: float):
        self.data = data
        self.mode = mode
        self.jitter = jitter
        if free_axis == "t":
            self.grid = data.t_grid
            self.m0_fixed, self.mk_fixed = forms.m0s, forms.mks
            self.m0_free, self.mk_free = forms.m0t, forms.mkt
            self.contract = lambda fixed: tilde_x(fixed, data)
        else:
            self.grid = data.s_grid
            self.m0_fixed, self.mk_fixed = forms.m0t, forms.mkt
            self.m0_free, self.mk_free = forms.m0s, forms.mks
            self.contract = lambda fixed: _breve_x(fixed, data)

    def penalty(self, fixed: Func1D, lam_fixed: float, lam_free: float) -> QuadForm:
        if self.jitter > 0.0 and lam_fixed == 0.0 and lam_free == 0.0:
            return _jitter_form(self.grid, self.jitter)
        return step_penalty_quadform(
            fixed, lam_fixed, lam_free,
            self.m0_fixed, self.mk_fixed, self.m0_free, self.mk_free, self.mode,
        )

    def solve(self, fixed: Func1D, lam_fixed: float, lam_free: float) -> FlrFit:
        lines = self.contract(fixed)
        return flr_fit_ridge_form(
            lines, self.data.y, self.grid, self.penalty(fixed, lam_fixed, lam_free)
        )

    def tune(
        self, fixed: Func1D, lam_fixed: float, grid_vals, extra_df: float = 0.0
    ) -> tuple[float, FlrFit]:
        lines = self.contract(fixed)
        return select_lambda(
            lines,
            self.data.y,
            self.grid,
            lambda lam: self.penalty(fixed, lam_fixed, lam),
            grid_vals,
            extra_df=extra_df,
        )


def _check_iterate(values: np.ndarray, which: str) -> None:
    if float(np.max(np.abs(values))) < ITERATE_FLOOR:
        raise DegenerateIterateError(f"{which} iterate collapsed below {ITERATE_FLOOR}")


def _block_descent(
    data: TwoWayDataset,
    config: FblrConfig,
    forms: PenaltyForms,
    cov: SeparableCov,
    lam_a: float,
    lam_b: float,
    tune_a: bool,
    tune_b: bool,
    jitter: float = 0.0,
    alpha_init: Func1D | None = None,
) -> FblrFit:
    if not data.centered:
        raise PreconditionError("fitting requires centered data")
    mode = config.penalty_mode
    if alpha_init is None:
        alpha_init, _ = init_ridge_svd(data, config.lambda_grid)
    alpha = alpha_init
    beta: Func1D | None = None
    step_t = _HalfStep(data, forms, mode, "t", jitter)
    step_s = _HalfStep(data, forms, mode, "s", jitter)

    obj_scale = float(data.y @ data.y) / data.n

    def current_objective(a: Func1D, b: Func1D) -> float:
        val = objective(a, b, data, lam_a, lam_b, forms, mode)
        if jitter > 0.0:
            val += jitter * (float(a.values @ a.values) + float(b.values @ b.values))
        return val

    trace: list[float] = []
    trace_lams = (lam_a, lam_b)

    def record(a: Func1D, b: Func1D) -> float:
        nonlocal trace, trace_lams
        val = current_objective(a, b)
        if (lam_a, lam_b) != trace_lams:
            trace = [val]
            trace_lams = (lam_a, lam_b)
        else:
            if trace and val > trace[-1] * (1.0 + MONOTONE_TOL) + 1e-12 * obj_scale:
                raise InternalError(
                    f"half-step objective increased: {trace[-1]!r} -> {val!r}"
                )
            trace.append(val)
        return val

    converged = False
    n_iter = 0
    prev_pair: tuple[np.ndarray, np.ndarray] | None = None
    prev_obj: float | None = None
    best: tuple[float, Func1D, Func1D, float, float, list[float]] | None = None

    df_alpha = 0.0  # complexity spent on the other block, fed to GCV
    for n_iter in range(1, config.max_outer_iter + 1):
        round_lams = (lam_a, lam_b)
        if tune_b:
            lam_b, fit_b = step_t.tune(alpha, lam_a, config.lambda_grid, extra_df=df_alpha)
        else:
            fit_b = step_t.solve(alpha, lam_a, lam_b)
        beta = fit_b.coef
        _check_iterate(beta.values, "beta")
        record(alpha, beta)

        if tune_a:
            lam_a, fit_a = step_s.tune(beta, lam_b, config.lambda_grid, extra_df=fit_b.hat_trace)
        else:
            fit_a = step_s.solve(beta, lam_b, lam_a)
        df_alpha = fit_a.hat_trace
        alpha = fit_a.coef
        _check_iterate(alpha.values, "alpha")
        obj = record(alpha, beta)

        # fallback ranking for non-converged runs: objectives are comparable
        # across rounds only at fixed tuning values; under tuning, rank by the
        # half-step GCV scores instead
        score = 0.5 * (fit_b.gcv + fit_a.gcv) if (tune_a or tune_b) else obj
        if best is None or score <= best[0]:
            best = (score, alpha, beta, lam_a, lam_b, list(trace))

        pair = normalize_pair(alpha, beta)
        if prev_pair is not None:
            coef_change = max(
                float(np.max(np.abs(pair[0].values - prev_pair[0]))),
                float(np.max(np.abs(pair[1].values - prev_pair[1]))),
            )
            obj_change = abs(prev_obj - obj) / max(abs(prev_obj), 1e-300)
            lam_stable = (lam_a, lam_b) == round_lams
            if lam_stable and obj_change < config.obj_tol and coef_change < config.coef_tol:
                converged = True
                break
        prev_pair = (pair[0].values, pair[1].values)
        prev_obj = obj

    if not converged and best is not None:
        _, alpha, beta, lam_a, lam_b, trace = best
    alpha_n, beta_n = normalize_pair(alpha, beta)
    return FblrFit(
        alpha_hat=alpha_n,
        beta_hat=beta_n,
        mu_hat=data.y_mean,
        lambda_alpha=float(lam_a),
        lambda_beta=float(lam_b),
        objective_trace=np.asarray(trace),
        n_iter=n_iter,
        converged=converged,
        cov_used=cov,
        x_mean=np.array(data.x_mean),
    )


def fblr_fit(
    data: TwoWayDataset,
    config: FblrConfig,
    forms: PenaltyForms | None = None,
    cov: SeparableCov | None = None,
    alpha_init: Func1D | None = None,
    _jitter: float = 0.0,
) -> FblrFit:
    """Block descent at fixed tuning values."""
    la, lb = config.lambda_alpha, config.lambda_beta
    if la == TUNE or lb == TUNE:
        raise ValueError("fblr_fit needs numeric tuning values; use igcv_fit to tune")
    if forms is None or cov is None:
        forms, cov = build_forms(data, config)
    return _block_descent(
        data, config, forms, cov,
        lam_a=float(la), lam_b=float(lb),
        tune_a=False, tune_b=False, jitter=_jitter, alpha_init=alpha_init,
    )


def igcv_fit(
    data: TwoWayDataset,
    config: FblrConfig,
    forms: PenaltyForms | None = None,
    cov: SeparableCov | None = None,
    alpha_init: Func1D | None = None,
) -> FblrFit:
    """Block descent with per-half-step GCV tuning iterated to a fixed point.

    Each half-step selects the tuning value of the block being updated while
    the other block and its tuning value are held fixed; the loop ends when
    both selections repeat and the normalized coefficients have settled, and
    the fit at termination is returned without a refit.
    """
    grid = np.asarray(config.lambda_grid, dtype=float)
    tune_a = config.lambda_alpha == TUNE
    tune_b = config.lambda_beta == TUNE
    # a tuned value starts at the least-smoothing end so the other block's
    # first selection is driven by the data, not by the rough initializer
    lam_a = float(grid.min()) if tune_a else float(config.lambda_alpha)
    lam_b = float(grid.min()) if tune_b else float(config.lambda_beta)
    if forms is None or cov is None:
        forms, cov = build_forms(data, config)
    return _block_descent(
        data, config, forms, cov,
        lam_a=lam_a, lam_b=lam_b,
        tune_a=tune_a, tune_b=tune_b, alpha_init=alpha_init,
    )


@dataclass(frozen=True)
class RankRFit:
    """Stagewise fits on successive residuals plus the combined field."""

    fits: list[FblrFit]
    b_field: np.ndarray
    mu_hat: float


def rank_r_fit(
    data: TwoWayDataset,
    r: int,
    config: FblrConfig,
    forms: PenaltyForms | None = None,
    cov: SeparableCov | None = None,
) -> RankRFit:
    """Fit r rank-one terms, each on the previous stage's training residuals."""
    if r < 1:
        raise ValueError("need at least one stage")
    if forms is None or cov is None:
        forms, cov = build_forms(data, config)
    fits: list[FblrFit] = []
    stage = data
    mu_total = data.y_mean
    field = np.zeros((data.s_grid.m, data.t_grid.m))
    for _ in range(r):
        if config.tunes_any():
            fit = igcv_fit(stage, config, forms=forms, cov=cov)
        else:
            fit = fblr_fit(stage, config, forms=forms, cov=cov)
        fits.append(fit)
        field += np.outer(fit.alpha_hat.values, fit.beta_hat.values)
        resid = stage.y - bilinear_batch(fit.alpha_hat, stage.x, fit.beta_hat)
        resid_mean = float(resid.mean())
        mu_total += resid_mean
        stage = TwoWayDataset(
            s_grid=data.s_grid,
            t_grid=data.t_grid,
            x=data.x,
            y=resid - resid_mean,
            centered=True,
            x_mean=data.x_mean,
            y_mean=resid_mean,
        )
    return RankRFit(fits=fits, b_field=field, mu_hat=mu_total)


def predict(fit: FblrFit, x_new: np.ndarray):
    """Response prediction for one matrix or a stack of matrices."""
    x_new = np.asarray(x_new, dtype=float)
    single = x_new.ndim == 2
    batch = x_new[None, :, :] if single else x_new
    centered = batch - fit.x_mean
    vals = fit.mu_hat + bilinear_batch(fit.alpha_hat, centered, fit.beta_hat)
    return float(vals[0]) if single else vals


def predict_rank_r(rr: RankRFit, x_new: np.ndarray):
    """Prediction under the combined multi-term coefficient field."""
    x_new = np.asarray(x_new, dtype=float)
    single = x_new.ndim == 2
    batch = x_new[None, :, :] if single else x_new
    first = rr.fits[0]
    centered = (batch - first.x_mean).reshape(batch.shape[0], -1)
    ws = first.alpha_hat.grid.weights
    wt = first.beta_hat.grid.weights
    weighted = (ws[:, None] * rr.b_field * wt[None, :]).ravel()
    vals = rr.mu_hat + centered @ weighted
    return float(vals[0]) if single else vals
