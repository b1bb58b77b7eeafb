"""Command-line front end: fit, predict, risk, diagnostics, and benchmarks.

All numeric output is written as CSV with a header row using 17 significant
digits so files round-trip bitwise.  Exit codes: 0 success, 1 model/runtime
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bilinear import FblrConfig, PenaltyMode, fblr_fit, igcv_fit, predict
from .covariance import (
    SeparableCov,
    excess_risk_oracle,
    flipflop_estimate,
    gamma_sequence,
    seminorm0_quadform,
)
from .errors import DataError, FblrError
from .flr import default_lambda_grid
from .grids import Func1D, center_dataset, make_uniform_grid
from .kernels import (
    CustomGram,
    PeriodicBernoulli,
    SecondDerivRoughness,
    SimBernoulli,
    cosine_covariance,
    rkhs_quadform,
)
from .simulate import METHOD_NAMES, run_benchmark
from .threads import limit_blas_threads

_FMT = "%.17g"


def _fmt(v) -> str:
    return _FMT % float(v)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

@dataclass
class Manifest:
    n: int
    p: int
    q: int
    layout: str
    x_path: Path
    y_path: Path
    delimiter: str = ","


def read_keyvalue(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_keyvalue(path: Path, items: dict[str, str]) -> None:
    path.write_text("".join(f"{k} = {v}\n" for k, v in items.items()))


def read_manifest(path: Path) -> Manifest:
    kv = read_keyvalue(path)
    try:
        man = Manifest(
            n=int(kv["n"]),
            p=int(kv["p"]),
            q=int(kv["q"]),
            layout=kv.get("layout", "row-major"),
            x_path=(path.parent / kv["x_path"]),
            y_path=(path.parent / kv["y_path"]),
            delimiter=kv.get("delimiter", ","),
        )
    except KeyError as exc:
        raise DataError(f"{path}: manifest is missing key {exc}") from exc
    if man.layout != "row-major":
        raise DataError(f"{path}: unsupported layout {man.layout!r} (only row-major)")
    return man


def read_x_file(path: Path, n: int, p: int, q: int, delimiter: str) -> np.ndarray:
    rows = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(delimiter)
            if len(fields) != p * q:
                raise DataError(
                    f"{path}:{lineno}: expected {p * q} values per row, found {len(fields)}"
                )
            rows.append(np.array(fields, dtype=float))
    if len(rows) != n:
        raise DataError(f"{path}: expected {n} rows, found {len(rows)}")
    return np.stack(rows).reshape(n, p, q)


def read_y_file(path: Path, n: int) -> np.ndarray:
    vals = [float(s) for s in path.read_text().split()]
    if len(vals) != n:
        raise DataError(f"{path}: expected {n} responses, found {len(vals)}")
    return np.array(vals)


def write_function_csv(path: Path, func: Func1D) -> None:
    with path.open("w") as fh:
        fh.write("grid_point,value\n")
        for t, v in zip(func.grid.points, func.values):
            fh.write(f"{_fmt(t)},{_fmt(v)}\n")


def read_function_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    pts, vals = [], []
    with path.open() as fh:
        next(fh)
        for line in fh:
            if line.strip():
                a, b = line.strip().split(",")
                pts.append(float(a))
                vals.append(float(b))
    return np.array(pts), np.array(vals)


def write_matrix_csv(path: Path, mat: np.ndarray) -> None:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    with path.open("w") as fh:
        fh.write(",".join(f"c{j}" for j in range(mat.shape[1])) + "\n")
        for row in mat:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_matrix_csv(path: Path) -> np.ndarray:
    rows = []
    with path.open() as fh:
        next(fh)
        for line in fh:
            if line.strip():
                rows.append([float(s) for s in line.strip().split(",")])
    return np.array(rows)


# ---------------------------------------------------------------------------
# shared option handling
# ---------------------------------------------------------------------------

def _load_config_file(args) -> dict[str, str]:
    if getattr(args, "config", None):
        return read_keyvalue(Path(args.config))
    return {}

def _merged(args, file_cfg: dict[str, str], key: str, default, cast):
    """Flag value if given, else config-file entry, else the default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag if cast is None else cast(flag)
    if key in file_cfg:
        return cast(file_cfg[key]) if cast else file_cfg[key]
    return default


def _parse_lambda(text: str):
    if text == "tune":
        return "tune"
    return float(text)


def _parse_lambda_grid(text: str) -> np.ndarray:
    try:
        lo, hi, count = text.split(",")
        return default_lambda_grid(float(lo), float(hi), int(count))
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad --lambda-grid {text!r}; expected lo,hi,count") from exc


_KERNELS = {
    "secondderiv": SecondDerivRoughness,
    "simbernoulli": SimBernoulli,
    "periodicbernoulli": PeriodicBernoulli,
}


def _kernel_from_name(name: str):
    try:
        return _KERNELS[name]()
    except KeyError:
        raise DataError(f"unknown kernel {name!r}; choose from {sorted(_KERNELS)}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg_file = _load_config_file(args)
    out_dir = Path(_merged(args, cfg_file, "out_dir", ".", str))
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = (
        _parse_lambda_grid(args.lambda_grid)
        if args.lambda_grid
        else default_lambda_grid()
    )
    config = FblrConfig(lambda_grid=grid)
    ns = [int(s) for s in args.n.split(",")]
    methods = [m.strip() for m in args.methods.split(",")]
    t0 = time.perf_counter()
    result = run_benchmark(
        settings=[(args.setting, args.rc)],
        ns=ns,
        methods=methods,
        reps=args.reps,
        base_seed=args.seed,
        sigma=_merged(args, cfg_file, "sigma", 0.5, float),
        grid_len=_merged(args, cfg_file, "grid_len", 100, int),
        config=config,
        threads=_merged(args, cfg_file, "threads", 1, int),
    )
    seconds = time.perf_counter() - t0

    # risks and timings live in separate tables: risks are bit-reproducible
    # given the flags, wall time never is
    with (out_dir / "replications.csv").open("w") as fh:
        fh.write("method,setting,r_c,n,rep,risk,error\n")
        for r in result.rows:
            err = "" if r.error is None else r.error.replace(",", ";").replace("\n", " ")
            fh.write(
                f"{r.method},{r.setting_id},{_fmt(r.r_c)},{r.n},{r.rep},"
                f"{_fmt(r.risk)},{err}\n"
            )
    with (out_dir / "timings.csv").open("w") as fh:
        fh.write("method,setting,r_c,n,rep,seconds\n")
        for r in result.rows:
            fh.write(
                f"{r.method},{r.setting_id},{_fmt(r.r_c)},{r.n},{r.rep},{_fmt(r.seconds)}\n"
            )
    with (out_dir / "aggregate.csv").open("w") as fh:
        fh.write("method,setting,r_c,n,mean_risk,se_risk,n_reps\n")
        for a in result.aggregates:
            fh.write(
                f"{a.method},{a.setting_id},{_fmt(a.r_c)},{a.n},"
                f"{_fmt(a.mean_risk)},{_fmt(a.se_risk)},{a.n_reps}\n"
            )
    with (out_dir / "slopes.csv").open("w") as fh:
        fh.write("method,setting,r_c,slope,stderr\n")
        for s in result.slopes:
            fh.write(
                f"{s.method},{s.setting_id},{_fmt(s.r_c)},{_fmt(s.slope)},{_fmt(s.stderr)}\n"
            )
    write_keyvalue(
        out_dir / "summary.txt",
        {
            "command": "simulate",
            "setting": str(args.setting),
            "r_c": _fmt(args.rc),
            "n": args.n,
            "reps": str(args.reps),
            "seed": str(args.seed),
            "methods": ",".join(methods),
            "seconds": _fmt(seconds),
            "out_replications": "replications.csv",
            "out_timings": "timings.csv",
            "out_aggregate": "aggregate.csv",
            "out_slopes": "slopes.csv",
        },
    )
    print(f"wrote {len(result.rows)} rows to {out_dir / 'replications.csv'}")
    return 0


def _load_dataset(manifest_path: Path):
    man = read_manifest(manifest_path)
    x = read_x_file(man.x_path, man.n, man.p, man.q, man.delimiter)
    y = read_y_file(man.y_path, man.n)
    s_grid = make_uniform_grid(man.p)
    t_grid = make_uniform_grid(man.q)
    return center_dataset(x, y, s_grid, t_grid), man


def cmd_fit(args) -> int:
    cfg_file = _load_config_file(args)
    out_dir = Path(_merged(args, cfg_file, "out_dir", ".", str))
    out_dir.mkdir(parents=True, exist_ok=True)
    data, _ = _load_dataset(Path(args.manifest))

    kernel_s = _kernel_from_name(_merged(args, cfg_file, "kernel", "secondderiv", str))
    kernel_t_name = _merged(args, cfg_file, "kernel_t", None, str)
    kernel_t = _kernel_from_name(kernel_t_name) if kernel_t_name else kernel_s
    if args.cov_alpha or args.cov_beta:
        if not (args.cov_alpha and args.cov_beta):
            raise DataError("provide both --cov-alpha and --cov-beta or neither")
        covariance = SeparableCov(
            read_matrix_csv(Path(args.cov_alpha)),
            read_matrix_csv(Path(args.cov_beta)),
            "user-supplied",
        )
    else:
        covariance = "estimate"
    lam_a = _parse_lambda(_merged(args, cfg_file, "lambda_alpha", "tune", str))
    lam_b = _parse_lambda(_merged(args, cfg_file, "lambda_beta", "tune", str))
    grid = (
        _parse_lambda_grid(args.lambda_grid)
        if args.lambda_grid
        else default_lambda_grid()
    )
    config = FblrConfig(
        lambda_alpha=lam_a,
        lambda_beta=lam_b,
        lambda_grid=grid,
        penalty_mode=PenaltyMode(_merged(args, cfg_file, "penalty_mode", 3, int)),
        kernel_s=kernel_s,
        kernel_t=kernel_t,
        covariance=covariance,
    )
    t0 = time.perf_counter()
    if config.tunes_any():
        fit = igcv_fit(data, config)
    else:
        fit = fblr_fit(data, config)
    seconds = time.perf_counter() - t0

    write_function_csv(out_dir / "alpha_hat.csv", fit.alpha_hat)
    write_function_csv(out_dir / "beta_hat.csv", fit.beta_hat)
    write_matrix_csv(out_dir / "b_hat.csv", fit.coefficient_field())
    write_matrix_csv(out_dir / "x_mean.csv", fit.x_mean)
    write_keyvalue(
        out_dir / "summary.txt",
        {
            "command": "fit",
            "manifest": str(args.manifest),
            "kernel": _merged(args, cfg_file, "kernel", "secondderiv", str),
            "penalty_mode": str(config.penalty_mode.value),
            "covariance": "files" if isinstance(covariance, SeparableCov) else "estimate",
            "lambda_alpha": _fmt(fit.lambda_alpha),
            "lambda_beta": _fmt(fit.lambda_beta),
            "mu_hat": _fmt(fit.mu_hat),
            "n_iter": str(fit.n_iter),
            "converged": str(fit.converged).lower(),
            "objective_final": _fmt(fit.objective_trace[-1]),
            "seconds": _fmt(seconds),
            "out_alpha": "alpha_hat.csv",
            "out_beta": "beta_hat.csv",
            "out_field": "b_hat.csv",
            "out_x_mean": "x_mean.csv",
        },
    )
    print(
        f"fit done: lambda=({fit.lambda_alpha:.6g}, {fit.lambda_beta:.6g}) "
        f"iters={fit.n_iter} converged={fit.converged}"
    )
    return 0


def cmd_predict(args) -> int:
    fit_dir = Path(args.fit_dir)
    summary = read_keyvalue(fit_dir / "summary.txt")
    _, alpha_vals = read_function_csv(fit_dir / "alpha_hat.csv")
    _, beta_vals = read_function_csv(fit_dir / "beta_hat.csv")
    x_mean = read_matrix_csv(fit_dir / "x_mean.csv")
    mu = float(summary["mu_hat"])
    p, q = alpha_vals.size, beta_vals.size
    s_grid, t_grid = make_uniform_grid(p), make_uniform_grid(q)
    x = read_x_file(Path(args.x), _count_rows(Path(args.x)), p, q, args.delimiter)
    alpha = Func1D(s_grid, alpha_vals)
    beta = Func1D(t_grid, beta_vals)
    wa = s_grid.weights * alpha_vals
    wb = t_grid.weights * beta_vals
    preds = mu + (x - x_mean).reshape(x.shape[0], -1) @ np.outer(wa, wb).ravel()
    out = Path(args.out) if args.out else fit_dir / "predictions.csv"
    with out.open("w") as fh:
        fh.write("index,prediction\n")
        for i, v in enumerate(preds):
            fh.write(f"{i},{_fmt(v)}\n")
    print(f"wrote {preds.size} predictions to {out}")
    return 0


def _count_rows(path: Path) -> int:
    with path.open() as fh:
        return sum(1 for line in fh if line.strip())


def _load_pair_or_field(prefix: str, args) -> np.ndarray:
    field_path = getattr(args, f"{prefix}_b")
    if field_path:
        return read_matrix_csv(Path(field_path))
    a_path = getattr(args, f"{prefix}_alpha")
    b_path = getattr(args, f"{prefix}_beta")
    if not (a_path and b_path):
        raise DataError(
            f"provide --{prefix}-b or both --{prefix}-alpha and --{prefix}-beta"
        )
    _, a = read_function_csv(Path(a_path))
    _, b = read_function_csv(Path(b_path))
    return np.outer(a, b)


def cmd_risk(args) -> int:
    est = _load_pair_or_field("est", args)
    true = _load_pair_or_field("true", args)
    if est.shape != true.shape:
        raise DataError(f"estimate shape {est.shape} != truth shape {true.shape}")
    cov = SeparableCov(
        read_matrix_csv(Path(args.cov_alpha)),
        read_matrix_csv(Path(args.cov_beta)),
        "user-supplied",
    )
    s_grid = make_uniform_grid(est.shape[0])
    t_grid = make_uniform_grid(est.shape[1])
    risk = excess_risk_oracle(est - true, cov, s_grid, t_grid)
    print(f"{risk:.12g}")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_keyvalue(out_dir / "risk.txt", {"risk": f"{risk:.12g}"})
    return 0


def cmd_diag_gamma(args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    grid = make_uniform_grid(args.grid_len)
    if args.m0_file:
        from .grids import QuadForm

        m0 = QuadForm(grid, read_matrix_csv(Path(args.m0_file)))
    else:
        if args.cov_matrix:
            c = read_matrix_csv(Path(args.cov_matrix))
        else:
            c, _ = cosine_covariance(args.rc, 200, grid)
        m0 = seminorm0_quadform(c, grid)
    if args.mk_file:
        from .grids import QuadForm

        mk = QuadForm(grid, read_matrix_csv(Path(args.mk_file)))
    elif args.kernel_gram:
        mk = rkhs_quadform(CustomGram(read_matrix_csv(Path(args.kernel_gram))), grid)
    elif args.kernel == "cosine":
        gram, _ = cosine_covariance(args.kernel_rc, min(200, args.grid_len - 1), grid)
        mk = rkhs_quadform(CustomGram(gram), grid)
    else:
        mk = rkhs_quadform(_kernel_from_name(args.kernel), grid)
    seq = gamma_sequence(m0, mk, args.k)
    k_eff = seq.gammas.size
    note = None
    if k_eff < args.k:
        note = f"truncated to {k_eff} values (rank limit)"
        print(f"note: {note}", file=sys.stderr)
    ks = np.arange(1, k_eff + 1)
    logk, logg = np.log(ks), np.log(seq.gammas)
    lo, hi = 3, min(k_eff, 30)
    if hi - lo + 1 >= 2:
        coef = np.polyfit(logk[lo - 1 : hi], logg[lo - 1 : hi], 1)
        resid = logg - np.polyval(coef, logk)
    else:
        resid = np.full(k_eff, np.nan)
    if out_dir:
        with (out_dir / "gamma.csv").open("w") as fh:
            fh.write("k,gamma,loglog_residual\n")
            for k, gval, rv in zip(ks, seq.gammas, resid):
                fh.write(f"{k},{_fmt(gval)},{_fmt(rv)}\n")
        summary = {
            "command": "diag-gamma",
            "k_requested": str(args.k),
            "k_available": str(k_eff),
            "fitted_r": _fmt(seq.fitted_r),
            "n_unpenalized": str(len(seq.unpenalized)),
        }
        if note:
            summary["note"] = note
        write_keyvalue(out_dir / "summary.txt", summary)
    print(f"fitted_r = {seq.fitted_r:.6g}")
    return 0


def cmd_estimate_cov(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data, _ = _load_dataset(Path(args.manifest))
    cov = flipflop_estimate(
        data, ridge_eps=args.ridge_eps, max_iter=args.max_iter, tol=args.tol
    )
    write_matrix_csv(out_dir / "c_alpha.csv", cov.c_alpha)
    write_matrix_csv(out_dir / "c_beta.csv", cov.c_beta)
    write_keyvalue(
        out_dir / "summary.txt",
        {
            "command": "estimate-cov",
            "scale_convention": cov.scale_convention,
            "out_c_alpha": "c_alpha.csv",
            "out_c_beta": "c_beta.csv",
        },
    )
    print(f"wrote covariance factors to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fblr",
        description="Penalized functional bilinear regression toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the seeded benchmark harness")
    p_sim.add_argument("--setting", type=int, required=True)
    p_sim.add_argument("--rc", type=float, default=1.0)
    p_sim.add_argument("--n", type=str, required=True, help="comma list of sample sizes")
    p_sim.add_argument("--reps", type=int, default=20)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--methods", type=str, default="fblr")
    p_sim.add_argument("--sigma", type=float, default=None)
    p_sim.add_argument("--grid-len", dest="grid_len", type=int, default=None)
    p_sim.add_argument("--threads", type=int, default=None)
    p_sim.add_argument("--out-dir", dest="out_dir", type=str, default=None)
    p_sim.add_argument("--lambda-grid", dest="lambda_grid", type=str, default=None)
    p_sim.add_argument("--config", type=str, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit the bilinear model to a dataset")
    p_fit.add_argument("--manifest", type=str, required=True)
    p_fit.add_argument("--kernel", type=str, default=None)
    p_fit.add_argument("--kernel-t", dest="kernel_t", type=str, default=None)
    p_fit.add_argument("--penalty-mode", dest="penalty_mode", type=int, default=None)
    p_fit.add_argument("--lambda-alpha", dest="lambda_alpha", type=str, default=None)
    p_fit.add_argument("--lambda-beta", dest="lambda_beta", type=str, default=None)
    p_fit.add_argument("--cov-alpha", dest="cov_alpha", type=str, default=None)
    p_fit.add_argument("--cov-beta", dest="cov_beta", type=str, default=None)
    p_fit.add_argument("--lambda-grid", dest="lambda_grid", type=str, default=None)
    p_fit.add_argument("--out-dir", dest="out_dir", type=str, default=None)
    p_fit.add_argument("--config", type=str, default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="predict responses from a saved fit")
    p_pred.add_argument("--fit-dir", dest="fit_dir", type=str, required=True)
    p_pred.add_argument("--x", type=str, required=True)
    p_pred.add_argument("--delimiter", type=str, default=",")
    p_pred.add_argument("--out", type=str, default=None)
    p_pred.set_defaults(func=cmd_predict)

    p_risk = sub.add_parser("risk", help="closed-form excess risk of an estimate")
    p_risk.add_argument("--est-alpha", dest="est_alpha", type=str, default=None)
    p_risk.add_argument("--est-beta", dest="est_beta", type=str, default=None)
    p_risk.add_argument("--est-b", dest="est_b", type=str, default=None)
    p_risk.add_argument("--true-alpha", dest="true_alpha", type=str, default=None)
    p_risk.add_argument("--true-beta", dest="true_beta", type=str, default=None)
    p_risk.add_argument("--true-b", dest="true_b", type=str, default=None)
    p_risk.add_argument("--cov-alpha", dest="cov_alpha", type=str, required=True)
    p_risk.add_argument("--cov-beta", dest="cov_beta", type=str, required=True)
    p_risk.add_argument("--out-dir", dest="out_dir", type=str, default=None)
    p_risk.set_defaults(func=cmd_risk)

    p_gam = sub.add_parser("diag-gamma", help="joint spectral decay diagnostic")
    p_gam.add_argument(
        "--kernel",
        type=str,
        default="secondderiv",
        help="secondderiv | simbernoulli | periodicbernoulli | cosine",
    )
    p_gam.add_argument("--kernel-rc", dest="kernel_rc", type=float, default=1.0,
                       help="eigen decay of the cosine kernel (kernel=cosine)")
    p_gam.add_argument("--kernel-gram", dest="kernel_gram", type=str, default=None)
    p_gam.add_argument("--rc", type=float, default=1.0)
    p_gam.add_argument("--cov-matrix", dest="cov_matrix", type=str, default=None)
    p_gam.add_argument("--m0-file", dest="m0_file", type=str, default=None)
    p_gam.add_argument("--mk-file", dest="mk_file", type=str, default=None)
    p_gam.add_argument("--k", type=int, default=30)
    p_gam.add_argument("--grid-len", dest="grid_len", type=int, default=201)
    p_gam.add_argument("--out-dir", dest="out_dir", type=str, default=None)
    p_gam.set_defaults(func=cmd_diag_gamma)

    p_cov = sub.add_parser("estimate-cov", help="separable covariance estimation")
    p_cov.add_argument("--manifest", type=str, required=True)
    p_cov.add_argument("--out-dir", dest="out_dir", type=str, required=True)
    p_cov.add_argument("--ridge-eps", dest="ridge_eps", type=float, default=1e-8)
    p_cov.add_argument("--max-iter", dest="max_iter", type=int, default=50)
    p_cov.add_argument("--tol", type=float, default=1e-6)
    p_cov.set_defaults(func=cmd_estimate_cov)

    return parser


def _validate_usage(parser: argparse.ArgumentParser, args) -> None:
    if args.command == "simulate":
        if args.setting not in (1, 2, 3, 4, 5):
            parser.error(f"setting {args.setting} is not supported (choose 1-5)")
        bad = [m for m in args.methods.split(",") if m.strip() not in METHOD_NAMES]
        if bad:
            parser.error(f"unknown methods {bad}; choose from {sorted(METHOD_NAMES)}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate_usage(parser, args)
    limit_blas_threads(1)
    try:
        return args.func(args)
    except (FblrError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
