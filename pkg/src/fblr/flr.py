"""Penalized scalar-on-function linear regression and GCV machinery.

Both solver routes are provided: the ridge form solves the normal equations
on grid values with a merged penalty form, the representer form solves the
n x n dual system through a kernel matrix.  They coincide when the penalty is
the pseudo-inverse of the kernel Gram.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.linalg.lapack import dpocon

from .errors import (
    DegenerateGcvError,
    DimensionError,
    IllPosedError,
    NoValidLambdaError,
)
from .grids import Func1D, Grid1D, QuadForm

#: Condition-number threshold beyond which a normal-equation solve is refused.
CONDITION_LIMIT = 1e10

#: Candidates whose effective degrees of freedom exceed this fraction of n are
#: skipped during tuning: near interpolation GCV degenerates to 0/0 and its
#: minimizer is meaningless.
GCV_DF_CAP = 0.95

#: Marker used when the tuning factor has been merged into the penalty form.
MERGED = "merged"


def default_lambda_grid(lo: float = 1e-10, hi: float = 1.0, count: int = 25) -> np.ndarray:
    """Log-spaced tuning grid; the range brackets all uses in this package."""
    if count < 1 or lo <= 0 or hi < lo:
        raise ValueError("need 0 < lo <= hi and count >= 1")
    if count == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, count)


@dataclass(frozen=True)
class FlrFit:
    """A fitted one-way regression: coefficient, fitted values, GCV inputs."""

    coef: Func1D
    fitted: np.ndarray
    hat_trace: float
    gcv: float
    lam: Union[float, str]


def _as_matrix(x, grid: Grid1D) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != grid.m:
        raise DimensionError(f"design shape {x.shape} does not match grid size {grid.m}")
    return x


def _solve_spd(mat: np.ndarray, what: str):
    """Cholesky factorization with a condition estimate; raises IllPosedError."""
    anorm = float(np.max(np.abs(mat).sum(axis=0)))
    try:
        factor = cho_factor(mat, lower=True)
    except LinAlgError as exc:
        raise IllPosedError(f"{what}: normal matrix is not positive definite") from exc
    rcond, info = dpocon(factor[0], anorm, uplo=b"L")
    if info != 0 or not np.isfinite(rcond) or rcond < 1.0 / CONDITION_LIMIT:
        raise IllPosedError(
            f"{what}: condition estimate {1.0 / max(rcond, 1e-300):.2e} exceeds {CONDITION_LIMIT:.0e}"
        )
    return factor


def flr_fit_ridge_form(x, y, grid: Grid1D, penalty: QuadForm) -> FlrFit:
    """Solve (A'A/n + M) beta = A'y/n with A the quadrature-weighted design.

    The tuning factor is assumed merged into the penalty form M.
    """
    x = _as_matrix(x, grid)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if x.shape[0] != n:
        raise DimensionError("design and response lengths differ")
    if not penalty.grid.matches(grid):
        raise DimensionError("penalty form lives on a different grid")
    a = x * grid.weights
    gram = a.T @ a / n
    factor = _solve_spd(gram + penalty.m_matrix, "ridge-form fit")
    coef = cho_solve(factor, a.T @ y / n)
    hat_trace = float(np.trace(cho_solve(factor, gram)))
    fitted = a @ coef
    return FlrFit(
        coef=Func1D(grid, coef),
        fitted=fitted,
        hat_trace=hat_trace,
        gcv=gcv_score(hat_trace, y - fitted, n),
        lam=MERGED,
    )


def flr_fit_representer(x, y, grid: Grid1D, kernel_gram: np.ndarray, lam: float) -> FlrFit:
    """Dual-form solve: c = (Sigma + n lam I)^-1 y with Sigma the kernelized
    design Gram, coefficient K W X' c."""
    if lam <= 0:
        raise ValueError("representer form needs lam > 0")
    x = _as_matrix(x, grid)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    b = x * grid.weights
    sigma = b @ kernel_gram @ b.T
    sigma = 0.5 * (sigma + sigma.T)
    factor = _solve_spd(sigma + n * lam * np.eye(n), "representer fit")
    c = cho_solve(factor, y)
    coef = kernel_gram @ b.T @ c
    fitted = sigma @ c
    hat_trace = float(np.trace(cho_solve(factor, sigma)))
    return FlrFit(
        coef=Func1D(grid, coef),
        fitted=fitted,
        hat_trace=hat_trace,
        gcv=gcv_score(hat_trace, y - fitted, n),
        lam=float(lam),
    )


def gcv_score(hat_trace: float, residuals, n: int) -> float:
    """Generalized cross validation score (||r||^2/n) / (1 - tr H / n)^2."""
    if hat_trace >= n:
        raise DegenerateGcvError(
            f"effective degrees of freedom {hat_trace:.3f} >= sample size {n}"
        )
    r = np.asarray(residuals, dtype=float).ravel()
    return float(r @ r / n) / (1.0 - hat_trace / n) ** 2


def select_lambda(
    x,
    y,
    grid: Grid1D,
    penalty_family: Callable[[float], QuadForm],
    lambdas: Sequence[float],
    extra_df: float = 0.0,
) -> tuple[float, FlrFit]:
    """Fit every candidate penalty and keep the GCV minimizer.

    Candidates are scanned in ascending order and ties are resolved toward
    the larger (smoother) tuning value.  Ill-posed candidates are skipped.

    ``extra_df`` counts degrees of freedom already spent by an enclosing
    procedure (the other block of an alternating fit); it enters the GCV
    denominator so that co-adapted blocks cannot ratchet the pair toward
    joint interpolation, each half-step blind to the other's complexity.
    """
    cands = sorted(float(l) for l in lambdas)
    if not cands:
        raise ValueError("the tuning grid must be nonempty")
    best: tuple[float, FlrFit, float] | None = None
    fallback: tuple[float, FlrFit] | None = None
    n = np.asarray(y).size
    for lam in cands:
        try:
            fit = flr_fit_ridge_form(x, y, grid, penalty_family(lam))
        except IllPosedError:
            continue
        total_df = fit.hat_trace + extra_df
        if total_df > GCV_DF_CAP * n:
            fallback = (lam, fit)  # largest capped lam = least degenerate
            continue
        resid = np.asarray(y, dtype=float).ravel() - fit.fitted
        score = gcv_score(total_df, resid, n)
        if best is None or score <= best[2]:
            best = (lam, fit, score)
    if best is None:
        if fallback is None:
            raise NoValidLambdaError("every tuning candidate produced an ill-posed system")
        return fallback
    return best[0], best[1]


def ridge_gcv(design: np.ndarray, y: np.ndarray, lambdas: Sequence[float]):
    """GCV-tuned plain ridge on an arbitrary design via one SVD.

    Minimizes ||y - D b||^2 + n lam ||b||^2; returns (lam, coef, hat_trace, gcv).
    Ties go to the larger lam.
    """
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    uy = u.T @ y
    ss = s * s
    out_of_span = float(y @ y - uy @ uy)
    best = None
    fallback = None
    for lam in sorted(float(l) for l in lambdas):
        shrink = ss / (ss + n * lam) if lam > 0 else np.where(ss > 0, 1.0, 0.0)
        hat_trace = float(shrink.sum())
        if hat_trace >= n:
            continue
        resid_sq = float(((1.0 - shrink) ** 2 * uy**2).sum()) + max(out_of_span, 0.0)
        score = (resid_sq / n) / (1.0 - hat_trace / n) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(ss + n * lam > 0, s / (ss + n * lam), 0.0)
        if hat_trace > GCV_DF_CAP * n:
            fallback = (lam, vt.T @ (scale * uy), hat_trace, score)
            continue
        if best is None or score <= best[3]:
            best = (lam, vt.T @ (scale * uy), hat_trace, score)
    if best is None:
        best = fallback
    if best is None:
        raise NoValidLambdaError("ridge GCV found no usable tuning value")
    return best
