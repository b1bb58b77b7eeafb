"""Covariance semi-norms, separable covariance estimation, the closed-form
excess prediction risk, and the spectral decay diagnostic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateFormError,
    DimensionError,
    NumericError,
    PreconditionError,
)
from .grids import Func1D, Grid1D, QuadForm, TwoWayDataset, _frozen_array

#: Scale convention for estimated factor pairs: trace(C_beta) * h_t = 1.
UNIT_BETA_TRACE = "unit-beta-trace"


@dataclass(frozen=True)
class SeparableCov:
    """Factor pair (C_alpha, C_beta) of a separable covariance on a grid pair."""

    c_alpha: np.ndarray
    c_beta: np.ndarray
    scale_convention: str = "unspecified"

    def __post_init__(self):
        object.__setattr__(self, "c_alpha", _frozen_array(self.c_alpha))
        object.__setattr__(self, "c_beta", _frozen_array(self.c_beta))
        for mat in (self.c_alpha, self.c_beta):
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise DimensionError("covariance factors must be square matrices")
            if np.max(np.abs(mat - mat.T)) > 1e-8 * max(np.max(np.abs(mat)), 1e-300):
                raise ValueError("covariance factors must be symmetric")


def seminorm0_quadform(c: np.ndarray, grid: Grid1D) -> QuadForm:
    """Form W C W whose value discretizes the covariance semi-norm squared."""
    c = np.asarray(c, dtype=float)
    if c.shape != (grid.m, grid.m):
        raise DimensionError(f"covariance shape {c.shape} does not match grid size {grid.m}")
    w = grid.weights
    mat = w[:, None] * c * w[None, :]
    return QuadForm(grid, 0.5 * (mat + mat.T))


def _normalize_factors(ca: np.ndarray, cb: np.ndarray, h_t: float):
    """Push the free scalar into the alpha factor so trace(C_beta) h_t = 1."""
    scale = float(np.trace(cb)) * h_t
    if not np.isfinite(scale) or scale <= 0:
        raise NumericError("flip-flop iterate lost positive trace")
    return ca * scale, cb / scale


def flipflop_factors(
    x: np.ndarray,
    h_t: float,
    ridge_eps: float = 1e-8,
    max_iter: int = 50,
    tol: float = 1e-6,
):
    """Alternating factor estimation for centered matrix samples.

    Returns (c_alpha, c_beta, sweeps, converged).  Works on raw (n, p, q)
    arrays so degenerate axes (q = 1) are usable outside the dataset type.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise DimensionError("expected an (n, p, q) sample stack")
    n, p, q = x.shape
    if n < 2:
        raise ValueError("flip-flop needs at least 2 samples")
    cb = np.eye(q) / h_t
    ca = np.zeros((p, p))
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        ca_prev, cb_prev = ca, cb
        eps_b = ridge_eps * float(np.trace(cb)) / q
        mb = np.linalg.inv(cb + eps_b * np.eye(q))
        ca = np.einsum("ipq,qr,isr->ps", x, mb, x, optimize=True) / (n * q)
        ca = 0.5 * (ca + ca.T)
        eps_a = ridge_eps * float(np.trace(ca)) / p
        ma = np.linalg.inv(ca + eps_a * np.eye(p))
        cb = np.einsum("ipq,pr,irs->qs", x, ma, x, optimize=True) / (n * p)
        cb = 0.5 * (cb + cb.T)
        ca, cb = _normalize_factors(ca, cb, h_t)
        if not (np.all(np.isfinite(ca)) and np.all(np.isfinite(cb))):
            raise NumericError("flip-flop produced a non-finite iterate")
        if sweeps > 1:
            da = np.linalg.norm(ca - ca_prev) / max(np.linalg.norm(ca_prev), 1e-300)
            db = np.linalg.norm(cb - cb_prev) / max(np.linalg.norm(cb_prev), 1e-300)
            if da < tol and db < tol:
                converged = True
                break
    return ca, cb, sweeps, converged


def flipflop_estimate(
    data: TwoWayDataset,
    ridge_eps: float = 1e-8,
    max_iter: int = 50,
    tol: float = 1e-6,
) -> SeparableCov:
    """Separable covariance of a centered dataset under the unit-beta-trace
    convention."""
    if not data.centered:
        raise PreconditionError("flip-flop estimation requires centered data")
    ca, cb, _, _ = flipflop_factors(
        data.x, data.t_grid.h, ridge_eps=ridge_eps, max_iter=max_iter, tol=tol
    )
    return SeparableCov(ca, cb, UNIT_BETA_TRACE)


def excess_risk_oracle(
    delta: np.ndarray, cov: SeparableCov, s_grid: Grid1D, t_grid: Grid1D
) -> float:
    """Closed-form excess prediction risk of a coefficient-field error delta.

    With A = W C_alpha W and B = W C_beta W this is trace(A delta B delta'),
    the variance of the covariate's action on delta.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (s_grid.m, t_grid.m):
        raise DimensionError(
            f"delta shape {delta.shape} does not match grids ({s_grid.m}, {t_grid.m})"
        )
    a = seminorm0_quadform(cov.c_alpha, s_grid).m_matrix
    b = seminorm0_quadform(cov.c_beta, t_grid).m_matrix
    val = float(np.sum((a @ delta) * (delta @ b)))
    return max(val, 0.0)


def pair_delta(
    alpha_hat: Func1D, beta_hat: Func1D, alpha0: Func1D, beta0: Func1D
) -> np.ndarray:
    """Coefficient-field error of a rank-one estimate against a rank-one truth."""
    return np.outer(alpha_hat.values, beta_hat.values) - np.outer(
        alpha0.values, beta0.values
    )


@dataclass(frozen=True)
class GammaSequence:
    """Joint spectrum of the covariance semi-norm against the kernel norm."""

    gammas: np.ndarray
    fitted_r: float
    basis: list[Func1D]
    unpenalized: list[Func1D]

    def __post_init__(self):
        object.__setattr__(self, "gammas", _frozen_array(self.gammas))
        g = self.gammas
        if g.size and (np.any(g <= 0) or np.any(np.diff(g) > 1e-12 * g[0])):
            raise ValueError("gammas must be positive and descending")


def fit_decay_exponent(gammas: np.ndarray, k_lo: int = 3, k_hi: int = 30) -> float:
    """Least-squares decay exponent r of gamma_k ~ k^(-2r) over [k_lo, k_hi]."""
    gammas = np.asarray(gammas, dtype=float)
    hi = min(gammas.size, k_hi)
    if hi - k_lo + 1 < 2:
        return float("nan")
    k = np.arange(k_lo, hi + 1)
    g = gammas[k_lo - 1 : hi]
    if np.any(g <= 0):
        return float("nan")
    slope = np.polyfit(np.log(k), np.log(g), 1)[0]
    return -0.5 * float(slope)


def gamma_sequence(m0: QuadForm, mk: QuadForm, k_max: int) -> GammaSequence:
    """Generalized eigenvalues of the pencil (M0, MK) on the range of MK.

    gamma_k is the k-th stationary value of the covariance semi-norm squared
    against the kernel norm squared; directions in the null space of MK are
    returned separately as unpenalized.  The basis is scaled so each member
    has unit covariance semi-norm where possible.
    """
    if not m0.grid.matches(mk.grid):
        raise DimensionError("both forms must live on the same grid")
    grid = m0.grid
    eigval, eigvec = np.linalg.eigh(mk.m_matrix)
    top = max(float(eigval[-1]), 0.0)
    if top <= 0:
        raise DegenerateFormError("the kernel form has no range")
    keep = eigval > 1e-10 * top
    if not np.any(keep):
        raise DegenerateFormError("the kernel form has no numerically nontrivial range")
    unpen = [Func1D(grid, eigvec[:, j]) for j in np.nonzero(~keep)[0]]
    proj = eigvec[:, keep] / np.sqrt(eigval[keep])
    core = proj.T @ m0.m_matrix @ proj
    gvals, gvecs = np.linalg.eigh(0.5 * (core + core.T))
    order = np.argsort(gvals)[::-1]
    gvals = np.clip(gvals[order], 0.0, None)
    omega = proj @ gvecs[:, order]
    pos = gvals > 0
    n_pos = int(np.count_nonzero(pos))
    k_eff = min(k_max, n_pos)
    gammas = gvals[:k_eff]
    basis = []
    for j in range(k_eff):
        v = omega[:, j] / np.sqrt(gvals[j])  # unit covariance semi-norm
        basis.append(Func1D(grid, v))
    return GammaSequence(
        gammas=gammas,
        fitted_r=fit_decay_exponent(gammas, 3, min(k_eff, 30)),
        basis=basis,
        unpenalized=unpen,
    )


def generalized_eig_oracle(m0: np.ndarray, mk: np.ndarray) -> np.ndarray:
    """Dense generalized eigensolver reference for SPD pencils (descending)."""
    vals = scipy.linalg.eigh(m0, mk, eigvals_only=True)
    return vals[::-1]
