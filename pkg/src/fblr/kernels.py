"""Reproducing kernels, roughness forms, and the cosine eigen-covariance.

Two kernel families have closed forms built from the 4th Bernoulli polynomial;
the roughness penalty integral of (f'')^2 is realized directly by second
differences and needs no kernel matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NumericError, UnsupportedSpecError
from .grids import Func1D, Grid1D, QuadForm, _frozen_array

#: Relative eigenvalue cutoff below which a Gram direction is treated as null
#: space (left unpenalized) when pseudo-inverting.
PINV_CUTOFF = 1e-10


@dataclass(frozen=True)
class SimBernoulli:
    """K(s,t) = -B4(|s-t|/2)/3 - B4((s+t)/2)/3; its norm is int (f'')^2 on the
    span of cos(k pi t), k >= 1."""


@dataclass(frozen=True)
class PeriodicBernoulli:
    """K(s,t) = 1 - B4(|s-t|)/24."""


@dataclass(frozen=True)
class SecondDerivRoughness:
    """The roughness penalty int (f'')^2 realized by second differences; has
    no kernel matrix."""


@dataclass(frozen=True)
class CustomGram:
    """A user-supplied symmetric PSD kernel matrix on the target grid."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen_array(self.matrix))


KernelSpec = Union[SimBernoulli, PeriodicBernoulli, SecondDerivRoughness, CustomGram]


def bernoulli_b4(x):
    """4th Bernoulli polynomial x^4 - 2x^3 + x^2 - 1/30 (Horner evaluation)."""
    x = np.asarray(x, dtype=float)
    out = ((x - 2.0) * x + 1.0) * (x * x) - 1.0 / 30.0
    return out if out.ndim else float(out)


def kernel_gram(spec: KernelSpec, grid: Grid1D) -> np.ndarray:
    """Entrywise kernel matrix K(t_i, t_j) on the grid."""
    if isinstance(spec, SecondDerivRoughness):
        raise UnsupportedSpecError("the roughness penalty has no kernel matrix")
    if isinstance(spec, CustomGram):
        mat = spec.matrix
        if mat.shape != (grid.m, grid.m):
            raise UnsupportedSpecError(
                f"custom Gram shape {mat.shape} does not match grid size {grid.m}"
            )
        _check_psd(mat)
        return np.array(mat)
    s = grid.points[:, None]
    t = grid.points[None, :]
    if isinstance(spec, SimBernoulli):
        gram = -bernoulli_b4(np.abs(s - t) / 2.0) / 3.0 - bernoulli_b4((s + t) / 2.0) / 3.0
    elif isinstance(spec, PeriodicBernoulli):
        gram = 1.0 - bernoulli_b4(np.abs(s - t)) / 24.0
    else:
        raise UnsupportedSpecError(f"unknown kernel spec {spec!r}")
    return 0.5 * (gram + gram.T)


def _check_psd(mat: np.ndarray) -> np.ndarray:
    eigs = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    top = max(float(eigs[-1]), 0.0)
    if float(eigs[0]) < -1e-8 * max(top, 1e-300):
        raise NumericError(
            f"kernel matrix is indefinite beyond tolerance (min eig {eigs[0]:.3e})"
        )
    return eigs


def rkhs_quadform(spec: KernelSpec, grid: Grid1D) -> QuadForm:
    """Quadratic form whose value approximates the squared kernel-space norm.

    For kernel specs this is the eigenvalue-cutoff pseudo-inverse of the Gram
    matrix: for f = G c on the grid, f' pinv(G) f = c' G c, the native-space
    norm of the section expansion.  For the roughness spec the form is the
    second-difference realization of int (f'')^2 with composite interior
    weights, which annihilates affine functions exactly.
    """
    if isinstance(spec, SecondDerivRoughness):
        m, h = grid.m, grid.h
        d2 = np.zeros((max(m - 2, 0), m))
        for k in range(m - 2):
            d2[k, k : k + 3] = (1.0, -2.0, 1.0)
        # interior-node rule extended to cover [0,1]: end rows pick up the
        # half-cells that have no second-difference node of their own
        r = np.full(max(m - 2, 0), h)
        if m > 2:
            r[0] += h / 2.0
            r[-1] += h / 2.0
        factor = (np.sqrt(r)[:, None] * d2) / h**2
        mat = factor.T @ factor
        return QuadForm(grid, 0.5 * (mat + mat.T), factor=factor)
    gram = kernel_gram(spec, grid)
    eigval, eigvec = np.linalg.eigh(gram)
    top = max(float(eigval[-1]), 0.0)
    if float(eigval[0]) < -1e-8 * max(top, 1e-300):
        raise NumericError("kernel Gram is numerically indefinite")
    inv = np.where(eigval > PINV_CUTOFF * top, 1.0 / np.where(eigval > 0, eigval, 1.0), 0.0)
    mat = (eigvec * inv) @ eigvec.T
    return QuadForm(grid, 0.5 * (mat + mat.T))


@dataclass(frozen=True)
class SpectralModel:
    """Descending eigenvalues with their (quadrature-orthonormal) eigenfunctions."""

    eigenvalues: np.ndarray
    eigenfunctions: list[Func1D]

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen_array(self.eigenvalues))
        ev = self.eigenvalues
        if ev.ndim != 1 or ev.size != len(self.eigenfunctions):
            raise ValueError("one eigenfunction per eigenvalue required")
        if np.any(ev < 0) or np.any(np.diff(ev) > 0):
            raise ValueError("eigenvalues must be nonnegative and descending")

    def basis_matrix(self) -> np.ndarray:
        """Grid values of the eigenfunctions as columns (m x k)."""
        return np.column_stack([f.values for f in self.eigenfunctions])


def cosine_covariance(
    r_c: float, n_terms: int, grid: Grid1D
) -> tuple[np.ndarray, SpectralModel]:
    """Covariance sum_{i<=n_terms} 2 i^(-2 r_c) cos(i pi s) cos(i pi t) on the grid.

    Returns the matrix together with its spectral model: eigenvalues i^(-2 r_c)
    paired with sqrt(2) cos(i pi t).
    """
    if r_c <= 0:
        raise ValueError("decay exponent r_c must be positive")
    if n_terms < 1:
        raise ValueError("need at least one eigen term")
    idx = np.arange(1, n_terms + 1)
    eigvals = idx ** (-2.0 * r_c)
    phi = np.cos(np.pi * np.outer(grid.points, idx))  # m x k, unnormalized
    mat = (phi * (2.0 * eigvals)) @ phi.T
    funcs = [
        Func1D(grid, np.sqrt(2.0) * phi[:, j]) for j in range(n_terms)
    ]
    return 0.5 * (mat + mat.T), SpectralModel(eigvals, funcs)
