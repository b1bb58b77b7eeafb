"""Uniform grids, trapezoid quadrature, grid functions, and two-way datasets.

Every function space in the package is represented by pointwise values on a
fixed uniform grid over [0, 1]; integrals are trapezoid sums and squared
(semi-)norms are quadratic forms on grid values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Grid1D:
    """Uniform abscissae on [0, 1] with positive quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen_array(self.points))
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        p, w = self.points, self.weights
        if p.ndim != 1 or p.shape != w.shape or p.size < 2:
            raise ValueError("grid needs 1-d points and weights of equal length >= 2")
        if p[0] != 0.0 or p[-1] != 1.0:
            raise ValueError("grid must span [0, 1] exactly")
        d = np.diff(p)
        if np.any(d <= 0) or np.max(np.abs(d - self.h)) > 1e-12:
            raise ValueError("grid points must increase uniformly")
        if np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to the domain length 1")

    @property
    def m(self) -> int:
        return self.points.size

    @property
    def h(self) -> float:
        return 1.0 / (self.points.size - 1)

    def matches(self, other: "Grid1D") -> bool:
        return self is other or (
            self.m == other.m and np.array_equal(self.points, other.points)
        )


def make_uniform_grid(m: int) -> Grid1D:
    """Uniform grid of ``m`` points on [0, 1] with trapezoid weights."""
    if m < 2:
        raise ValueError(f"need at least 2 grid points, got {m}")
    h = 1.0 / (m - 1)
    w = np.full(m, h)
    w[0] = w[-1] = h / 2.0
    return Grid1D(np.linspace(0.0, 1.0, m), w)


@dataclass(frozen=True)
class Func1D:
    """A real function known through its values on a grid."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.shape != (self.grid.m,):
            raise DimensionError(
                f"function has {self.values.size} values on a grid of {self.grid.m} points"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("function values must be finite")


def quad_inner(f: Func1D, g: Func1D) -> float:
    """Trapezoid approximation of the L2 inner product of two grid functions.

    The elementwise product is formed before weighting so the result is
    bitwise symmetric in its arguments; summation order is fixed by numpy's
    deterministic pairwise reduction.
    """
    if not f.grid.matches(g.grid):
        raise DimensionError("quad_inner needs both functions on the same grid")
    return float(np.sum(f.grid.weights * (f.values * g.values)))


def bilinear_functional(f: Func1D, x: np.ndarray, g: Func1D) -> float:
    """Double quadrature of f(s) x(s, t) g(t) over the grid pair."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.grid.m, g.grid.m):
        raise DimensionError(
            f"matrix shape {x.shape} does not match grids ({f.grid.m}, {g.grid.m})"
        )
    wf = f.grid.weights * f.values
    wg = g.grid.weights * g.values
    return float(wf @ x @ wg)


def bilinear_batch(f: Func1D, xs: np.ndarray, g: Func1D) -> np.ndarray:
    """Vectorized :func:`bilinear_functional` over a stack of matrices."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 3 or xs.shape[1:] != (f.grid.m, g.grid.m):
        raise DimensionError(f"batch shape {xs.shape} does not match grids")
    wf = f.grid.weights * f.values
    wg = g.grid.weights * g.values
    return xs.reshape(xs.shape[0], -1) @ np.outer(wf, wg).ravel()


@dataclass(frozen=True)
class QuadForm:
    """Symmetric PSD matrix carrying a squared (semi-)norm on grid values.

    When the form arises as F'F, passing ``factor=F`` makes :meth:`value`
    evaluate ||F f||^2, which preserves exact annihilation on the null space
    (the dense matrix route cannot: its entries are too large to cancel).
    """

    grid: Grid1D
    m_matrix: np.ndarray
    factor: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "m_matrix", _frozen_array(self.m_matrix))
        if self.factor is not None:
            object.__setattr__(self, "factor", _frozen_array(self.factor))
        mat = self.m_matrix
        m = self.grid.m
        if mat.shape != (m, m):
            raise DimensionError(f"matrix shape {mat.shape} does not match grid size {m}")
        if self.factor is not None and self.factor.shape[1] != m:
            raise DimensionError("factor width does not match the grid size")
        asym = float(np.max(np.abs(mat - mat.T)))
        if asym > 1e-10:
            raise ValueError(f"quadratic form matrix is asymmetric (max dev {asym:.2e})")
        eigs = np.linalg.eigvalsh(mat)
        top = max(float(eigs[-1]), 0.0)
        if float(eigs[0]) < -1e-8 * max(top, 1e-300):
            raise ValueError(
                f"quadratic form is indefinite (min eig {eigs[0]:.2e}, max {top:.2e})"
            )

    def value(self, f: Func1D) -> float:
        """Evaluate f' M f."""
        if not f.grid.matches(self.grid):
            raise DimensionError("function and quadratic form live on different grids")
        if self.factor is not None:
            r = self.factor @ f.values
            return float(r @ r)
        return float(f.values @ self.m_matrix @ f.values)


def combine_quadforms(terms: list[tuple[float, QuadForm]]) -> QuadForm:
    """Nonnegative combination of validated forms; PSD holds by construction."""
    if not terms:
        raise ValueError("need at least one (coefficient, form) pair")
    grid = terms[0][1].grid
    mat = np.zeros((grid.m, grid.m))
    for c, form in terms:
        if c < 0:
            raise ValueError("combination coefficients must be nonnegative")
        if not form.grid.matches(grid):
            raise DimensionError("all combined forms must share one grid")
        if c != 0.0:
            mat += c * form.m_matrix
    out = object.__new__(QuadForm)
    object.__setattr__(out, "grid", grid)
    object.__setattr__(out, "m_matrix", _frozen_array(mat))
    return out


@dataclass(frozen=True)
class TwoWayDataset:
    """n samples of p x q matrix covariates with scalar responses."""

    s_grid: Grid1D
    t_grid: Grid1D
    x: np.ndarray
    y: np.ndarray
    centered: bool
    x_mean: np.ndarray
    y_mean: float

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x))
        object.__setattr__(self, "y", _frozen_array(self.y))
        object.__setattr__(self, "x_mean", _frozen_array(self.x_mean))
        n = self.y.size
        p, q = self.s_grid.m, self.t_grid.m
        if self.x.shape != (n, p, q):
            raise DimensionError(
                f"x has shape {self.x.shape}, expected ({n}, {p}, {q})"
            )
        if self.x_mean.shape != (p, q):
            raise DimensionError("x_mean shape does not match the grid pair")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset entries must be finite")

    @property
    def n(self) -> int:
        return self.y.size


def center_dataset(x, y, s_grid: Grid1D, t_grid: Grid1D) -> TwoWayDataset:
    """Subtract the pointwise mean field from x and the mean from y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 2:
        raise ValueError("centering needs at least 2 samples")
    if x.shape != (y.size, s_grid.m, t_grid.m):
        raise DimensionError(
            f"x has shape {x.shape}, expected ({y.size}, {s_grid.m}, {t_grid.m})"
        )
    x_mean = x.mean(axis=0)
    y_mean = float(y.mean())
    return TwoWayDataset(
        s_grid=s_grid,
        t_grid=t_grid,
        x=x - x_mean,
        y=y - y_mean,
        centered=True,
        x_mean=x_mean,
        y_mean=y_mean,
    )
