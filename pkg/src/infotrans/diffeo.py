"""Diffeomorphisms of the torus in displacement form, x -> x + d(x) mod 1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NewtonDiverged, NotDiffeo, ValidationError
from .spectral import Grid, ScalarField, VectorField, _derivative_array, sample

__all__ = ["DiffeoMap", "jacobian", "jacobian_matrix", "compose", "invert", "map_distance", "pullback"]


@dataclass(frozen=True, eq=False)
class DiffeoMap:
    """Orientation-preserving map of T^n homotopic to the identity.

    The displacement is stored with its integer part removed, so translations
    by ``a`` and ``a + 1`` have the same representation.
    """

    displacement: VectorField

    def __post_init__(self) -> None:
        d = self.displacement.values
        mean = d.reshape(d.shape[0], -1).mean(axis=1)
        shift = np.round(mean)
        if np.any(shift):
            shift = shift.reshape((-1,) + (1,) * (d.ndim - 1))
            object.__setattr__(self, "displacement", VectorField(self.grid, d - shift))

    @property
    def grid(self) -> Grid:
        return self.displacement.grid

    @classmethod
    def identity(cls, grid: Grid) -> "DiffeoMap":
        return cls(VectorField.zeros(grid))

    @classmethod
    def translation(cls, grid: Grid, a) -> "DiffeoMap":
        a = np.broadcast_to(np.asarray(a, dtype=float), (grid.dim,))
        return cls(VectorField.constant(grid, a))

    @classmethod
    def from_displacement(cls, grid: Grid, fn) -> "DiffeoMap":
        return cls(VectorField.from_function(grid, fn))

    def positions(self) -> np.ndarray:
        """Unwrapped image points ``x + d(x)``, shape ``(dim, *shape)``."""
        return self.grid.coords + self.displacement.values

    def __call__(self, points, method: str = "cubic") -> np.ndarray:
        """Evaluate the map at physical points of shape ``(dim, ...)`` (unwrapped)."""
        points = np.asarray(points, dtype=float)
        disp = np.stack([sample(c, self.grid, points, method) for c in self.displacement.values])
        return points + disp


def jacobian_matrix(phi: DiffeoMap) -> np.ndarray:
    """``I + D(displacement)`` at every grid point, shape ``(dim, dim, *shape)``."""
    grid = phi.grid
    d = phi.displacement.values
    mat = np.empty((grid.dim, grid.dim) + grid.shape)
    for i in range(grid.dim):
        for j in range(grid.dim):
            mat[i, j] = _derivative_array(d[i], grid, j) + (i == j)
    return mat


def _det(mat: np.ndarray) -> np.ndarray:
    if mat.shape[0] == 1:
        return mat[0, 0]
    return mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]


def jacobian(phi: DiffeoMap) -> ScalarField:
    """Density factor ``Jac`` defined by ``phi^* vol = Jac * vol``."""
    return ScalarField(phi.grid, _det(jacobian_matrix(phi)))


def require_diffeo(phi: DiffeoMap, floor: float = 0.0) -> ScalarField:
    jac = jacobian(phi)
    low = float(jac.values.min())
    if low <= floor:
        raise NotDiffeo(f"Jacobian reaches {low:.3e}; map is not an orientation-preserving diffeomorphism")
    return jac


def compose(f: DiffeoMap, g: DiffeoMap, method: str = "cubic") -> DiffeoMap:
    """``f o g``: ``x -> f(g(x))``, interpolating f's displacement at ``g(x)``."""
    if f.grid != g.grid:
        raise ValidationError("maps live on different grids")
    grid = g.grid
    pts = g.positions()
    disp = g.displacement.values + np.stack([sample(c, grid, pts, method) for c in f.displacement.values])
    return DiffeoMap(VectorField(grid, disp))


def _solve_small(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Pointwise solve of ``mat @ x = rhs`` with ``mat`` shaped ``(dim, dim, M)``."""
    if mat.shape[0] == 1:
        return rhs / mat[0, 0]
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    x0 = (mat[1, 1] * rhs[0] - mat[0, 1] * rhs[1]) / det
    x1 = (mat[0, 0] * rhs[1] - mat[1, 0] * rhs[0]) / det
    return np.stack([x0, x1])


def invert(
    phi: DiffeoMap,
    guess: DiffeoMap | None = None,
    tol: float = 1e-10,
    maxiter: int = 50,
    method: str = "cubic",
) -> DiffeoMap:
    """Inverse map by damped pointwise Newton iteration on ``phi(y) = x``.

    The residual is measured with the same interpolant used by :func:`compose`,
    so ``compose(phi, invert(phi))`` reproduces the identity to ``tol``.
    """
    grid = phi.grid
    dim = grid.dim
    x = grid.coords.reshape(dim, -1)
    d = phi.displacement.values
    dd = jacobian_matrix(phi)
    if guess is None:
        y = x - d.reshape(dim, -1)
    else:
        y = x + guess.displacement.values.reshape(dim, -1)

    def residual(pts):
        disp = np.stack([sample(c, grid, pts, method) for c in d])
        return pts + disp - x

    r = residual(y)
    rnorm = np.max(np.abs(r), axis=0)
    for _ in range(maxiter):
        if rnorm.max() < tol:
            break
        mat = np.stack([np.stack([sample(dd[i, j], grid, y, method) for j in range(dim)]) for i in range(dim)])
        step = _solve_small(mat, r)
        lam = np.ones(y.shape[1])
        active = rnorm >= tol
        for _ in range(30):
            trial = y - lam * step
            r_trial = residual(trial)
            n_trial = np.max(np.abs(r_trial), axis=0)
            bad = active & ~(n_trial < rnorm)
            if not bad.any():
                break
            lam = np.where(bad, 0.5 * lam, lam)
        y = np.where(active, trial, y)
        r = np.where(active, r_trial, r)
        rnorm = np.max(np.abs(r), axis=0)
    if not np.all(np.isfinite(rnorm)) or rnorm.max() >= tol:
        raise NewtonDiverged(f"inversion residual {np.nanmax(rnorm):.3e} after {maxiter} iterations")
    return DiffeoMap(VectorField(grid, (y - x).reshape((dim,) + grid.shape)))


def map_distance(f: DiffeoMap, g: DiffeoMap) -> float:
    """Max-norm distance between two maps, measured on the torus."""
    diff = f.displacement.values - g.displacement.values
    diff = diff - np.round(diff)
    return float(np.max(np.abs(diff)))


def pullback(field: ScalarField, phi: DiffeoMap, method: str = "cubic") -> ScalarField:
    """``(field o phi) * Jac(phi)``: pullback of a top-degree form given by its ratio to vol."""
    jac = require_diffeo(phi)
    composed = sample(field.values, phi.grid, phi.positions(), method)
    return ScalarField(phi.grid, composed * jac.values)
