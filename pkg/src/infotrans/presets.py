"""Named analytic inputs so that runs need no external data, plus seeded random fields."""
from __future__ import annotations

import numpy as np

from .diffeo import DiffeoMap, jacobian
from .errors import ValidationError
from .fisher import Density
from .spectral import Grid, ScalarField, VectorField

__all__ = [
    "VELOCITIES",
    "DENSITIES",
    "MAPS",
    "velocity_preset",
    "density_preset",
    "map_preset",
    "random_scalar",
    "random_vector",
    "random_density",
    "random_map",
]

TWO_PI = 2 * np.pi


def _s(x):
    return np.sin(TWO_PI * x)


def _c(x):
    return np.cos(TWO_PI * x)


def _grad_sin(grid: Grid) -> VectorField:
    # 0.1 grad(sin 2 pi x) on T^1, 0.1 grad(sin 2 pi x cos 2 pi y) on T^2
    if grid.dim == 1:
        return VectorField.from_function(grid, lambda x: [0.1 * TWO_PI * _c(x)])
    return VectorField.from_function(grid, lambda x, y: [0.1 * TWO_PI * _c(x) * _c(y), -0.1 * TWO_PI * _s(x) * _s(y)])


def _sin(grid: Grid) -> VectorField:
    if grid.dim == 1:
        return VectorField.from_function(grid, lambda x: [0.1 * _s(x)])
    return VectorField.from_function(grid, lambda x, y: [0.1 * _s(x), 0.1 * _s(y)])


def _shear(grid: Grid) -> VectorField:
    if grid.dim != 2:
        raise ValidationError("the shear preset needs a 2-D grid")
    return VectorField.from_function(grid, lambda x, y: [0.1 * _s(y), 0.0 * x])


def _translation(grid: Grid) -> VectorField:
    return VectorField.constant(grid, [0.1] * grid.dim)


def _zero(grid: Grid) -> VectorField:
    return VectorField.zeros(grid)


VELOCITIES = {
    "grad-sin": _grad_sin,
    "sin": _sin,
    "shear": _shear,
    "translation": _translation,
    "zero": _zero,
}


def _bump(grid: Grid) -> ScalarField:
    if grid.dim == 1:
        return ScalarField.from_function(grid, lambda x: 1 + 0.5 * _s(x))
    return ScalarField.from_function(grid, lambda x, y: (1 + 0.5 * _s(x)) * (1 + 0.3 * _c(y)))


def _uniform(grid: Grid) -> ScalarField:
    return ScalarField.constant(grid, 1.0)


DENSITIES = {"bump": _bump, "uniform": _uniform}


def _wobble(grid: Grid) -> DiffeoMap:
    if grid.dim == 1:
        return DiffeoMap.from_displacement(grid, lambda x: [0.1 * _s(x)])
    return DiffeoMap.from_displacement(
        grid,
        lambda x, y: [0.06 * _s(x) * _c(y) + 0.03 * _s(y), 0.05 * _c(x) + 0.04 * _s(x + y)],
    )


def _shear_map(grid: Grid) -> DiffeoMap:
    if grid.dim != 2:
        raise ValidationError("the shear map needs a 2-D grid")
    return DiffeoMap.from_displacement(grid, lambda x, y: [0.1 * _s(y), 0.0 * x])


def _identity(grid: Grid) -> DiffeoMap:
    return DiffeoMap.identity(grid)


MAPS = {"wobble": _wobble, "shear": _shear_map, "identity": _identity}


def _lookup(table: dict, name: str, what: str):
    try:
        return table[name]
    except KeyError:
        raise ValidationError(f"unknown {what} preset {name!r}; choose from {sorted(table)}") from None


def velocity_preset(name: str, grid: Grid) -> VectorField:
    return _lookup(VELOCITIES, name, "velocity")(grid)


def density_preset(name: str, grid: Grid) -> Density:
    ratio = _lookup(DENSITIES, name, "density")(grid)
    return Density(ScalarField(grid, ratio.values / ratio.values.mean()))


def map_preset(name: str, grid: Grid) -> DiffeoMap:
    return _lookup(MAPS, name, "map")(grid)


def _random_modes(grid: Grid, rng: np.random.Generator, modes: int) -> np.ndarray:
    coeffs = np.zeros(grid.spectral_shape, dtype=complex)
    idx = [np.r_[0:modes + 1, -modes:0] if ax < grid.dim - 1 else np.arange(modes + 1) for ax in range(grid.dim)]
    sub = np.ix_(*idx)
    shape = coeffs[sub].shape
    coeffs[sub] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coeffs[(0,) * grid.dim] = 0.0
    return grid.ifft(coeffs)


def random_scalar(grid: Grid, rng: np.random.Generator, modes: int = 4, amplitude: float = 1.0) -> ScalarField:
    """Mean-zero trigonometric polynomial of degree ``modes`` with max-norm ``amplitude``."""
    v = _random_modes(grid, rng, modes)
    return ScalarField(grid, amplitude * v / np.max(np.abs(v)))


def random_vector(grid: Grid, rng: np.random.Generator, modes: int = 4, amplitude: float = 1.0) -> VectorField:
    comps = [random_scalar(grid, rng, modes, amplitude).values for _ in range(grid.dim)]
    mean = rng.uniform(-amplitude, amplitude, grid.dim)
    return VectorField(grid, np.stack(comps) + mean.reshape((-1,) + (1,) * grid.dim))


def random_density(grid: Grid, rng: np.random.Generator, modes: int = 3, contrast: float = 0.5) -> Density:
    """Density whose ratio ranges over ``[1 - contrast, 1 + contrast]`` before normalisation."""
    v = 1.0 + random_scalar(grid, rng, modes, contrast).values
    return Density(ScalarField(grid, v / v.mean()))


def random_map(grid: Grid, rng: np.random.Generator, modes: int = 2, amplitude: float = 0.1) -> DiffeoMap:
    """Smooth diffeomorphism ``x + d(x)`` whose Jacobian stays above one half.

    The displacement has max-norm ``amplitude`` unless it must be shrunk to
    keep the Jacobian bound.
    """
    d = np.stack([random_scalar(grid, rng, modes, amplitude).values for _ in range(grid.dim)])
    while True:
        phi = DiffeoMap(VectorField(grid, d))
        if float(jacobian(phi).values.min()) > 0.5:
            return phi
        d = 0.8 * d
