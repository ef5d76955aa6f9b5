"""Fourier calculus on the flat unit torus T^1 / T^2.

Fields are sampled on a uniform periodic grid over [0, 1)^dim.  Axis ``i`` of
a sample array corresponds to coordinate ``x_i``.  All derivative-type symbols
use Nyquist-zeroed wavenumbers so that the discrete identities
``div(grad f) == laplacian(f)`` and ``d/dx d/dy == d/dy d/dx`` hold exactly.
Nyquist modes are therefore invisible to derivatives; they are treated as
part of the divergence-free component by the Hodge splitting.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft
from scipy import ndimage

from .errors import MeanNotZero, ValidationError

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "HodgeComponents",
    "spectral_derivative",
    "gradient",
    "divergence",
    "laplacian",
    "inverse_laplacian",
    "helmholtz_hodge_decompose",
    "integrate",
    "l2_inner",
    "l2_norm",
    "interpolate",
    "sample",
    "dealias",
]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("INFOTRANS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the unit torus of dimension 1 or 2."""

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(n) for n in np.atleast_1d(self.sizes))
        if len(sizes) not in (1, 2):
            raise ValidationError(f"grid dimension must be 1 or 2, got {len(sizes)}")
        for n in sizes:
            if n < 8 or n % 2:
                raise ValidationError(f"grid sizes must be even and >= 8, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def uniform(cls, n: int, dim: int = 1) -> "Grid":
        return cls((n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.sizes)

    @property
    def volume(self) -> float:
        return 1.0

    @cached_property
    def coords(self) -> np.ndarray:
        """Grid point coordinates, shape ``(dim, *shape)``."""
        axes = [np.arange(n) / n for n in self.sizes]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    # -- Fourier space (rfftn layout: last axis halved) --

    @cached_property
    def _freq_indices(self) -> list[np.ndarray]:
        out = []
        for axis, n in enumerate(self.sizes):
            last = axis == self.dim - 1
            idx = scipy.fft.rfftfreq(n, 1.0 / n) if last else scipy.fft.fftfreq(n, 1.0 / n)
            shape = [1] * self.dim
            shape[axis] = idx.size
            out.append(idx.reshape(shape))
        return out

    @cached_property
    def wavenumbers(self) -> list[np.ndarray]:
        """Angular wavenumbers ``2*pi*n`` per axis, broadcastable."""
        return [2 * np.pi * n for n in self._freq_indices]

    @cached_property
    def deriv_wavenumbers(self) -> list[np.ndarray]:
        """Wavenumbers with the Nyquist entry set to zero (odd derivatives)."""
        out = []
        for k, n, size in zip(self.wavenumbers, self._freq_indices, self.sizes):
            out.append(np.where(np.abs(n) == size // 2, 0.0, k))
        return out

    @cached_property
    def k2(self) -> np.ndarray:
        """Symbol of ``-laplacian`` (sum of squared derivative wavenumbers)."""
        return sum(np.broadcast_to(k, self.spectral_shape) ** 2 for k in self.deriv_wavenumbers)

    @cached_property
    def spectral_shape(self) -> tuple[int, ...]:
        return self.sizes[:-1] + (self.sizes[-1] // 2 + 1,)

    @cached_property
    def mean_mode(self) -> np.ndarray:
        mask = np.zeros(self.spectral_shape, dtype=bool)
        mask[(0,) * self.dim] = True
        return mask

    @cached_property
    def unresolved_modes(self) -> np.ndarray:
        """Non-mean modes that every derivative annihilates (Nyquist corners)."""
        return (self.k2 == 0) & ~self.mean_mode

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keeps ``|n_i| < N_i / 3`` on every axis."""
        keep = np.ones(self.spectral_shape, dtype=bool)
        for n, size in zip(self._freq_indices, self.sizes):
            keep = keep & (3 * np.abs(n) < size)
        return keep

    def fft(self, values: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return scipy.fft.rfftn(values, axes=axes, workers=_workers())

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return scipy.fft.irfftn(coeffs, s=self.sizes, axes=axes, workers=_workers())


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real samples of a function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.shape != self.grid.shape:
            raise ValidationError(f"expected samples of shape {self.grid.shape}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("field contains non-finite samples")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "ScalarField":
        return cls(grid, np.broadcast_to(fn(*grid.coords), grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls.constant(grid, 0.0)

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValidationError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Vector field (or, via the flat identification, a one-form).

    ``values`` has shape ``(dim, *grid.shape)``.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        expected = (self.grid.dim,) + self.grid.shape
        if values.shape != expected:
            raise ValidationError(f"expected components of shape {expected}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("field contains non-finite samples")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_components(cls, components: Sequence[ScalarField]) -> "VectorField":
        grid = components[0].grid
        return cls(grid, np.stack([c.values for c in components]))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., Sequence[np.ndarray]]) -> "VectorField":
        comps = fn(*grid.coords)
        return cls(grid, np.stack([np.broadcast_to(c, grid.shape) for c in comps]))

    @classmethod
    def constant(cls, grid: Grid, c: Sequence[float]) -> "VectorField":
        c = np.asarray(c, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
        return cls(grid, np.broadcast_to(c, (grid.dim,) + grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape))

    @property
    def components(self) -> tuple[ScalarField, ...]:
        return tuple(ScalarField(self.grid, c) for c in self.values)

    def _other(self, other):
        if isinstance(other, VectorField):
            if other.grid != self.grid:
                raise ValidationError("fields live on different grids")
            return other.values
        if isinstance(other, ScalarField):
            return other.values[None]
        return other

    def __add__(self, other):
        return VectorField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return VectorField(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return VectorField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return VectorField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return VectorField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class HodgeComponents:
    """Harmonic, exact divergence-free and gradient parts of a vector field.

    ``potential`` is the mean-zero ``f`` whose gradient is the gradient part.
    """

    harmonic: np.ndarray
    divfree_exact: VectorField
    potential: ScalarField

    @property
    def gradient_part(self) -> VectorField:
        return gradient(self.potential)

    def recompose(self) -> VectorField:
        grid = self.potential.grid
        return VectorField.constant(grid, self.harmonic) + self.divfree_exact + self.gradient_part


def spectral_derivative(field: ScalarField, axis: int) -> ScalarField:
    """Exact derivative of the trigonometric interpolant along ``axis``."""
    grid = field.grid
    if not 0 <= axis < grid.dim:
        raise ValidationError(f"axis {axis} out of range for a {grid.dim}-D grid")
    coeffs = grid.fft(field.values) * (1j * grid.deriv_wavenumbers[axis])
    return ScalarField(grid, grid.ifft(coeffs))


def _derivative_array(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    return grid.ifft(grid.fft(values) * (1j * grid.deriv_wavenumbers[axis]))


def gradient(field: ScalarField) -> VectorField:
    grid = field.grid
    coeffs = grid.fft(field.values)
    comps = [grid.ifft(coeffs * (1j * k)) for k in grid.deriv_wavenumbers]
    return VectorField(grid, np.stack(comps))


def _divergence_coeffs(values: np.ndarray, grid: Grid) -> np.ndarray:
    coeffs = grid.fft(values)
    return sum(1j * k * c for k, c in zip(grid.deriv_wavenumbers, coeffs))


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, v.grid.ifft(_divergence_coeffs(v.values, v.grid)))


def laplacian(field: ScalarField) -> ScalarField:
    grid = field.grid
    return ScalarField(grid, grid.ifft(-grid.k2 * grid.fft(field.values)))


def _inverse_k2(grid: Grid) -> np.ndarray:
    with np.errstate(divide="ignore"):
        inv = np.where(grid.k2 > 0, 1.0 / np.where(grid.k2 > 0, grid.k2, 1.0), 0.0)
    return inv


def inverse_laplacian(field: ScalarField, mean_tol: float = 1e-10) -> ScalarField:
    """Mean-zero solution ``g`` of ``laplacian(g) == field``.

    Raises :class:`MeanNotZero` if ``|mean(field)| > mean_tol * max|field|``.
    """
    grid = field.grid
    mean = float(np.mean(field.values))
    scale = field.max_abs()
    if abs(mean) > mean_tol * scale:
        raise MeanNotZero(f"Poisson right-hand side has mean {mean:.3e} (max |f| = {scale:.3e})")
    coeffs = -grid.fft(field.values) * _inverse_k2(grid)
    return ScalarField(grid, grid.ifft(coeffs))


def helmholtz_hodge_decompose(v: VectorField) -> HodgeComponents:
    """Split ``v`` into constant, exact divergence-free and gradient parts.

    On T^1 every divergence-free field is constant, so the middle part is
    returned as exact zeros; the Nyquist mode, which no derivative sees, is
    then dropped.  On T^2 it stays in the divergence-free remainder.
    """
    grid = v.grid
    harmonic = np.mean(v.values, axis=tuple(range(1, grid.dim + 1)))
    div_hat = _divergence_coeffs(v.values, grid)
    f_hat = -div_hat * _inverse_k2(grid)
    potential = ScalarField(grid, grid.ifft(f_hat))
    grad_f = np.stack([grid.ifft(1j * k * f_hat) for k in grid.deriv_wavenumbers])
    mean_part = harmonic.reshape((grid.dim,) + (1,) * grid.dim)
    if grid.dim == 1:
        divfree = VectorField.zeros(grid)
    else:
        divfree = VectorField(grid, v.values - mean_part - grad_f)
    return HodgeComponents(harmonic=harmonic, divfree_exact=divfree, potential=potential)


def integrate(field: ScalarField) -> float:
    """Integral over the unit-volume torus (sample mean; exact for periodic data)."""
    return float(np.mean(field.values))


def l2_inner(a, b) -> float:
    """L2 pairing of two scalar fields or two vector fields."""
    if isinstance(a, VectorField):
        return float(np.mean(np.sum(a.values * b.values, axis=0)))
    return float(np.mean(a.values * b.values))


def l2_norm(a) -> float:
    return float(np.sqrt(max(l2_inner(a, a), 0.0)))


def dealias(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Apply the 2/3-rule low-pass filter to a sample array (batch axes leading)."""
    return grid.ifft(grid.fft(values) * grid.dealias_mask)


# -- off-grid evaluation --

def _spline_sample(values: np.ndarray, grid: Grid, points: np.ndarray, order: int) -> np.ndarray:
    idx = np.stack([points[i] * n for i, n in enumerate(grid.sizes)])
    return ndimage.map_coordinates(values, idx, order=order, mode="grid-wrap")


def _trig_sample(values: np.ndarray, grid: Grid, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant (exact for band-limited data)."""
    shape = points.shape[1:]
    pts = points.reshape(grid.dim, -1)
    coeffs = scipy.fft.fftn(values) / grid.npoints
    freqs = [scipy.fft.fftfreq(n, 1.0 / n) for n in grid.sizes]
    ex = np.exp(2j * np.pi * np.outer(pts[0], freqs[0]))
    if grid.dim == 1:
        out = ex @ coeffs
    else:
        ey = np.exp(2j * np.pi * np.outer(pts[1], freqs[1]))
        out = np.sum((ex @ coeffs) * ey, axis=1)
    return out.real.reshape(shape)


def sample(values: np.ndarray, grid: Grid, points: np.ndarray, method: str = "cubic") -> np.ndarray:
    """Evaluate sampled data at physical positions.

    ``points`` has shape ``(dim, ...)``; positions wrap periodically.
    ``method`` is ``"cubic"`` (periodic cubic B-spline, reproduces nodes),
    ``"quintic"`` or ``"spectral"`` (trigonometric interpolant).
    """
    points = np.asarray(points, dtype=float)
    if method == "spectral":
        return _trig_sample(values, grid, np.mod(points, 1.0))
    order = {"cubic": 3, "quintic": 5, "linear": 1}.get(method)
    if order is None:
        raise ValidationError(f"unknown interpolation method {method!r}")
    return _spline_sample(values, grid, np.mod(points, 1.0), order)


def interpolate(field: ScalarField, points, method: str = "cubic") -> np.ndarray:
    """Evaluate ``field`` at a list of positions (shape ``(M, dim)`` or ``(M,)`` in 1-D)."""
    grid = field.grid
    pts = np.asarray(points, dtype=float)
    if grid.dim == 1:
        pts = pts.reshape(1, -1)
    else:
        pts = np.atleast_2d(pts).reshape(-1, grid.dim).T
    return sample(field.values, grid, pts, method)
