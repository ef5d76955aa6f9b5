"""Probability densities on the torus with the Fisher-Rao metric.

A density is stored by its ratio ``rho = d nu / d vol``.  The square-root map
``rho -> sqrt(rho)`` sends densities into the unit L2 sphere, where Fisher
geodesics are great circles and the distance is the spherical angle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import report
from .diffeo import DiffeoMap, require_diffeo
from .errors import DegenerateAngle, NotDensity, NotTangent, ValidationError
from .spectral import Grid, ScalarField, integrate, sample

__all__ = [
    "Density",
    "POSITIVITY_FLOOR",
    "MASS_TOL",
    "fisher_inner",
    "sqrt_lift",
    "unlift",
    "sphere_angle",
    "slerp_coefficients",
    "geodesic",
    "fisher_distance",
    "pullback_density",
]

POSITIVITY_FLOOR = 1e-12
MASS_TOL = 1e-10
TANGENT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Density:
    """Probability density ``ratio * vol``: strictly positive, unit mass."""

    ratio: ScalarField

    def __post_init__(self) -> None:
        low = float(self.ratio.values.min())
        if not low > POSITIVITY_FLOOR:
            raise NotDensity(f"density ratio must exceed {POSITIVITY_FLOOR:g}, minimum is {low:.3e}")
        mass = integrate(self.ratio)
        if abs(mass - 1.0) > MASS_TOL:
            raise NotDensity(f"density mass is {mass!r}, expected 1 within {MASS_TOL:g}")

    @property
    def grid(self) -> Grid:
        return self.ratio.grid

    @classmethod
    def uniform(cls, grid: Grid) -> "Density":
        return cls(ScalarField.constant(grid, 1.0))

    @classmethod
    def normalised(cls, field: ScalarField, floor: float = 0.0) -> "Density":
        """Add ``floor``, rescale to unit mass and report the correction."""
        shifted = field.values + floor
        mass = float(np.mean(shifted))
        if not mass > 0:
            raise NotDensity(f"field has non-positive mass {mass:.3e}")
        report("normalise", floor=floor, mass=mass, factor=1.0 / mass)
        return cls(ScalarField(field.grid, shifted / mass))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Density":
        return cls(ScalarField.from_function(grid, fn))


def _check_tangent(a: ScalarField, name: str) -> None:
    mean = integrate(a)
    if abs(mean) > TANGENT_TOL:
        raise NotTangent(f"{name} must integrate to zero, got {mean:.3e}")


def fisher_inner(a: ScalarField, b: ScalarField, nu: Density) -> float:
    """``<a, b>_nu = int (a/nu)(b/nu) nu`` for tangent densities ``a, b`` (as ratios)."""
    _check_tangent(a, "a")
    _check_tangent(b, "b")
    if a.grid != nu.grid or b.grid != nu.grid:
        raise ValidationError("fields live on different grids")
    return float(np.mean(a.values * b.values / nu.ratio.values))


def sqrt_lift(nu: Density) -> ScalarField:
    """Point ``sqrt(rho)`` on the unit sphere of L2."""
    return ScalarField(nu.grid, np.sqrt(nu.ratio.values))


def unlift(f: ScalarField) -> Density:
    return Density(ScalarField(f.grid, f.values**2))


def sphere_angle(f: np.ndarray, g: np.ndarray) -> float:
    """Angle between two positive unit vectors of L2 (grid means as integrals).

    Evaluated as ``atan2(|g - c f|, c)`` with ``c = <f, g>``: this is accurate
    for tiny angles where ``arccos`` loses half the digits, and returns exactly
    zero for identical inputs.
    """
    c = float(np.mean(f * g))
    s = math.sqrt(float(np.mean((g - c * f) ** 2)))
    theta = math.atan2(s, c)
    if not (math.isfinite(theta) and 0.0 <= theta < 0.5 * math.pi):
        raise DegenerateAngle(f"angle {theta!r} outside [0, pi/2); inputs are not positive densities")
    return theta


def slerp_coefficients(theta: float, t: float) -> tuple[float, float, float, float]:
    """Great-circle weights ``(a, b, da/dt, db/dt)`` with ``sigma = a f + b g``.

    ``a = sin((1-t) theta) / sin(theta)`` is written through ``sinc`` so the
    small-angle limit ``a -> 1 - t``, ``b -> t`` needs no separate branch.
    """
    s = np.sinc(theta / math.pi)
    a = (1.0 - t) * np.sinc((1.0 - t) * theta / math.pi) / s
    b = t * np.sinc(t * theta / math.pi) / s
    da = -math.cos((1.0 - t) * theta) / s
    db = math.cos(t * theta) / s
    return float(a), float(b), float(da), float(db)


def fisher_distance(nu0: Density, nu1: Density) -> float:
    """Fisher-Rao distance ``arccos int sqrt(rho0 rho1)``, always below pi/2."""
    if nu0.grid != nu1.grid:
        raise ValidationError("densities live on different grids")
    return sphere_angle(np.sqrt(nu0.ratio.values), np.sqrt(nu1.ratio.values))


def geodesic(nu0: Density, nu1: Density, t: float) -> Density:
    """Point at parameter ``t`` on the minimal Fisher geodesic from ``nu0`` to ``nu1``."""
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return nu0
    if t == 1.0:
        return nu1
    f = np.sqrt(nu0.ratio.values)
    g = np.sqrt(nu1.ratio.values)
    theta = fisher_distance(nu0, nu1)
    a, b, _, _ = slerp_coefficients(theta, t)
    sigma = a * f + b * g
    ratio = sigma**2
    # the great circle has unit norm analytically; remove the last ulps
    return Density(ScalarField(nu0.grid, ratio / np.mean(ratio)))


def pullback_density(nu: Density, phi: DiffeoMap, method: str = "cubic") -> Density:
    """``phi^* nu = (rho o phi) Jac(phi)``, renormalised to unit mass.

    Interpolation breaks exact mass conservation; the correction factor is
    reported to the diagnostics stream.
    """
    if nu.grid != phi.grid:
        raise ValidationError("density and map live on different grids")
    jac = require_diffeo(phi)
    composed = sample(nu.ratio.values, nu.grid, phi.positions(), method)
    pulled = composed * jac.values
    mass = float(np.mean(pulled))
    report("pullback_mass", mass=mass, correction=1.0 - mass)
    return Density(ScalarField(nu.grid, pulled / mass))
