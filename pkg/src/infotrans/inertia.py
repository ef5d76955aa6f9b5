"""The alpha-beta-gamma inertia operator on vector fields of the flat torus.

In the Helmholtz-Hodge splitting ``u = h + xi + grad f`` the operator is
diagonal::

    A(h, xi, grad f) = (h, ((1 - gamma) - alpha*Lap) xi, grad(-beta*Lap f))

so in Fourier space it acts on each mode by a 2-weight symbol: one weight on
the longitudinal (gradient) direction ``k k^T / |k|^2`` and one on the
transverse complement.  One-forms share the vector-field representation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .spectral import Grid, VectorField, divergence, l2_inner

__all__ = ["InertiaParams", "apply_A", "apply_A_inverse", "energy", "split_energy", "energy_inner"]


@dataclass(frozen=True)
class InertiaParams:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta > 0:
            raise ValidationError(f"beta must be > 0 (A is not invertible for beta = 0), got {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma must lie in [0, 1], got {self.gamma}")


@lru_cache(maxsize=64)
def _symbols(grid: Grid, params: InertiaParams) -> tuple[np.ndarray, np.ndarray]:
    """Fourier weights (gradient, transverse) of A.

    The mean mode carries weight 1 (harmonic fields); Nyquist-corner modes,
    which no derivative can see, are left untouched.
    """
    k2 = grid.k2
    grad_w = params.beta * k2
    trans_w = (1.0 - params.gamma) + params.alpha * k2
    flat = (k2 == 0)
    grad_w = np.where(flat, 1.0, grad_w)
    trans_w = np.where(flat, 1.0, trans_w)
    return grad_w, trans_w


def _apply_symbol(values: np.ndarray, grid: Grid, grad_w: np.ndarray, trans_w: np.ndarray) -> np.ndarray:
    coeffs = grid.fft(values)
    k = [np.broadcast_to(kk, grid.spectral_shape) for kk in grid.deriv_wavenumbers]
    k2 = grid.k2
    safe = np.where(k2 > 0, k2, 1.0)
    kdotv = sum(ki * ci for ki, ci in zip(k, coeffs))
    out = []
    for ki, ci in zip(k, coeffs):
        longitudinal = np.where(k2 > 0, ki * kdotv / safe, 0.0)
        out.append(grad_w * longitudinal + trans_w * (ci - longitudinal))
    return grid.ifft(np.stack(out))


def apply_A(u: VectorField, params: InertiaParams) -> VectorField:
    """Momentum one-form ``m = A u``."""
    grad_w, trans_w = _symbols(u.grid, params)
    return VectorField(u.grid, _apply_symbol(u.values, u.grid, grad_w, trans_w))


def apply_A_inverse(m: VectorField, params: InertiaParams) -> VectorField:
    grad_w, trans_w = _symbols(m.grid, params)
    return VectorField(m.grid, _apply_symbol(m.values, m.grid, 1.0 / grad_w, 1.0 / trans_w))


def energy_inner(u: VectorField, v: VectorField, params: InertiaParams) -> float:
    """``<A u, v>_{L2}``."""
    return l2_inner(apply_A(u, params), v)


def energy(u: VectorField, params: InertiaParams) -> float:
    return energy_inner(u, u, params)


def split_energy(u: VectorField, params: InertiaParams) -> tuple[float, float]:
    """Split the energy into the vertical-killing part and the Fisher part.

    Returns ``(h_part, fisher_part)`` with ``fisher_part = beta * ||div u||^2``
    and ``h_part`` the harmonic plus divergence-free contribution.
    """
    div = divergence(u)
    fisher_part = params.beta * l2_inner(div, div)
    _, trans_w = _symbols(u.grid, params)
    hu = _apply_symbol(u.values, u.grid, np.zeros_like(trans_w), trans_w)
    h_part = float(np.mean(np.sum(hu * u.values, axis=0)))
    return h_part, fisher_part
