"""Geodesic flow of the alpha-beta-gamma metric in momentum form.

The state is the momentum one-form ``m = A u``; it obeys

    dm/dt = -(L_u m + m div u),   u = A^{-1} m,

which on the flat torus reads, per component,
``-(u_j d_j m_i + m_j d_i u_j + m_i div u)``.  Quadratic products are
dealiased with the 2/3 rule, which makes the semi-discrete system conserve
energy exactly; RK4 is then the only source of drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffeo import DiffeoMap
from .errors import BlowUp, ValidationError, WrongDimension
from .inertia import InertiaParams, _apply_symbol, _symbols, apply_A, energy
from .spectral import Grid, VectorField, _derivative_array, dealias, helmholtz_hodge_decompose, l2_norm, sample

__all__ = [
    "Trajectory",
    "momentum_rhs",
    "evolve",
    "muhs_residual",
    "flow_map",
    "component_diagnostics",
    "DEFAULT_BLOWUP",
]

DEFAULT_BLOWUP = 1e6


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stored snapshots of a geodesic; ``dt`` is the snapshot spacing."""

    times: np.ndarray
    velocities: tuple[VectorField, ...]
    momenta: tuple[VectorField, ...]
    params: InertiaParams
    dt: float

    @property
    def grid(self) -> Grid:
        return self.velocities[0].grid

    def __len__(self) -> int:
        return len(self.times)

    def energies(self) -> np.ndarray:
        return np.array([energy(u, self.params) for u in self.velocities])


def _rhs(m: np.ndarray, grid: Grid, params: InertiaParams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(dm/dt, u)`` for a dealiased momentum array."""
    grad_w, trans_w = _symbols(grid, params)
    u = _apply_symbol(m, grid, 1.0 / grad_w, 1.0 / trans_w)
    dim = grid.dim
    du = [[_derivative_array(u[j], grid, i) for j in range(dim)] for i in range(dim)]  # du[i][j] = d_i u_j
    dm = [[_derivative_array(m[i], grid, j) for j in range(dim)] for i in range(dim)]  # dm[i][j] = d_j m_i
    div = sum(du[i][i] for i in range(dim))
    out = np.empty_like(m)
    for i in range(dim):
        out[i] = -(
            sum(u[j] * dm[i][j] for j in range(dim))
            + sum(m[j] * du[i][j] for j in range(dim))
            + m[i] * div
        )
    return dealias(out, grid), u


def momentum_rhs(m: VectorField, params: InertiaParams) -> VectorField:
    """``-(L_u m + m div u)`` with ``u = A^{-1} m`` (inputs and products dealiased)."""
    grid = m.grid
    rhs, _ = _rhs(dealias(m.values, grid), grid, params)
    return VectorField(grid, rhs)


def _check_finite(arr: np.ndarray, threshold: float, what: str, t: float) -> None:
    peak = float(np.max(np.abs(arr)))
    if not math.isfinite(peak) or peak > threshold:
        raise BlowUp(f"{what} reached {peak:.3e} at t = {t:.6g} (threshold {threshold:.1e})")


def evolve(
    u0: VectorField,
    params: InertiaParams,
    T: float,
    dt: float,
    save_every: int = 1,
    blowup: float = DEFAULT_BLOWUP,
    check_cfl: bool = True,
) -> Trajectory:
    """Integrate the geodesic equation from ``u0`` with fixed-step RK4.

    The number of steps is ``round(T / dt)``; ``dt`` is adjusted so the last
    step lands on ``T``.  Every ``save_every``-th state is stored.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if T < 0:
        raise ValidationError(f"T must be non-negative, got {T}")
    if save_every < 1:
        raise ValidationError("save_every must be >= 1")
    grid = u0.grid
    nsteps = int(round(T / dt))
    if nsteps:
        dt = T / nsteps
    umax = u0.max_abs()
    if check_cfl and umax > 0 and dt > 0.5 * min(grid.spacing) / umax:
        raise ValidationError(
            f"dt = {dt:.3e} exceeds the CFL heuristic 0.5*h/max|u| = {0.5 * min(grid.spacing) / umax:.3e}"
        )

    m = dealias(apply_A(u0, params).values, grid)
    _, u = _rhs(m, grid, params)
    times = [0.0]
    us = [VectorField(grid, u)]
    ms = [VectorField(grid, m)]
    for n in range(nsteps):
        t = n * dt
        k1, _ = _rhs(m, grid, params)
        k2, _ = _rhs(m + 0.5 * dt * k1, grid, params)
        k3, _ = _rhs(m + 0.5 * dt * k2, grid, params)
        k4, _ = _rhs(m + dt * k3, grid, params)
        m = m + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_finite(m, blowup, "momentum", t + dt)
        if (n + 1) % save_every == 0 or n + 1 == nsteps:
            _, u = _rhs(m, grid, params)
            _check_finite(u, blowup, "velocity", t + dt)
            times.append((n + 1) * dt)
            us.append(VectorField(grid, u))
            ms.append(VectorField(grid, m))
    spacing = dt * save_every if nsteps >= save_every else dt
    return Trajectory(np.array(times), tuple(us), tuple(ms), params, spacing)


def muhs_residual(traj: Trajectory) -> float:
    """Max-norm residual of ``u_txx + 2 u_x u_xx + u u_xxx - 2 mu(u) u_x / beta``.

    ``u_txx`` is taken by central differences between stored snapshots, so the
    residual is only meaningful when snapshots are uniformly spaced.
    """
    grid = traj.grid
    if grid.dim != 1:
        raise WrongDimension("the muHS reduction is only defined on T^1")
    if len(traj) < 3:
        return 0.0
    ders = []
    for u in traj.velocities:
        v = u.values[0]
        ux = _derivative_array(v, grid, 0)
        uxx = _derivative_array(ux, grid, 0)
        uxxx = _derivative_array(uxx, grid, 0)
        ders.append((v, ux, uxx, uxxx))
    worst = 0.0
    beta = traj.params.beta
    for i in range(1, len(traj) - 1):
        h = traj.times[i + 1] - traj.times[i - 1]
        uxx_t = (ders[i + 1][2] - ders[i - 1][2]) / h
        v, ux, uxx, uxxx = ders[i]
        res = uxx_t + 2 * ux * uxx + v * uxxx - 2 * np.mean(v) * ux / beta
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def _midpoint(values: list[np.ndarray], i: int) -> np.ndarray:
    """Velocity half way between snapshots ``i`` and ``i+1`` by cubic Lagrange interpolation."""
    n = len(values)
    if n < 4:
        return 0.5 * (values[i] + values[i + 1])
    if i == 0:
        return (5 * values[0] + 15 * values[1] - 5 * values[2] + values[3]) / 16
    if i == n - 2:
        return (5 * values[n - 1] + 15 * values[n - 2] - 5 * values[n - 3] + values[n - 4]) / 16
    return (-values[i - 1] + 9 * values[i] + 9 * values[i + 1] - values[i + 2]) / 16


def flow_map(traj: Trajectory, method: str = "cubic", blowup: float = DEFAULT_BLOWUP) -> DiffeoMap:
    """Integrate ``d zeta/dt = u(t, zeta)`` from the identity through the stored snapshots."""
    if len(traj) == 0:
        raise ValidationError("empty trajectory")
    grid = traj.grid
    vel = [u.values for u in traj.velocities]
    x = grid.coords.copy()

    def field_at(vals, pts):
        return np.stack([sample(c, grid, pts, method) for c in vals])

    for i in range(len(traj) - 1):
        h = traj.times[i + 1] - traj.times[i]
        mid = _midpoint(vel, i)
        k1 = field_at(vel[i], x)
        k2 = field_at(mid, x + 0.5 * h * k1)
        k3 = field_at(mid, x + 0.5 * h * k2)
        k4 = field_at(vel[i + 1], x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_finite(x - grid.coords, blowup, "flow displacement", traj.times[i + 1])
    return DiffeoMap(VectorField(grid, x - grid.coords))


def component_diagnostics(traj: Trajectory) -> np.ndarray:
    """L2 norms ``(harmonic, divergence-free exact, gradient)`` per stored time."""
    rows = []
    for u in traj.velocities:
        hc = helmholtz_hodge_decompose(u)
        rows.append((float(np.linalg.norm(hc.harmonic)), l2_norm(hc.divfree_exact), l2_norm(hc.gradient_part)))
    return np.array(rows)
