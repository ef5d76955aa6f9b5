"""Small seeded versions of every module's invariants.

Each check reports a ``check`` record to the diagnostics stream.  Nothing
time-dependent is recorded, so two runs with the same seed produce identical
streams.
"""
from __future__ import annotations

import math

import numpy as np

from .diagnostics import report
from .diffeo import DiffeoMap, compose, invert, map_distance
from .euler_arnold import component_diagnostics, evolve
from .fisher import Density, fisher_distance, geodesic, sqrt_lift
from .inertia import InertiaParams, apply_A, apply_A_inverse, energy_inner
from .matrix import geodesic_shoot_qr, qr_polar_factorise, run_checks
from .presets import density_preset, map_preset, random_density, random_map, random_vector, velocity_preset
from .spectral import Grid, helmholtz_hodge_decompose, l2_inner, l2_norm
from .transport import factorise, horizontality_check, lift_geodesic

__all__ = ["run_selftest", "FISHER_ORACLE"]

# arccos of the integral of sqrt(1 + 0.5 sin 2 pi x) over [0, 1], 30-digit quadrature
FISHER_ORACLE = 0.18277746193028786


def _check(module: str, name: str, value: float, tol: float) -> bool:
    passed = bool(value <= tol)
    report("check", module=module, name=name, value=float(value), tol=tol, passed=passed)
    return passed


def _spectral(rng: np.random.Generator) -> list[bool]:
    out = []
    params = InertiaParams(alpha=float(rng.uniform(0.5, 2)), beta=float(rng.uniform(0.5, 2)), gamma=float(rng.uniform(0, 1)))
    for grid in (Grid.uniform(64, 1), Grid.uniform(32, 2)):
        worst_inv = worst_hodge = worst_sym = 0.0
        for _ in range(5):
            u, v = random_vector(grid, rng), random_vector(grid, rng)
            back = apply_A_inverse(apply_A(u, params), params)
            worst_inv = max(worst_inv, (back - u).max_abs() / u.max_abs())
            hc = helmholtz_hodge_decompose(u)
            cross = abs(l2_inner(hc.divfree_exact, hc.gradient_part)) / l2_norm(u) ** 2
            worst_hodge = max(worst_hodge, cross)
            a, b = energy_inner(u, v, params), energy_inner(v, u, params)
            worst_sym = max(worst_sym, abs(a - b) / math.sqrt(energy_inner(u, u, params) * energy_inner(v, v, params)))
        tag = f"T{grid.dim}"
        out.append(_check("inertia", f"A_inverse_{tag}", worst_inv, 1e-9))
        out.append(_check("spectral", f"hodge_orthogonality_{tag}", worst_hodge, 1e-9))
        out.append(_check("inertia", f"energy_symmetry_{tag}", worst_sym, 1e-9))
    return out


def _euler_arnold() -> list[bool]:
    grid = Grid.uniform(64, 1)
    traj = evolve(velocity_preset("sin", grid), InertiaParams(), 0.2, 2e-3, save_every=10)
    e = traj.energies()
    means = [float(np.mean(u.values)) for u in traj.velocities]
    out = [
        _check("euler_arnold", "energy_drift_T1", abs(e[-1] - e[0]) / e[0], 1e-8),
        _check("euler_arnold", "mean_drift_T1", max(means) - min(means), 1e-10),
    ]
    grid2 = Grid.uniform(16, 2)
    u0 = velocity_preset("grad-sin", grid2)
    comps = component_diagnostics(evolve(u0, InertiaParams(gamma=0.5), 0.2, 5e-3, save_every=10))
    out.append(_check("euler_arnold", "invariant_subspace_T2", float(comps[:, 1].max() / comps[0, 2]), 1e-6))
    return out


def _fisher(rng: np.random.Generator) -> list[bool]:
    grid = Grid.uniform(128, 1)
    vol = Density.uniform(grid)
    bump = density_preset("bump", grid)
    out = [_check("fisher", "distance_oracle", abs(fisher_distance(vol, bump) - FISHER_ORACLE), 1e-8)]
    worst_tri = 0.0
    worst_mass = 0.0
    for _ in range(10):
        a, b, c = (random_density(grid, rng) for _ in range(3))
        excess = fisher_distance(a, c) - fisher_distance(a, b) - fisher_distance(b, c)
        worst_tri = max(worst_tri, excess)
        worst_mass = max(worst_mass, abs(float(np.mean(geodesic(a, b, 0.5).ratio.values)) - 1.0))
    out.append(_check("fisher", "triangle_inequality", worst_tri, 1e-9))
    out.append(_check("fisher", "geodesic_mass", worst_mass, 1e-10))
    return out


def _transport(rng: np.random.Generator) -> list[bool]:
    grid = Grid.uniform(64, 1)
    bump = density_preset("bump", grid)
    lift = lift_geodesic(sqrt_lift(bump), steps=50)
    out = [
        _check("transport", "lift_jacobian_T1", float(lift.jacobian_errors().max()), 1e-3),
        _check("transport", "horizontality_T1", horizontality_check(lift), 1e-6),
    ]
    phi = random_map(grid, rng)
    out.append(_check("transport", "invert_roundtrip", map_distance(compose(phi, invert(phi)), DiffeoMap.identity(grid)), 1e-6))
    grid2 = Grid.uniform(16, 2)
    fac = factorise(map_preset("shear", grid2), steps=20)
    out.append(_check("transport", "volume_preserving_snap", fac.psi.displacement.max_abs() + fac.theta, 0.0))
    return out


def _matrix(seed: int, rng: np.random.Generator) -> list[bool]:
    out = []
    for res in run_checks(seed=seed, cases=100):
        out.append(_check("matrix", res.name, res.worst, res.tol))
    A = np.eye(3) + 0.05 * rng.standard_normal((3, 3))
    shot = geodesic_shoot_qr(A.T @ A)
    _, R = qr_polar_factorise(A)
    out.append(_check("matrix", "shooting_vs_qr", float(np.max(np.abs(shot.R - R))), 1e-8))
    return out


def run_selftest(seed: int = 0) -> bool:
    """Run every suite; returns True when all checks pass."""
    rng = np.random.default_rng(seed)
    results = []
    results += _spectral(rng)
    results += _euler_arnold()
    results += _fisher(rng)
    results += _transport(rng)
    results += _matrix(seed, rng)
    ok = all(results)
    report("selftest", seed=seed, checks=len(results), failed=len(results) - sum(results), passed=ok)
    return ok
