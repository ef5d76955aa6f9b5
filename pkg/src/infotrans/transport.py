"""Optimal information transport and the polar factorisation of diffeomorphisms.

The Fisher geodesic from ``vol`` to ``g^2 vol`` is the great circle
``sigma(t) = a(t) + b(t) g``.  Its horizontal lift through the identity is the
flow ``zeta`` of the gradient fields ``grad w_t`` where

    Lap w_t = (2 sigma_dot / sigma) o zeta^{-1},

and ``Jac(zeta(t)) = sigma(t)^2`` along the way.  The endpoint ``zeta(1)`` is
the optimal transport map and the gradient-flow factor of any ``phi`` with the
same Jacobian.  None of this depends on the inertia parameters.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import report
from .diffeo import DiffeoMap, compose, invert, jacobian, map_distance, require_diffeo
from .errors import BlowUp, NotDensity, ValidationError
from .fisher import Density, fisher_distance, slerp_coefficients, sphere_angle, sqrt_lift
from .spectral import (
    Grid,
    ScalarField,
    VectorField,
    _derivative_array,
    dealias,
    gradient,
    helmholtz_hodge_decompose,
    inverse_laplacian,
    l2_norm,
    sample,
)

__all__ = [
    "LiftResult",
    "Factorisation",
    "TransportResult",
    "THETA_SNAP",
    "compute_theta",
    "solve_w0",
    "lift_geodesic",
    "factorise",
    "density_transport",
    "horizontality_check",
]

log = logging.getLogger("infotrans")

# below this angle the target is treated as the identity fibre
THETA_SNAP = 1e-8
MEAN_ALARM = 1e-6
ANCHOR_EVERY = 16


def _unit(values: np.ndarray) -> np.ndarray:
    return values / math.sqrt(float(np.mean(values**2)))


def compute_theta(sqrt_target: ScalarField) -> float:
    """Fisher distance from ``vol`` to ``sqrt_target^2 vol``.

    The target is rescaled to unit L2 norm first, so ``cos(theta)`` equals the
    mean of the rescaled field to round-off.
    """
    g = sqrt_target.values
    if not float(g.min()) > 0:
        raise NotDensity("square-root target must be strictly positive")
    return sphere_angle(np.ones_like(g), _unit(g))


def solve_w0(phi: DiffeoMap) -> ScalarField:
    """Initial potential of the horizontal geodesic towards ``Jac(phi) vol``.

    Solves ``Lap w0 = 2 theta (sqrt(Jac) - cos theta) / sin theta``.  The
    right-hand side integrates to zero by the definition of theta.
    """
    g = _unit(np.sqrt(require_diffeo(phi).values))
    theta = compute_theta(ScalarField(phi.grid, g))
    scale = 2.0 / np.sinc(theta / math.pi)  # 2 theta / sin theta
    rhs = scale * (g - math.cos(theta))
    report("solve_w0", theta=theta, rhs_mean=float(np.mean(rhs)))
    return inverse_laplacian(ScalarField(phi.grid, rhs))


@dataclass(frozen=True, eq=False)
class LiftResult:
    """Horizontal lift ``zeta(t)`` of the Fisher geodesic from ``vol``.

    ``zeta_inv[i]`` is the co-evolved inverse and ``potentials[i]`` the
    mean-zero ``w_t`` with ``zeta_dot = grad(w_t) o zeta`` at ``times[i]``.
    """

    times: np.ndarray
    zeta: tuple[DiffeoMap, ...]
    zeta_inv: tuple[DiffeoMap, ...]
    potentials: tuple[ScalarField, ...]
    theta: float
    target: ScalarField

    @property
    def grid(self) -> Grid:
        return self.target.grid

    @property
    def endpoint(self) -> DiffeoMap:
        return self.zeta[-1]

    def sigma(self, t: float) -> np.ndarray:
        a, b, _, _ = slerp_coefficients(self.theta, t)
        return a + b * self.target.values

    def jacobian_errors(self) -> np.ndarray:
        """``max |Jac(zeta(t_i)) - sigma(t_i)^2|`` per stored time."""
        return np.array(
            [float(np.max(np.abs(jacobian(z).values - self.sigma(t) ** 2))) for t, z in zip(self.times, self.zeta)]
        )


def _identity_lift(target: ScalarField, steps: int, theta: float) -> LiftResult:
    grid = target.grid
    ident = DiffeoMap.identity(grid)
    zero = ScalarField.zeros(grid)
    n = steps + 1
    return LiftResult(np.linspace(0.0, 1.0, n), (ident,) * n, (ident,) * n, (zero,) * n, theta, target)


def lift_geodesic(
    sqrt_target: ScalarField,
    steps: int = 200,
    method: str = "cubic",
    anchor_every: int = ANCHOR_EVERY,
    blowup: float = 1e6,
) -> LiftResult:
    """Integrate the horizontal lifting ODE with RK4 over ``t in [0, 1]``.

    ``zeta`` and its inverse are advanced together; the inverse follows
    ``psi_dot = -(D psi) grad w`` and is re-anchored by Newton inversion
    every ``anchor_every`` steps and at the end.
    """
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    grid = sqrt_target.grid
    g = sqrt_target.values
    if not float(g.min()) > 0:
        raise NotDensity("square-root target must be strictly positive")
    norm2 = float(np.mean(g**2))
    if abs(norm2 - 1.0) > 1e-8:
        raise NotDensity(f"square-root target must have unit L2 norm, got {norm2!r}")
    g = g / math.sqrt(norm2)
    target = ScalarField(grid, g)
    theta = compute_theta(target)
    report("lift_start", theta=theta, steps=steps)
    if theta < THETA_SNAP:
        report("lift_snap", theta=theta)
        return _identity_lift(target, steps, theta)

    dim = grid.dim
    X = grid.coords
    h = 1.0 / steps

    def potential(t, E):
        a, b, da, db = slerp_coefficients(theta, t)
        r = 2.0 * (da + db * g) / (a + b * g)
        rc = sample(r, grid, X + E, method)
        mean = float(np.mean(rc))
        return inverse_laplacian(ScalarField(grid, rc - mean)), mean

    def rhs(t, D, E):
        w, mean = potential(t, E)
        gw = gradient(w).values
        dD = np.stack([sample(c, grid, X + D, method) for c in gw])
        dE = np.empty_like(E)
        for i in range(dim):
            dE[i] = -gw[i] - sum(_derivative_array(E[i], grid, j) * gw[j] for j in range(dim))
        return dD, dealias(dE, grid), w, mean

    D = np.zeros((dim,) + grid.shape)
    E = np.zeros_like(D)
    zetas = [DiffeoMap.identity(grid)]
    invs = [DiffeoMap.identity(grid)]
    pots = []
    alarms = 0
    for n in range(steps):
        t = n * h
        k1 = rhs(t, D, E)
        k2 = rhs(t + 0.5 * h, D + 0.5 * h * k1[0], E + 0.5 * h * k1[1])
        k3 = rhs(t + 0.5 * h, D + 0.5 * h * k2[0], E + 0.5 * h * k2[1])
        k4 = rhs(t + h, D + h * k3[0], E + h * k3[1])
        D = D + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        E = E + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        pots.append(k1[2])
        worst = max(abs(k[3]) for k in (k1, k2, k3, k4))
        peak = float(np.max(np.abs(D)))
        if not math.isfinite(peak) or peak > blowup or not np.all(np.isfinite(E)):
            raise BlowUp(f"lift displacement reached {peak:.3e} at t = {t + h:.6g}")
        anchored = (n + 1) % anchor_every == 0 or n + 1 == steps
        zeta = DiffeoMap(VectorField(grid, D))
        if anchored:
            E = invert(zeta, guess=DiffeoMap(VectorField(grid, E)), method=method).displacement.values
        report("lift_step", step=n + 1, t=t + h, mean_correction=worst, anchored=anchored)
        if worst > MEAN_ALARM:
            alarms += 1
            report("mean_alarm", step=n + 1, mean_correction=worst)
        zetas.append(zeta)
        invs.append(DiffeoMap(VectorField(grid, E)))
    if alarms:
        log.warning("Poisson mean correction exceeded %.0e on %d of %d steps; refine the grid", MEAN_ALARM, alarms, steps)
    pots.append(potential(1.0, E)[0])
    return LiftResult(np.linspace(0.0, 1.0, steps + 1), tuple(zetas), tuple(invs), tuple(pots), theta, target)


@dataclass(frozen=True, eq=False)
class Factorisation:
    """``phi = eta o psi`` with ``eta`` volume preserving and ``psi`` a gradient-flow endpoint."""

    eta: DiffeoMap
    psi: DiffeoMap
    w0: ScalarField
    theta: float
    jacobian_residual: float
    composition_residual: float

    def __iter__(self):
        return iter((self.eta, self.psi, self.w0, self.theta))


def factorise(phi: DiffeoMap, steps: int = 200, method: str = "cubic") -> Factorisation:
    """Polar factorisation ``phi = eta o psi``.

    ``psi`` is the lift endpoint towards ``Jac(phi) vol`` and
    ``eta = phi o psi^{-1}``.  Both residuals are reported.
    """
    grid = phi.grid
    jac = require_diffeo(phi)
    lift = lift_geodesic(ScalarField(grid, _unit(np.sqrt(jac.values))), steps, method)
    w0 = solve_w0(phi)
    if lift.theta < THETA_SNAP:
        eta, psi = phi, DiffeoMap.identity(grid)
    else:
        psi = lift.endpoint
        eta = compose(phi, lift.zeta_inv[-1], method)
    jac_res = float(np.max(np.abs(jacobian(eta).values - 1.0)))
    comp_res = map_distance(phi, compose(eta, psi, method))
    report("factorise", theta=lift.theta, jacobian_residual=jac_res, composition_residual=comp_res)
    return Factorisation(eta, psi, w0, lift.theta, jac_res, comp_res)


@dataclass(frozen=True, eq=False)
class TransportResult:
    psi: DiffeoMap
    dist: float
    lift: LiftResult
    jacobian_residual: float

    def __iter__(self):
        return iter((self.psi, self.dist))


def density_transport(target: Density, steps: int = 200, method: str = "cubic") -> TransportResult:
    """Optimal information transport from ``vol`` to ``target``: ``psi^* vol = target``."""
    lift = lift_geodesic(sqrt_lift(target), steps, method)
    psi = lift.endpoint
    dist = fisher_distance(Density.uniform(target.grid), target)
    residual = float(np.max(np.abs(jacobian(psi).values - target.ratio.values)))
    report("transport", theta=lift.theta, dist=dist, jacobian_residual=residual)
    return TransportResult(psi, dist, lift, residual)


def horizontality_check(lift: LiftResult, method: str = "cubic") -> float:
    """Largest relative non-gradient share of the Eulerian lift velocity.

    ``zeta_dot`` is rebuilt by finite differences in t (second order, one-sided
    at the ends), composed with ``zeta^{-1}`` and Hodge-decomposed.
    """
    if len(lift.times) < 3:
        return 0.0
    grid = lift.grid
    disp = np.stack([z.displacement.values for z in lift.zeta])
    # displacements are stored modulo whole periods; undo jumps before differencing
    disp = np.unwrap(disp, period=1.0, axis=0)
    vel = np.gradient(disp, lift.times, axis=0, edge_order=2)
    worst = 0.0
    for v, inv in zip(vel, lift.zeta_inv):
        pts = inv.positions()
        u = VectorField(grid, np.stack([sample(c, grid, pts, method) for c in v]))
        total = l2_norm(u)
        if total == 0.0:
            continue
        hc = helmholtz_hodge_decompose(u)
        other = math.sqrt(float(np.sum(hc.harmonic**2)) + l2_norm(hc.divfree_exact) ** 2)
        worst = max(worst, other / total)
    return worst
