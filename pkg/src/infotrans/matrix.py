"""Finite-dimensional analogue: GL(n) over the cone of inner products.

``pi(A) = A^T A`` sends GL(n) onto symmetric positive definite matrices; its
fibres are orbits of left multiplication by SO(n).  The right-invariant metric

    g_I(u, v) = tr(l(u)^T l(v)) + tr((u + u^T)(v + v^T)),

with ``l`` the strictly lower-triangular part, descends to the
affine-invariant metric ``tr(M^-1 U M^-1 V)``.  Its horizontal distribution is
the upper-triangular algebra, so QR is the polar factorisation and the
Cholesky factor of ``M`` is the endpoint of a horizontal geodesic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    BlowUp,
    NotPositiveDefinite,
    NotSymmetric,
    ShootingDiverged,
    Singular,
    ValidationError,
)

__all__ = [
    "as_gl",
    "as_spd",
    "as_upp",
    "lower_part",
    "sym_metric",
    "gl_metric_identity",
    "gl_metric",
    "check_descending",
    "qr_polar_factorise",
    "cholesky",
    "UppBasis",
    "upp_basis",
    "UppGeodesic",
    "euler_arnold_upp",
    "ShootResult",
    "geodesic_shoot_qr",
    "CheckResult",
    "run_checks",
]

SYM_TOL = 1e-12


def _square(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def _scale(a: np.ndarray) -> float:
    return max(float(np.max(np.abs(a))), 1e-300)


def as_gl(a, name: str = "A") -> np.ndarray:
    """Validate an invertible matrix (smallest singular value above 1e-12 of the largest)."""
    arr = _square(a, name)
    sv = np.linalg.svd(arr, compute_uv=False)
    if not sv[-1] > 1e-12 * sv[0]:
        raise Singular(f"{name} is numerically singular (singular values {sv[0]:.3e} .. {sv[-1]:.3e})")
    return arr


def as_sym(a, name: str = "U") -> np.ndarray:
    arr = _square(a, name)
    if np.max(np.abs(arr - arr.T)) > SYM_TOL * _scale(arr):
        raise NotSymmetric(f"{name} is not symmetric")
    return arr


def as_spd(a, name: str = "M") -> np.ndarray:
    arr = as_sym(a, name)
    _cholesky(arr)
    return arr


def as_upp(a, name: str = "R", positive_diagonal: bool = True) -> np.ndarray:
    arr = _square(a, name)
    if np.any(np.tril(arr, -1)):
        raise ValidationError(f"{name} must be upper triangular")
    if positive_diagonal and not np.all(np.diag(arr) > 0):
        raise ValidationError(f"{name} must have a strictly positive diagonal")
    return arr


def lower_part(u: np.ndarray) -> np.ndarray:
    """Strictly lower-triangular part ``l(u)``."""
    return np.tril(u, -1)


def sym_metric(M, U, V) -> float:
    """Affine-invariant metric ``tr(M^-1 U M^-1 V)`` on symmetric tangents at ``M``."""
    M = as_spd(M)
    U = as_sym(U, "U")
    V = as_sym(V, "V")
    if U.shape != M.shape or V.shape != M.shape:
        raise ValidationError("shape mismatch")
    return float(np.trace(np.linalg.solve(M, U) @ np.linalg.solve(M, V)))


def gl_metric_identity(u: np.ndarray, v: np.ndarray) -> float:
    su = u + u.T
    sv = v + v.T
    return float(np.sum(lower_part(u) * lower_part(v)) + np.sum(su * sv.T))


def gl_metric(A, U, V) -> float:
    """Right-invariant metric at ``A``: ``g_I(U A^-1, V A^-1)``."""
    A = as_gl(A)
    U = _square(U, "U")
    V = _square(V, "V")
    if U.shape != A.shape or V.shape != A.shape:
        raise ValidationError("shape mismatch")
    Ainv = np.linalg.inv(A)
    return gl_metric_identity(U @ Ainv, V @ Ainv)


def check_descending(u, v, xi) -> float:
    """``|g_I([xi, u], v) + g_I(u, [xi, v])|`` for ``u, v`` in upp(n), ``xi`` in so(n)."""
    u = _square(u, "u")
    v = _square(v, "v")
    xi = _square(xi, "xi")
    if not (u.shape == v.shape == xi.shape):
        raise ValidationError("shape mismatch")
    if np.max(np.abs(xi + xi.T)) > SYM_TOL * _scale(xi):
        raise ValidationError("xi must be skew-symmetric")
    if np.any(np.tril(u, -1)) or np.any(np.tril(v, -1)):
        raise ValidationError("u and v must be upper triangular")
    return abs(gl_metric_identity(xi @ u - u @ xi, v) + gl_metric_identity(u, xi @ v - v @ xi))


def qr_polar_factorise(A) -> tuple[np.ndarray, np.ndarray]:
    """``A = Q R`` by Householder reflections, with ``diag(R) > 0``.

    For ``det A > 0`` the orthogonal factor lies in SO(n); otherwise it has
    determinant -1.
    """
    A = as_gl(A)
    n = A.shape[0]
    R = A.copy()
    Q = np.eye(n)
    for k in range(n - 1):
        x = R[k:, k]
        alpha = -math.copysign(np.linalg.norm(x), x[0]) if x[0] != 0 else -np.linalg.norm(x)
        v = x.copy()
        v[0] -= alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        R[k:, :] -= 2.0 * np.outer(v, v @ R[k:, :])
        Q[:, k:] -= 2.0 * np.outer(Q[:, k:] @ v, v)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    R = signs[:, None] * R
    Q = Q * signs[None, :]
    R = np.triu(R)
    return Q, R


def cholesky(M) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L^T = M`` and positive diagonal."""
    return _cholesky(as_sym(M, "M"))


def _cholesky(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    L = np.zeros_like(M)
    for j in range(n):
        d = M[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0:
            raise NotPositiveDefinite(f"matrix is not positive definite (pivot {j} = {d:.3e})")
        L[j, j] = math.sqrt(d)
        L[j + 1 :, j] = (M[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True, eq=False)
class UppBasis:
    """Coordinates on upp(n): basis ``e_ij`` (i <= j), Gram matrix, structure tensor.

    ``structure[a, c, b]`` is coordinate ``a`` of the commutator ``[e_c, e_b]``.
    """

    n: int
    index: tuple[tuple[int, int], ...]
    gram: np.ndarray
    structure: np.ndarray

    @property
    def size(self) -> int:
        return len(self.index)

    def coords(self, u: np.ndarray) -> np.ndarray:
        return np.array([u[i, j] for i, j in self.index])

    def matrix(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for (i, j), x in zip(self.index, c):
            out[i, j] = x
        return out


@lru_cache(maxsize=16)
def upp_basis(n: int) -> UppBasis:
    index = tuple((i, j) for i in range(n) for j in range(i, n))
    elems = []
    for i, j in index:
        e = np.zeros((n, n))
        e[i, j] = 1.0
        elems.append(e)
    m = len(index)
    gram = np.array([[gl_metric_identity(a, b) for b in elems] for a in elems])
    structure = np.zeros((m, m, m))
    for c in range(m):
        for b in range(m):
            br = elems[c] @ elems[b] - elems[b] @ elems[c]
            structure[:, c, b] = [br[i, j] for i, j in index]
    gram.setflags(write=False)
    structure.setflags(write=False)
    return UppBasis(n, index, gram, structure)


def _upp_velocity_rhs(x: np.ndarray, basis: UppBasis) -> np.ndarray:
    """``x_dot = -G^-1 ad*_x (G x)`` in basis coordinates."""
    mu = basis.gram @ x
    coad = np.einsum("a,acb,c->b", mu, basis.structure, x)
    return -np.linalg.solve(basis.gram, coad)


@dataclass(frozen=True, eq=False)
class UppGeodesic:
    times: np.ndarray
    R: np.ndarray  # (steps+1, n, n)
    u: np.ndarray  # (steps+1, n, n)

    @property
    def endpoint(self) -> np.ndarray:
        return self.R[-1]

    def energies(self) -> np.ndarray:
        return np.array([gl_metric_identity(u, u) for u in self.u])


def _integrate_upp(x0: np.ndarray, basis: UppBasis, T: float, steps: int, keep: bool, blowup: float = 1e6):
    n = basis.n
    h = T / steps if steps else 0.0
    x = x0.copy()
    R = np.eye(n)
    Rs, us = [R], [basis.matrix(x)]

    def f(x, R):
        return _upp_velocity_rhs(x, basis), basis.matrix(x) @ R

    for _ in range(steps):
        k1 = f(x, R)
        k2 = f(x + 0.5 * h * k1[0], R + 0.5 * h * k1[1])
        k3 = f(x + 0.5 * h * k2[0], R + 0.5 * h * k2[1])
        k4 = f(x + h * k3[0], R + h * k3[1])
        x = x + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        R = R + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        peak = max(float(np.max(np.abs(x))), float(np.max(np.abs(R))))
        if not math.isfinite(peak) or peak > blowup:
            raise BlowUp(f"upp geodesic reached {peak:.3e}")
        if keep:
            Rs.append(R)
            us.append(basis.matrix(x))
    return x, R, Rs, us


def euler_arnold_upp(u0, T: float = 1.0, dt: float = 1e-3) -> UppGeodesic:
    """Horizontal geodesic ``R(t)`` in Upp(n) with ``R(0) = I`` and ``R_dot R^-1 = u``."""
    u0 = as_upp(u0, "u0", positive_diagonal=False)
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if T < 0:
        raise ValidationError("T must be non-negative")
    basis = upp_basis(u0.shape[0])
    steps = int(round(T / dt))
    _, _, Rs, us = _integrate_upp(basis.coords(u0), basis, T, steps, keep=True)
    return UppGeodesic(np.linspace(0.0, T, steps + 1), np.array(Rs), np.array(us))


@dataclass(frozen=True)
class ShootResult:
    R: np.ndarray
    u0: np.ndarray
    iterations: int
    residual: float


def geodesic_shoot_qr(
    M,
    tol: float = 1e-12,
    dt: float = 0.02,
    max_iter: int = 100,
    fd_step: float = 1e-7,
) -> ShootResult:
    """Find ``u0`` in upp(n) whose geodesic endpoint satisfies ``R(1)^T R(1) = M``.

    Damped Newton on the upper-triangular entries of ``R^T R - M`` with a
    forward-difference Jacobian.  The initial guess solves the linearisation
    ``u + u^T = M - I`` at the identity.
    """
    M = as_spd(M)
    n = M.shape[0]
    basis = upp_basis(n)
    steps = max(1, int(round(1.0 / dt)))
    iu = np.triu_indices(n)
    target = tol * max(1.0, float(np.linalg.norm(M)))

    def residual(x):
        try:
            _, R, _, _ = _integrate_upp(x, basis, 1.0, steps, keep=False)
        except BlowUp as exc:
            raise ShootingDiverged(f"shot geodesic left the basin: {exc}") from exc
        return (R.T @ R - M)[iu], R

    D = M - np.eye(n)
    x = basis.coords(np.triu(D) - 0.5 * np.diag(np.diag(D)))
    F, R = residual(x)
    norm = float(np.linalg.norm(F))
    for it in range(max_iter + 1):
        if norm < target:
            return ShootResult(R, basis.matrix(x), it, norm)
        if it == max_iter:
            break
        J = np.empty((len(F), len(x)))
        for k in range(len(x)):
            xp = x.copy()
            xp[k] += fd_step
            J[:, k] = (residual(xp)[0] - F) / fd_step
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise ShootingDiverged(f"singular shooting Jacobian at iteration {it}") from exc
        lam = 1.0
        for _ in range(30):
            try:
                Ft, Rt = residual(x - lam * step)
                nt = float(np.linalg.norm(Ft))
            except ShootingDiverged:
                nt = math.inf
            if nt < norm:
                break
            lam *= 0.5
        else:
            raise ShootingDiverged(f"line search failed at iteration {it} (residual {norm:.3e})")
        x, F, R, norm = x - lam * step, Ft, Rt, nt
    raise ShootingDiverged(f"no convergence after {max_iter} Newton steps (residual {norm:.3e})")


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    worst: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst < self.tol


def _random_gl(rng: np.random.Generator, n: int) -> np.ndarray:
    """Gaussian matrix with condition number at most 10.

    Congruence by ``A`` amplifies round-off by about ``cond(A)^2``, so a looser
    bound would measure conditioning rather than the identities under test.
    """
    while True:
        A = rng.standard_normal((n, n))
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] > 0.1 * sv[0]:
            return A


def _random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.standard_normal((n, n))
    return A.T @ A + n * np.eye(n)


def _random_sym(rng: np.random.Generator, n: int) -> np.ndarray:
    S = rng.standard_normal((n, n))
    return S + S.T


def run_checks(seed: int = 0, cases: int = 1000, max_n: int = 6) -> list[CheckResult]:
    """Seeded invariance, descent and factorisation suites."""
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in ("sym_metric_invariance", "gl_right_invariance", "so_upp_orthogonality",
                              "descending", "qr_orthogonality", "qr_reconstruction", "qr_projection",
                              "qr_determinant", "cholesky_reconstruction", "cholesky_vs_qr")}
    for _ in range(cases):
        n = int(rng.integers(2, max_n + 1))
        M = _random_spd(rng, n)
        U, V = _random_sym(rng, n), _random_sym(rng, n)
        A = _random_gl(rng, n)
        lhs = sym_metric(A.T @ M @ A, A.T @ U @ A, A.T @ V @ A)
        rhs = sym_metric(M, U, V)
        scale = math.sqrt(sym_metric(M, U, U) * sym_metric(M, V, V))
        worst["sym_metric_invariance"] = max(worst["sym_metric_invariance"], abs(lhs - rhs) / scale)

        B = _random_gl(rng, n)
        X, Y = rng.standard_normal((n, n)), rng.standard_normal((n, n))
        lhs = gl_metric(A @ B, X @ B, Y @ B)
        rhs = gl_metric(A, X, Y)
        scale = math.sqrt(gl_metric(A, X, X) * gl_metric(A, Y, Y))
        worst["gl_right_invariance"] = max(worst["gl_right_invariance"], abs(lhs - rhs) / scale)

        S = rng.standard_normal((n, n))
        xi = S - S.T
        u, v = np.triu(rng.standard_normal((n, n))), np.triu(rng.standard_normal((n, n)))
        scale = math.sqrt(gl_metric_identity(xi, xi) * gl_metric_identity(v, v))
        worst["so_upp_orthogonality"] = max(worst["so_upp_orthogonality"], abs(gl_metric_identity(xi, v)) / scale)
        scale = np.linalg.norm(xi) * np.linalg.norm(u) * np.linalg.norm(v)
        worst["descending"] = max(worst["descending"], check_descending(u, v, xi) / scale)

        Q, R = qr_polar_factorise(A)
        a_scale = np.linalg.norm(A)
        worst["qr_orthogonality"] = max(worst["qr_orthogonality"], float(np.max(np.abs(Q.T @ Q - np.eye(n)))))
        worst["qr_reconstruction"] = max(worst["qr_reconstruction"], float(np.linalg.norm(Q @ R - A) / a_scale))
        worst["qr_projection"] = max(
            worst["qr_projection"], float(np.linalg.norm(R.T @ R - A.T @ A) / a_scale**2)
        )
        if not (np.all(np.diag(R) > 0) and not np.any(np.tril(R, -1))):
            worst["qr_projection"] = math.inf
        det_err = abs(np.linalg.det(Q) - math.copysign(1.0, np.linalg.det(A)))
        worst["qr_determinant"] = max(worst["qr_determinant"], det_err)

        G = A.T @ A
        L = cholesky(G)
        worst["cholesky_reconstruction"] = max(
            worst["cholesky_reconstruction"], float(np.linalg.norm(L @ L.T - G) / np.linalg.norm(G))
        )
        worst["cholesky_vs_qr"] = max(
            worst["cholesky_vs_qr"], float(np.max(np.abs(L - R.T)) / math.sqrt(np.linalg.norm(G)))
        )
    tols = {k: 1e-12 for k in worst}
    tols["cholesky_vs_qr"] = 1e-10
    return [CheckResult(k, cases, v, tols[k]) for k, v in worst.items()]
