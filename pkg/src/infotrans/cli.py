"""Command-line front end.

Every command streams JSON-lines diagnostics (to stdout unless
``--diagnostics`` names a file) and ends with a ``result`` record.  Exit codes:
0 success, 1 invalid input, 2 numerical failure or failed invariant checks.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .diagnostics import report, streaming
from .errors import NumericalFailure, ValidationError
from .euler_arnold import component_diagnostics, evolve, muhs_residual
from .fieldio import (
    read_binary,
    read_map,
    read_matrix,
    read_scalar,
    write_binary,
    write_map,
    write_matrix,
)
from .fisher import Density, fisher_distance, geodesic
from .inertia import InertiaParams, energy
from .matrix import cholesky, geodesic_shoot_qr, qr_polar_factorise, run_checks
from .presets import DENSITIES, MAPS, VELOCITIES, density_preset, map_preset, velocity_preset
from .selftest import run_selftest
from .spectral import Grid, VectorField
from .transport import density_transport, factorise

__all__ = ["RunConfig", "build_parser", "run", "main"]

log = logging.getLogger("infotrans")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation errors (exit 1), not argparse's exit 2."""

    def error(self, message: str):
        raise ValidationError(f"{self.prog}: {message}")


def _grid_sizes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be N or N,N, got {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """Validated settings shared by all commands."""

    command: str
    grid: tuple[int, ...] | None = None
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.0
    steps: int = 200
    T: float = 1.0
    dt: float = 1e-3
    tol: float = 1e-12
    floor: float = 1e-3
    seed: int = 0
    inputs: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self) -> None:
        if self.steps < 10:
            raise ValidationError(f"steps must be >= 10, got {self.steps}")
        if self.floor < 0:
            raise ValidationError("floor must be non-negative")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")

    @property
    def params(self) -> InertiaParams:
        return InertiaParams(self.alpha, self.beta, self.gamma)

    def make_grid(self, default: int = 128) -> Grid:
        return Grid(self.grid if self.grid else (default,))


def _add_grid(p, default=None):
    p.add_argument("--grid", type=_grid_sizes, default=default, help="grid size N or N,N")


def _add_inertia(p):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="infotrans", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--diagnostics", default="-", help="JSON-lines diagnostics file ('-' for stdout)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fisher = sub.add_parser("fisher", help="Fisher-Rao distance and geodesics")
    fsub = fisher.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name in ("dist", "geodesic"):
        p = fsub.add_parser(name)
        _add_grid(p)
        p.add_argument("--nu0", default="uniform", help=f"file or preset {sorted(DENSITIES)}")
        p.add_argument("--nu1", required=True, help=f"file or preset {sorted(DENSITIES)}")
        p.add_argument("--floor", type=float, default=1e-3, help="offset added to image densities")
        if name == "geodesic":
            p.add_argument("--t", type=float, required=True)
            p.add_argument("--out", required=True)

    p = sub.add_parser("evolve", help="integrate the geodesic equation")
    _add_inertia(p)
    _add_grid(p, (256,))
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--u0", default="grad-sin", help=f"displacement-format file or preset {sorted(VELOCITIES)}")
    p.add_argument("--save-every", type=int, default=100)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("transport", help="optimal information transport from vol to a target")
    _add_grid(p)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--target", default="bump", help=f"file or preset {sorted(DENSITIES)}")
    p.add_argument("--floor", type=float, default=1e-3)
    p.add_argument("--out", required=True, help="output file for psi")

    p = sub.add_parser("factorise", help="polar factorisation phi = eta o psi")
    _add_inertia(p)  # accepted and ignored: the factorisation does not depend on them
    _add_grid(p, (64, 64))
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--phi", default="wobble", help=f"displacement file or preset {sorted(MAPS)}")
    p.add_argument("--out", required=True, help="output directory")

    matrix = sub.add_parser("matrix", help="QR, Cholesky and geodesic shooting")
    msub = matrix.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name in ("qr", "cholesky", "shoot"):
        p = msub.add_parser(name)
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out", required=True, help="output directory")
        if name == "shoot":
            p.add_argument("--tol", type=float, default=1e-12)
    p = msub.add_parser("check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=1000)

    p = sub.add_parser("selftest", help="run every module's invariant suite")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    command = args.command if not getattr(args, "action", None) else f"{args.command}-{args.action}"
    keys = ("grid", "alpha", "beta", "gamma", "steps", "T", "dt", "tol", "floor", "seed", "out")
    kwargs = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    inputs = {k: getattr(args, k) for k in ("nu0", "nu1", "u0", "target", "phi", "input", "t", "save_every", "cases")
              if getattr(args, k, None) is not None}
    cfg = RunConfig(command=command, inputs=inputs, **kwargs)
    cfg.params  # validates alpha, beta, gamma
    return cfg


def _with_grid(cfg: RunConfig, grid: Grid) -> RunConfig:
    """Config whose grid matches ``grid`` (for presets paired with a file)."""
    return replace(cfg, grid=grid.sizes)


def _is_file(spec: str) -> bool:
    return os.path.exists(spec)


def _load_density(spec: str, cfg: RunConfig, default_n: int = 128) -> Density:
    if _is_file(spec):
        field_ = read_scalar(spec)
        if Path(spec).suffix.lower() == ".pgm":
            return Density.normalised(field_, floor=cfg.floor)
        return Density.normalised(field_)
    return density_preset(spec, cfg.make_grid(default_n))


# -- commands --

def _cmd_fisher(cfg: RunConfig) -> int:
    nu1 = _load_density(cfg.inputs["nu1"], cfg)
    nu0 = _load_density(cfg.inputs["nu0"], _with_grid(cfg, nu1.grid))
    if nu0.grid != nu1.grid:
        raise ValidationError("nu0 and nu1 live on different grids")
    dist = fisher_distance(nu0, nu1)
    if cfg.command == "fisher-dist":
        report("result", command=cfg.command, dist=dist)
        return EXIT_OK
    mid = geodesic(nu0, nu1, cfg.inputs["t"])
    write_binary(cfg.out, mid.ratio)
    report("result", command=cfg.command, dist=dist, t=cfg.inputs["t"], out=cfg.out)
    return EXIT_OK


def _cmd_evolve(cfg: RunConfig) -> int:
    spec = cfg.inputs["u0"]
    if _is_file(spec):
        u0, _ = read_binary(spec)
        if not isinstance(u0, VectorField):
            raise ValidationError(f"{spec}: expected a vector field")
    else:
        u0 = velocity_preset(spec, cfg.make_grid())
    params = cfg.params
    every = cfg.inputs.get("save_every", 100)
    if every < 1:
        raise ValidationError("save-every must be >= 1")
    # on T^1 keep every step so the muHS residual is not limited by snapshot spacing
    fine = u0.grid.dim == 1
    traj = evolve(u0, params, cfg.T, cfg.dt, save_every=1 if fine else every)
    residual = muhs_residual(traj) if fine else None
    keep = range(0, len(traj), every if fine else 1)
    if fine and (len(traj) - 1) % every:
        keep = [*keep, len(traj) - 1]
    comps = component_diagnostics(traj)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    e0 = energy(traj.velocities[0], params)
    for n, i in enumerate(keep):
        t, u = traj.times[i], traj.velocities[i]
        write_binary(out / f"u_{n:04d}.bin", u)
        e = energy(u, params)
        record = dict(index=n, time=float(t), energy=e, energy_drift=abs(e - e0) / e0 if e0 else 0.0,
                      harmonic=comps[i, 0], divfree=comps[i, 1], gradient=comps[i, 2])
        report("snapshot", **record)
    report("result", command=cfg.command, snapshots=len(keep), muhs_residual=residual, out=str(out))
    return EXIT_OK


def _cmd_transport(cfg: RunConfig) -> int:
    target = _load_density(cfg.inputs["target"], cfg)
    res = density_transport(target, steps=cfg.steps)
    write_map(cfg.out, res.psi)
    report("result", command=cfg.command, theta=res.lift.theta, dist=res.dist,
           jacobian_residual=res.jacobian_residual, out=cfg.out)
    return EXIT_OK


def _cmd_factorise(cfg: RunConfig) -> int:
    spec = cfg.inputs["phi"]
    phi = read_map(spec) if _is_file(spec) else map_preset(spec, cfg.make_grid(64))
    fac = factorise(phi, steps=cfg.steps)
    out = Path(cfg.out)
    write_map(out / "eta.bin", fac.eta)
    write_map(out / "psi.bin", fac.psi)
    write_binary(out / "w0.bin", fac.w0)
    report("result", command=cfg.command, theta=fac.theta, jacobian_residual=fac.jacobian_residual,
           composition_residual=fac.composition_residual, out=str(out))
    return EXIT_OK


def _cmd_matrix(cfg: RunConfig) -> int:
    if cfg.command == "matrix-check":
        results = run_checks(seed=cfg.seed, cases=cfg.inputs.get("cases", 1000))
        for r in results:
            report("check", module="matrix", name=r.name, cases=r.cases, value=r.worst, tol=r.tol, passed=r.passed)
        ok = all(r.passed for r in results)
        report("result", command=cfg.command, passed=ok)
        return EXIT_OK if ok else EXIT_NUMERICAL
    a = read_matrix(cfg.inputs["input"])
    out = Path(cfg.out)
    if cfg.command == "matrix-qr":
        Q, R = qr_polar_factorise(a)
        write_matrix(out / "Q.csv", Q)
        write_matrix(out / "R.csv", R)
        n = a.shape[0]
        report("result", command=cfg.command, orthogonality=float(np.max(np.abs(Q.T @ Q - np.eye(n)))),
               reconstruction=float(np.max(np.abs(Q @ R - a))), det_q=float(np.linalg.det(Q)))
    elif cfg.command == "matrix-cholesky":
        L = cholesky(a)
        write_matrix(out / "L.csv", L)
        report("result", command=cfg.command, reconstruction=float(np.max(np.abs(L @ L.T - a))))
    else:
        shot = geodesic_shoot_qr(a, tol=cfg.tol)
        write_matrix(out / "R.csv", shot.R)
        write_matrix(out / "u0.csv", shot.u0)
        report("result", command=cfg.command, iterations=shot.iterations, residual=shot.residual)
    return EXIT_OK


def _cmd_selftest(cfg: RunConfig) -> int:
    ok = run_selftest(cfg.seed)
    report("result", command=cfg.command, passed=ok)
    return EXIT_OK if ok else EXIT_NUMERICAL


_COMMANDS = {
    "fisher": _cmd_fisher,
    "evolve": _cmd_evolve,
    "transport": _cmd_transport,
    "factorise": _cmd_factorise,
    "matrix": _cmd_matrix,
    "selftest": _cmd_selftest,
}


@contextlib.contextmanager
def _diagnostics_stream(target: str):
    if target == "-":
        yield sys.stdout
        return
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w") as fh:
        yield fh


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the command and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help, --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    with _diagnostics_stream(args.diagnostics) as stream, streaming(stream):
        try:
            cfg = _config(args)
            return _COMMANDS[args.command](cfg)
        except ValidationError as exc:
            report("error", kind=type(exc).__name__, message=str(exc), exit_code=EXIT_INVALID)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except NumericalFailure as exc:
            report("error", kind=type(exc).__name__, message=str(exc), exit_code=EXIT_NUMERICAL)
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
