"""Reading and writing fields, maps and matrices.

Formats
-------
* 1-D scalar fields: two-column CSV ``x,value``.
* 2-D scalar fields: binary PGM (8 or 16 bit).  A header comment
  ``# infotrans offset=<a> scale=<s>`` records ``value = a + s * pixel``.
* Any field: raw little-endian float64 plus a JSON sidecar
  ``{"dim", "sizes", "kind"}`` at ``<path>.json``; round trips are bit exact.
* Matrices: comma-separated rows.

All writers go through a temporary file and ``os.replace`` so a failed run
never leaves a partial output behind.
"""
from __future__ import annotations

import json
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .diffeo import DiffeoMap
from .errors import ValidationError
from .spectral import Grid, ScalarField, VectorField

__all__ = [
    "atomic_write",
    "write_csv_1d",
    "read_csv_1d",
    "write_pgm",
    "read_pgm",
    "write_binary",
    "read_binary",
    "read_scalar",
    "write_map",
    "read_map",
    "write_matrix",
    "read_matrix",
]

_KINDS = ("scalar", "vector", "displacement")


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- CSV (1-D) --

def write_csv_1d(path, field: ScalarField) -> None:
    if field.grid.dim != 1:
        raise ValidationError("CSV output is for 1-D fields")
    x = field.grid.coords[0]
    lines = ["x,value"] + [f"{a!r},{b!r}" for a, b in zip(x.tolist(), field.values.tolist())]
    atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_csv_1d(path) -> ScalarField:
    data = np.loadtxt(path, delimiter=",", skiprows=_header_rows(path), ndmin=2)
    if data.shape[1] != 2:
        raise ValidationError(f"{path}: expected two columns (x, value)")
    n = data.shape[0]
    grid = Grid((n,))
    if not np.allclose(data[:, 0], grid.coords[0], atol=1e-9):
        raise ValidationError(f"{path}: x column is not the uniform grid k/{n}")
    return ScalarField(grid, data[:, 1])


def _header_rows(path) -> int:
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(tok) for tok in first.split(",")]
        return 0
    except ValueError:
        return 1


# -- PGM (2-D) --

_PGM_NOTE = re.compile(rb"#\s*infotrans\s+offset=(\S+)\s+scale=(\S+)")


def write_pgm(path, field: ScalarField, bits: int = 16) -> None:
    """Rescale to the full pixel range; rows follow the first grid axis."""
    if field.grid.dim != 2:
        raise ValidationError("PGM output is for 2-D fields")
    if bits not in (8, 16):
        raise ValidationError("bits must be 8 or 16")
    maxval = 2**bits - 1
    v = field.values
    lo, hi = float(v.min()), float(v.max())
    scale = (hi - lo) / maxval if hi > lo else 1.0
    pixels = np.rint((v - lo) / scale).astype(">u2" if bits == 16 else "u1")
    rows, cols = v.shape
    header = f"P5\n# infotrans offset={lo!r} scale={scale!r}\n{cols} {rows}\n{maxval}\n".encode()
    atomic_write(path, header + pixels.tobytes())


def _pgm_tokens(data: bytes):
    """Split a PGM header into its four tokens, its comments and the raster offset."""
    pos = 0
    comments = []
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comments.append(data[pos:end])
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, comments, pos + 1


def read_pgm(path) -> ScalarField:
    """Binary PGM to a 2-D field; without our header note, pixels map to [0, 1]."""
    data = Path(path).read_bytes()
    tokens, comments, offset = _pgm_tokens(data)
    if tokens[0] != b"P5":
        raise ValidationError(f"{path}: only binary PGM (P5) is supported")
    cols, rows, maxval = (int(t) for t in tokens[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    pixels = np.frombuffer(data, dtype=dtype, count=rows * cols, offset=offset).astype(float)
    pixels = pixels.reshape(rows, cols)
    lo, scale = 0.0, 1.0 / maxval
    for note in comments:
        m = _PGM_NOTE.search(note)
        if m:
            lo, scale = float(m.group(1)), float(m.group(2))
    return ScalarField(Grid((rows, cols)), lo + scale * pixels)


# -- raw binary + JSON sidecar --

def _sidecar(path) -> Path:
    return Path(str(path) + ".json")


def write_binary(path, field, kind: str | None = None) -> None:
    if kind is None:
        kind = "scalar" if isinstance(field, ScalarField) else "vector"
    if kind not in _KINDS:
        raise ValidationError(f"unknown field kind {kind!r}")
    grid = field.grid
    meta = {"dim": grid.dim, "sizes": list(grid.sizes), "kind": kind}
    atomic_write(path, np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    atomic_write(_sidecar(path), (json.dumps(meta, sort_keys=True) + "\n").encode())


def read_binary(path):
    """Return ``(field, kind)``."""
    meta = json.loads(_sidecar(path).read_text())
    try:
        dim, sizes, kind = int(meta["dim"]), tuple(int(s) for s in meta["sizes"]), meta["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed sidecar") from exc
    if kind not in _KINDS or len(sizes) != dim:
        raise ValidationError(f"{path}: inconsistent sidecar {meta}")
    grid = Grid(sizes)
    raw = np.fromfile(path, dtype="<f8")
    if kind == "scalar":
        return ScalarField(grid, raw.reshape(grid.shape)), kind
    return VectorField(grid, raw.reshape((dim,) + grid.shape)), kind


def read_scalar(path) -> ScalarField:
    """Scalar field from CSV (1-D), PGM (2-D) or binary, chosen by extension."""
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return read_csv_1d(path)
    if suffix == ".pgm":
        return read_pgm(path)
    field, kind = read_binary(path)
    if kind != "scalar":
        raise ValidationError(f"{path}: expected a scalar field, found {kind}")
    return field


def write_map(path, phi: DiffeoMap) -> None:
    write_binary(path, phi.displacement, kind="displacement")


def read_map(path) -> DiffeoMap:
    field, kind = read_binary(path)
    if kind == "scalar":
        raise ValidationError(f"{path}: expected a displacement field")
    return DiffeoMap(field)


# -- matrices --

def write_matrix(path, a: np.ndarray) -> None:
    rows = [",".join(repr(float(x)) for x in row) for row in np.atleast_2d(a)]
    atomic_write(path, ("\n".join(rows) + "\n").encode())


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
