"""Binary field dumps (AWPF format).

Layout, little-endian: magic ``b"AWPF"``, ``u32`` version (1), ``u32 nx``,
``u32 ny``, ``f64 dx``, ``f64 dy``, ``f64 lambda_vac``, then ``nx * ny``
interleaved ``(re, im)`` ``f64`` pairs in y-major row order.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .grid import Grid2D, ScalarField

__all__ = ["MAGIC", "VERSION", "write_field", "read_field", "read_header", "FieldFormatError"]

MAGIC = b"AWPF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIddd")


class FieldFormatError(ValueError):
    """File is not a valid AWPF dump."""


def _encode(f: ScalarField) -> bytes:
    g = f.grid
    head = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.dx, g.dy, f.lambda_vac)
    body = np.ascontiguousarray(f.amp, dtype="<c16").tobytes()
    return head + body


def write_field(path: str | os.PathLike, f: ScalarField) -> Path:
    """Write ``f`` atomically (temporary file in the same directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_encode(f))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_header(path: str | os.PathLike) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise FieldFormatError("file shorter than the AWPF header")
    magic, version, nx, ny, dx, dy, lam = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FieldFormatError(f"unsupported AWPF version {version}")
    return {"version": version, "nx": nx, "ny": ny, "dx": dx, "dy": dy, "lambda_vac": lam}


def read_field(path: str | os.PathLike) -> ScalarField:
    h = read_header(path)
    n = h["nx"] * h["ny"]
    data = Path(path).read_bytes()[_HEADER.size :]
    if len(data) != 16 * n:
        raise FieldFormatError(f"expected {16 * n} payload bytes, found {len(data)}")
    amp = np.frombuffer(data, dtype="<c16").reshape(h["ny"], h["nx"])
    return ScalarField(Grid2D(h["nx"], h["ny"], h["dx"], h["dy"]), amp, h["lambda_vac"])
