"""Binary matrix files: a tiny self-describing container for 2-d float arrays.

Layout (little-endian): magic ``DATN``, format version u32, rows u32, cols
u32, precision u8 (0 = single, 1 = double), then the row-major payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"DATN"
VERSION = 1
_HEADER = struct.Struct("<4sIIIB")

_PRECISION_TO_CODE = {"single": 0, "double": 1}
_CODE_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def save_matrix(path: str | Path, matrix: np.ndarray, precision: str = "double") -> None:
    """Write a finite 2-d array. ``precision`` is ``"single"`` or ``"double"``."""
    if precision not in _PRECISION_TO_CODE:
        raise ValueError(f"precision must be 'single' or 'double', got {precision!r}")
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise ValueError("matrix contains non-finite values")
    code = _PRECISION_TO_CODE[precision]
    payload = np.ascontiguousarray(matrix, dtype=_CODE_TO_DTYPE[code])
    header = _HEADER.pack(MAGIC, VERSION, matrix.shape[0], matrix.shape[1], code)
    Path(path).write_bytes(header + payload.tobytes())


def load_matrix(path: str | Path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix`, validating every field."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"file too short for header: {len(raw)} bytes")
    magic, version, rows, cols, code = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"unsupported format version {version}")
    if code not in _CODE_TO_DTYPE:
        raise ValueError(f"unknown precision code {code}")
    dtype = _CODE_TO_DTYPE[code]
    expected = _HEADER.size + rows * cols * dtype.itemsize
    if len(raw) != expected:
        raise ValueError(f"payload size mismatch: file has {len(raw)} bytes, expected {expected}")
    out = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size).reshape(rows, cols).copy()
    if not np.isfinite(out).all():
        raise ValueError("matrix contains non-finite values")
    return out
