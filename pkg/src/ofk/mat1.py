"""MAT1: a minimal little-endian container for one 2-D matrix.

Layout: ``b"MAT1"``, u32 version (1), u32 rows, u32 cols, u8 dtype
(0 = float32, 1 = uint8 binary), then the row-major payload.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"MAT1"
VERSION = 1
DTYPE_F32 = 0
DTYPE_U8 = 1
_HEADER = struct.Struct("<4sIIIB")
_DTYPES = {DTYPE_F32: np.dtype("<f4"), DTYPE_U8: np.dtype("u1")}


class Mat1Error(ValueError):
    pass


def dumps(matrix, dtype: int | None = None) -> bytes:
    """Serialize a 2-D array. Boolean/uint8 arrays default to the u8 dtype."""
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise Mat1Error(f"MAT1 holds 2-D matrices, got shape {arr.shape}")
    if dtype is None:
        dtype = DTYPE_U8 if arr.dtype in (np.bool_, np.uint8) else DTYPE_F32
    if dtype not in _DTYPES:
        raise Mat1Error(f"unknown MAT1 dtype code {dtype}")
    if dtype == DTYPE_U8 and arr.size and not np.isin(arr, (0, 1)).all():
        raise Mat1Error("u8 MAT1 payload must be binary")
    payload = np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes()
    return _HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1], dtype) + payload


def loads(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise Mat1Error(f"MAT1 header truncated ({len(data)} bytes)")
    magic, version, rows, cols, dtype = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise Mat1Error(f"bad magic {magic!r}")
    if version != VERSION:
        raise Mat1Error(f"unsupported MAT1 version {version}")
    if dtype not in _DTYPES:
        raise Mat1Error(f"unknown MAT1 dtype code {dtype}")
    np_dtype = _DTYPES[dtype]
    expected = rows * cols * np_dtype.itemsize
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise Mat1Error(f"payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=np_dtype).reshape(rows, cols).copy()


def save(path, matrix, dtype: int | None = None) -> None:
    with open(path, "wb") as f:
        f.write(dumps(matrix, dtype))


def load(path) -> np.ndarray:
    with open(path, "rb") as f:
        return loads(f.read())
