"""Deterministic little-endian binary readers/writers for model artifacts.

Kept deliberately dumb: fixed-order headers, length-prefixed UTF-8 strings,
raw float64 blocks. Identical inputs produce byte-identical files, which the
pipeline relies on for replayability checks.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from chronorec.errors import DataError

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def write_str(fh: BinaryIO, text: str) -> None:
    raw = text.encode("utf-8")
    fh.write(_U32.pack(len(raw)))
    fh.write(raw)


def read_str(fh: BinaryIO) -> str:
    (n,) = _U32.unpack(fh.read(4))
    return fh.read(n).decode("utf-8")


def write_u64(fh: BinaryIO, value: int) -> None:
    fh.write(_U64.pack(value))


def read_u64(fh: BinaryIO) -> int:
    (value,) = _U64.unpack(fh.read(8))
    return value


def write_array(fh: BinaryIO, arr: np.ndarray) -> None:
    """Write shape-prefixed float64 data in C order."""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    fh.write(_U32.pack(arr.ndim))
    for dim in arr.shape:
        fh.write(_U64.pack(dim))
    fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def read_array(fh: BinaryIO) -> np.ndarray:
    (ndim,) = _U32.unpack(fh.read(4))
    shape = tuple(read_u64(fh) for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    data = fh.read(8 * count)
    if len(data) != 8 * count:
        raise DataError("truncated array block in binary file")
    return np.frombuffer(data, dtype="<f8").reshape(shape).copy()


def expect_magic(fh: BinaryIO, magic: bytes, what: str) -> None:
    got = fh.read(len(magic))
    if got != magic:
        raise DataError(f"{what}: bad file magic {got!r}, expected {magic!r}")
