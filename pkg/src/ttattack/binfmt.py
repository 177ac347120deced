"""Shared helpers for the repo's little-endian binary containers.

Every container is: a 4-byte ASCII magic, a header of signed 64-bit
little-endian integers, then float64 little-endian payload arrays stored
contiguously in C order.
"""

from __future__ import annotations

import numpy as np

_I8 = np.dtype("<i8")
_F8 = np.dtype("<f8")


def pack_ints(values) -> bytes:
    return np.asarray(list(values), dtype=_I8).tobytes()


def pack_floats(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype=_F8).tobytes()


class Reader:
    """Cursor over a container's bytes with typed reads."""

    def __init__(self, data: bytes, magic: bytes):
        if data[:4] != magic:
            raise ValueError(f"bad magic: expected {magic!r}, got {data[:4]!r}")
        self._data = data
        self._pos = 4

    def ints(self, count: int) -> list[int]:
        end = self._pos + 8 * count
        if end > len(self._data):
            raise ValueError("truncated container header")
        out = np.frombuffer(self._data, dtype=_I8, count=count, offset=self._pos)
        self._pos = end
        return [int(v) for v in out]

    def floats(self, shape) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = self._pos + 8 * count
        if end > len(self._data):
            raise ValueError("truncated container payload")
        out = np.frombuffer(self._data, dtype=_F8, count=count, offset=self._pos)
        self._pos = end
        return out.astype(np.float64).reshape(shape)

    def expect_end(self):
        if self._pos != len(self._data):
            raise ValueError("trailing bytes after container payload")
