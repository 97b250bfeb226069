"""Exact float encoding for checkpoints (hexadecimal float strings)."""

import numpy as np

from .errors import CheckpointError


def to_hex(values):
    """Flatten an array (row-major) into a list of ``float.hex`` strings."""
    return [float(v).hex() for v in np.asarray(values, dtype=np.float64).ravel()]


def from_hex(items, shape=None):
    try:
        arr = np.array([float.fromhex(s) for s in items], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed float encoding: {exc}") from None
    if shape is not None:
        shape = tuple(shape)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"expected {shape} ({int(np.prod(shape))} values), got {arr.size}")
        arr = arr.reshape(shape)
    return arr


def matrix_to_hex(m):
    m = np.asarray(m, dtype=np.float64)
    return [to_hex(row) for row in m]


def matrix_from_hex(rows, shape):
    rows = list(rows)
    if len(rows) != shape[0] or any(len(r) != shape[1] for r in rows):
        raise CheckpointError(f"matrix does not have shape {tuple(shape)}")
    if shape[0] == 0:
        return np.zeros(shape)
    return np.stack([from_hex(r) for r in rows]).reshape(shape)
