"""Shared input validation helpers."""

from __future__ import annotations

import numpy as np


def as_float_matrix(rows, name: str = "data") -> np.ndarray:
    """Stack an iterable of equal-length vectors into a (n, d) float64 array.

    Raises ValueError on empty input, ragged rows, or non-numeric content.
    """
    materialized = [np.asarray(row, dtype=np.float64) for row in rows]
    if not materialized:
        raise ValueError(f"{name} is empty")
    width = materialized[0].shape
    if len(width) != 1:
        raise ValueError(f"{name} rows must be 1-D vectors")
    for i, row in enumerate(materialized):
        if row.shape != width:
            raise ValueError(
                f"{name} has ragged dimensions: row {i} has length "
                f"{row.shape[0] if row.ndim == 1 else row.shape}, expected {width[0]}"
            )
    return np.stack(materialized)


def readonly(arr: np.ndarray) -> np.ndarray:
    """Return a read-only view so frozen dataclasses stay immutable in practice."""
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr
