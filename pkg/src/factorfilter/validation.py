"""Input validation helpers shared by the estimators and pipeline functions."""
from __future__ import annotations

import numpy as np


def check_feature_matrix(X, feature_dim: int | None = None, name: str = "X") -> np.ndarray:
    """Validate and return features as a finite float64 matrix (n, d).

    Accepts a single (d,) vector and promotes it to shape (1, d).
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    if feature_dim is not None and arr.shape[1] != feature_dim:
        raise ValueError(
            f"{name} has {arr.shape[1]} feature columns, expected {feature_dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_label_matrix(Y, cardinalities, name: str = "Y") -> np.ndarray:
    """Validate and return labels as an int64 matrix (n, m) within cardinality."""
    arr = np.asarray(Y)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    cards = np.asarray(list(cardinalities), dtype=np.int64)
    if arr.shape[1] != cards.shape[0]:
        raise ValueError(
            f"{name} has {arr.shape[1]} label columns, expected {cards.shape[0]}"
        )
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(np.asarray(arr, dtype=np.float64))
        if not np.array_equal(rounded, arr):
            raise ValueError(f"{name} labels must be integers")
        arr = rounded
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or np.any(arr >= cards[np.newaxis, :])):
        bad = np.argwhere((arr < 0) | (arr >= cards[np.newaxis, :]))[0]
        raise ValueError(
            f"{name} label out of range at sample {bad[0]}, attribute {bad[1]}"
        )
    return arr


def check_label_vector(y, cardinality: int, name: str = "y") -> np.ndarray:
    """Validate a single-attribute label vector against its cardinality."""
    arr = np.asarray(y, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    if arr.size and (arr.min() < 0 or arr.max() >= cardinality):
        raise ValueError(f"{name} has labels outside [0, {cardinality})")
    return arr


def check_probability_vector(p, name: str = "p", tol: float = 1e-9) -> np.ndarray:
    """Validate a probability vector: non-negative, sums to 1 within tol."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} sums to {total!r}, expected 1 within {tol}")
    return arr
