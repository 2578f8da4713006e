"""Input validation helpers shared across the public API surface."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError


def as_array(x, name: str, *, shape: tuple | None = None, dtype=None) -> np.ndarray:
    """Coerce to ndarray and optionally enforce a shape.

    Entries of ``shape`` that are ``None`` match any extent.
    """
    arr = np.asarray(x, dtype=dtype)
    if shape is not None:
        if arr.ndim != len(shape):
            raise InvalidParameterError(
                f"{name}: expected {len(shape)}-d array, got shape {arr.shape}")
        for got, want in zip(arr.shape, shape):
            if want is not None and got != want:
                raise InvalidParameterError(
                    f"{name}: expected shape {shape}, got {arr.shape}")
    return arr


def check_finite(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains NaN or Inf")
    return arr


def check_unit_norm(v, name: str, *, atol: float = 1e-3) -> np.ndarray:
    """Require unit l2 norm along the last axis."""
    arr = check_finite(v, name)
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(np.abs(norms - 1.0) > atol):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise InvalidParameterError(
            f"{name} must be unit-norm (max |norm-1| = {worst:.2e} > {atol:g})")
    return arr


def check_same_shape(a, b, name_a: str, name_b: str) -> None:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise InvalidParameterError(
            f"{name_a} shape {a.shape} != {name_b} shape {b.shape}")


def check_in_range(x, name: str, lo: float, hi: float) -> None:
    arr = np.asarray(x)
    if arr.size and (arr.min() < lo or arr.max() > hi):
        raise InvalidParameterError(
            f"{name} must lie in [{lo}, {hi}], got range [{arr.min()}, {arr.max()}]")
