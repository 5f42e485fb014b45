"""Small input-validation helpers used by the public API surface."""

from __future__ import annotations

import numbers

import numpy as np

HALF_PI = np.pi / 2.0


def check_positive_int(value, name: str) -> int:
    """Return value as int, requiring an integral value >= 1."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return value


def check_nonnegative(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value}")
    return value


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be finite and > 0, got {value}")
    return value


def check_angle(value, name: str) -> float:
    """Angles are radians in [-pi/2, pi/2)."""
    value = float(value)
    if not np.isfinite(value) or value < -HALF_PI or value >= HALF_PI:
        raise ValueError(f"{name} must lie in [-pi/2, pi/2), got {value}")
    return value


def check_rng(rng) -> np.random.Generator:
    """Accept a Generator or a seed; always return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def as_complex_matrix(arr, name: str, shape: tuple | None = None) -> np.ndarray:
    a = np.asarray(arr, dtype=np.complex128)
    if shape is not None and a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    return a


def as_signal_stack(y, name: str = "y") -> np.ndarray:
    """Normalize one vector or a stack of per-subcarrier vectors to (N, M)."""
    a = np.asarray(y, dtype=np.complex128)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a vector or an (N, M) stack, got shape {np.shape(y)}")
    return a
