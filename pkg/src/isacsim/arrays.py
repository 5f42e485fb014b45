"""Uniform linear array model: steering vectors and their angle derivatives.

Half-wavelength element spacing throughout, so the phase progression across
elements is pi * sin(theta).  Angles are radians; broadside is 0, and the
usable field of view is [-pi/2, pi/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_positive_int

__all__ = ["ArrayConfig", "steering", "steering_derivative"]


@dataclass(frozen=True)
class ArrayConfig:
    """Antenna counts and beamspace grid sizes for both link ends.

    n_tx / n_rx: transmit / receive element counts.
    g_tx / g_rx: beamspace grid sizes; each must be >= the matching element
    count so the grid at least critically samples the aperture.
    """

    n_tx: int
    n_rx: int
    g_tx: int
    g_rx: int

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "g_tx", "g_rx"):
            check_positive_int(getattr(self, name), name)
        if self.g_tx < self.n_tx:
            raise ValueError(f"g_tx ({self.g_tx}) must be >= n_tx ({self.n_tx})")
        if self.g_rx < self.n_rx:
            raise ValueError(f"g_rx ({self.g_rx}) must be >= n_rx ({self.n_rx})")


def steering(theta: float, m: int) -> np.ndarray:
    """Length-m steering vector, element k = exp(-1j*pi*k*sin(theta)), k = 0..m-1.

    Defined for any real theta; the physical field of view is [-pi/2, pi/2).
    """
    m = check_positive_int(m, "m")
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    k = np.arange(m)
    return np.exp(-1j * np.pi * k * np.sin(theta))


def steering_derivative(theta: float, m: int) -> np.ndarray:
    """Elementwise d/dtheta of steering(theta, m).

    Element k is (-1j*pi*k*cos(theta)) * exp(-1j*pi*k*sin(theta)).
    """
    m = check_positive_int(m, "m")
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    k = np.arange(m)
    return (-1j * np.pi * k * np.cos(theta)) * np.exp(-1j * np.pi * k * np.sin(theta))
