"""Shift-invariance (rotational) AOA estimation for the uplink array.

Exploits the half-wavelength ULA phase progression: dropping the last
antenna versus dropping the first relates the signal subspace by a
diagonal rotation whose eigenvalue phases encode the arrival sines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import SubspaceDeficientError
from .validation import as_signal_stack, check_positive_int

__all__ = ["Esprit", "esprit_aoa"]

_RANK_RTOL = 1e-12


def esprit_aoa(y, n_paths: int) -> np.ndarray:
    """Arrival angles (radians, ascending) of `n_paths` sources from a
    received stack y of shape (N, n_rx), one snapshot per subcarrier."""
    k = check_positive_int(n_paths, "n_paths")
    y = as_signal_stack(y, "y")
    n, n_rx = y.shape
    if n < k:
        raise ValueError(f"need at least {k} snapshots for {k} paths, got {n}")
    if n_rx < k + 1:
        raise ValueError(f"need at least {k + 1} receive antennas for {k} paths, got {n_rx}")

    cov = y.T @ y.conj() / n
    evals, evecs = np.linalg.eigh(cov)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    if evals[k - 1] <= _RANK_RTOL * evals[0]:
        raise SubspaceDeficientError(
            f"signal subspace collapsed: eigenvalue {k} is {evals[k - 1]:.3g} "
            f"against leading {evals[0]:.3g}"
        )
    basis = evecs[:, :k]
    psi = np.linalg.lstsq(basis[:-1, :], basis[1:, :], rcond=None)[0]
    phases = np.angle(np.linalg.eigvals(psi))
    sines = np.clip(-phases / np.pi, -1.0, 1.0)
    return np.sort(np.arcsin(sines))


class Esprit(BaseEstimator):
    """Estimator wrapper around :func:`esprit_aoa`.

    n_paths: number of sources to resolve.
    """

    def __init__(self, n_paths=2):
        self.n_paths = n_paths

    def fit(self, y, operators=None):
        """Estimate arrival angles from a received stack (N, n_rx).

        `operators` is accepted and ignored so the coarse estimators are
        interchangeable in the simulation harness.
        """
        self.aoa_ = esprit_aoa(y, self.n_paths)
        return self
