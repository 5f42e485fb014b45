"""Frequency-flat two-link channel synthesis and pilot/noise generation.

Two links share one receive array: a monostatic echo link whose paths have
identical departure and arrival angles, and an uplink whose paths have
independent departure angles.  Both channels are (n_rx, n_tx) matrices built
from rank-one outer products

    H = sum_k gain_k * steering(aoa_k, n_rx) * steering(aod_k, n_tx)^H

and are constant across subcarriers; only pilots and noise vary with the
subcarrier index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayConfig, steering
from .exceptions import InvalidSceneError
from .validation import (
    as_signal_stack,
    check_angle,
    check_nonnegative,
    check_positive_int,
    check_rng,
)

__all__ = [
    "PathParams",
    "ChannelScene",
    "PilotSet",
    "make_pilots",
    "synth_sensing_channel",
    "synth_comm_channel",
    "apply_channel",
    "gen_echo",
    "gen_uplink",
    "complex_noise",
    "snr_to_noise_var",
    "mean_entry_power",
]

QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


@dataclass(frozen=True)
class PathParams:
    """One propagation path: complex gain plus arrival/departure angles (rad)."""

    gain: complex
    aoa: float
    aod: float

    def __post_init__(self):
        gain = complex(self.gain)
        if not (np.isfinite(gain.real) and np.isfinite(gain.imag)):
            raise ValueError(f"gain must be finite, got {self.gain!r}")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "aoa", check_angle(self.aoa, "aoa"))
        object.__setattr__(self, "aod", check_angle(self.aod, "aod"))


@dataclass(frozen=True)
class ChannelScene:
    """Paths for both links plus per-link noise variances.

    shared_aoa=True asserts the structural tie that path k of the uplink
    arrives from the same angle as path k of the echo link.
    """

    sensing_paths: tuple
    comm_paths: tuple
    shared_aoa: bool
    n_subcarriers: int
    noise_var_sensing: float
    noise_var_comm: float

    def __post_init__(self):
        sens = tuple(self.sensing_paths)
        comm = tuple(self.comm_paths)
        object.__setattr__(self, "sensing_paths", sens)
        object.__setattr__(self, "comm_paths", comm)
        if len(sens) < 1 or len(comm) < 1:
            raise InvalidSceneError("a scene needs at least one path on each link")
        for p in sens:
            if p.aoa != p.aod:
                raise InvalidSceneError(
                    f"echo paths are monostatic: aoa ({p.aoa}) must equal aod ({p.aod})"
                )
        if self.shared_aoa:
            if len(sens) != len(comm):
                raise InvalidSceneError(
                    "shared_aoa requires equal path counts on both links"
                )
            for k, (ps, pc) in enumerate(zip(sens, comm)):
                if ps.aoa != pc.aoa:
                    raise InvalidSceneError(
                        f"shared_aoa requires comm path {k} to arrive from the echo angle"
                    )
        object.__setattr__(
            self, "n_subcarriers", check_positive_int(self.n_subcarriers, "n_subcarriers")
        )
        object.__setattr__(
            self,
            "noise_var_sensing",
            check_nonnegative(self.noise_var_sensing, "noise_var_sensing"),
        )
        object.__setattr__(
            self, "noise_var_comm", check_nonnegative(self.noise_var_comm, "noise_var_comm")
        )

    @property
    def k_paths(self) -> int:
        return len(self.sensing_paths)


@dataclass(frozen=True)
class PilotSet:
    """Per-subcarrier transmit pilots for both links.

    sensing:      (N, n_tx) echo-link pilot vectors.
    beamformers:  (N, n_tx, n_tx) uplink precoders (identity by default).
    comm_symbols: (N, n_tx) uplink pilot symbol vectors.
    """

    sensing: np.ndarray
    beamformers: np.ndarray
    comm_symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sensing, dtype=np.complex128)
        f = np.asarray(self.beamformers, dtype=np.complex128)
        x = np.asarray(self.comm_symbols, dtype=np.complex128)
        if s.ndim != 2:
            raise ValueError("sensing pilots must be (N, n_tx)")
        n, m = s.shape
        if f.shape != (n, m, m) or x.shape != (n, m):
            raise ValueError("beamformers must be (N, n_tx, n_tx) and comm_symbols (N, n_tx)")
        object.__setattr__(self, "sensing", s)
        object.__setattr__(self, "beamformers", f)
        object.__setattr__(self, "comm_symbols", x)

    @property
    def n_subcarriers(self) -> int:
        return self.sensing.shape[0]

    @property
    def comm_effective(self) -> np.ndarray:
        """Precoded uplink pilots F[n] @ x[n], shape (N, n_tx)."""
        return np.einsum("nij,nj->ni", self.beamformers, self.comm_symbols)

    def subcarrier(self, n: int) -> "PilotSet":
        """Single-subcarrier slice (keeps the stack layout with N = 1)."""
        return PilotSet(
            sensing=self.sensing[n : n + 1],
            beamformers=self.beamformers[n : n + 1],
            comm_symbols=self.comm_symbols[n : n + 1],
        )


def make_pilots(cfg: ArrayConfig, n_subcarriers: int, rng) -> PilotSet:
    """Draw unit-modulus QPSK pilots for both links; identity precoders."""
    n = check_positive_int(n_subcarriers, "n_subcarriers")
    rng = check_rng(rng)
    sensing = QPSK_POINTS[rng.integers(0, 4, size=(n, cfg.n_tx))]
    comm = QPSK_POINTS[rng.integers(0, 4, size=(n, cfg.n_tx))]
    beamformers = np.broadcast_to(np.eye(cfg.n_tx, dtype=np.complex128), (n, cfg.n_tx, cfg.n_tx)).copy()
    return PilotSet(sensing=sensing, beamformers=beamformers, comm_symbols=comm)


def _synth(paths, cfg: ArrayConfig) -> np.ndarray:
    h = np.zeros((cfg.n_rx, cfg.n_tx), dtype=np.complex128)
    for p in paths:
        h += p.gain * np.outer(steering(p.aoa, cfg.n_rx), steering(p.aod, cfg.n_tx).conj())
    return h


def synth_sensing_channel(paths, cfg: ArrayConfig) -> np.ndarray:
    """Echo-link channel matrix; every path must be monostatic (aoa == aod)."""
    for p in paths:
        if p.aoa != p.aod:
            raise InvalidSceneError(
                f"echo paths are monostatic: aoa ({p.aoa}) must equal aod ({p.aod})"
            )
    return _synth(paths, cfg)


def synth_comm_channel(paths, cfg: ArrayConfig) -> np.ndarray:
    """Uplink channel matrix; arrival and departure angles are independent."""
    return _synth(paths, cfg)


def apply_channel(h: np.ndarray, pilot_stack: np.ndarray) -> np.ndarray:
    """Noiseless received stack: row n is h @ pilot_stack[n]; shape (N, n_rx)."""
    pilots = as_signal_stack(pilot_stack, "pilot_stack")
    return pilots @ np.asarray(h, dtype=np.complex128).T


def complex_noise(rng, shape, noise_var: float) -> np.ndarray:
    """Circularly symmetric complex Gaussian, per-entry variance noise_var."""
    noise_var = check_nonnegative(noise_var, "noise_var")
    rng = check_rng(rng)
    scale = np.sqrt(noise_var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def gen_echo(h_s: np.ndarray, pilot: np.ndarray, noise_var: float, rng) -> np.ndarray:
    """One echo-link observation: h_s @ pilot plus complex Gaussian noise."""
    h_s = np.asarray(h_s, dtype=np.complex128)
    pilot = np.asarray(pilot, dtype=np.complex128)
    y = h_s @ pilot
    return y + complex_noise(rng, y.shape, noise_var)


def gen_uplink(h_c: np.ndarray, f: np.ndarray, x: np.ndarray, noise_var: float, rng) -> np.ndarray:
    """One uplink observation: h_c @ f @ x plus complex Gaussian noise."""
    h_c = np.asarray(h_c, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    y = h_c @ (f @ x)
    return y + complex_noise(rng, y.shape, noise_var)


def snr_to_noise_var(snr_db: float, signal_power: float) -> float:
    """Per-entry noise variance for a target SNR given measured signal power."""
    snr_db = float(snr_db)
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    signal_power = check_nonnegative(signal_power, "signal_power")
    return signal_power / (10.0 ** (snr_db / 10.0))


def mean_entry_power(stack: np.ndarray) -> float:
    """Average |entry|^2 over a received stack; the SNR reference power."""
    a = np.asarray(stack)
    return float(np.mean(np.abs(a) ** 2))
