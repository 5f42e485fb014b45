"""Beamspace dictionaries, flat atom indexing, and measurement operators.

The angle grid is uniform in the sine domain: grid point i (1-based) has
sin(angle_i) = -1 + 2*(i-1)/g, covering [-1, 1).  Dictionary columns are
unit-norm steering vectors on that grid; for g == m the dictionary is the
unitary DFT basis, for g > m the rows stay orthogonal with U @ U^H = (g/m) I.

Atoms pair one receive grid index i with one transmit grid index j and are
numbered by the 1-based column-major flat index

    m = i + g_rx * (j - 1),          1 <= m <= g_rx * g_tx,

i.e. the receive index varies fastest.  All public APIs speak 1-based atom
indices; numpy columns are the same order shifted by one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import ArrayConfig, steering
from .channels import PilotSet
from .validation import as_signal_stack, check_positive_int

__all__ = [
    "build_dictionary",
    "BeamspaceSystem",
    "build_beamspace",
    "diag_index_set",
    "atom_split",
    "atom_to_angles",
    "nearest_atom",
    "beamspace_coefficients",
    "MeasurementOperator",
    "MeasurementStack",
    "build_measurement",
    "build_measurement_stack",
]

SUBSYSTEMS = ("sensing", "comm")


def build_dictionary(m: int, g: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm steering dictionary (m, g) and its grid angles (g,).

    Column i (0-based here) is steering(angle_i, m) / sqrt(m) with
    sin(angle_i) = -1 + 2*i/g.  Requires g >= m.
    """
    m = check_positive_int(m, "m")
    g = check_positive_int(g, "g")
    if g < m:
        raise ValueError(f"grid size g ({g}) must be >= element count m ({m})")
    sines = -1.0 + 2.0 * np.arange(g) / g
    grid = np.arcsin(sines)
    u = np.empty((m, g), dtype=np.complex128)
    for i, ang in enumerate(grid):
        u[:, i] = steering(ang, m) / np.sqrt(m)
    return u, grid


@dataclass(frozen=True)
class BeamspaceSystem:
    """Both link-end dictionaries plus their grids."""

    u_tx: np.ndarray
    u_rx: np.ndarray
    grid_tx: np.ndarray
    grid_rx: np.ndarray

    @property
    def n_tx(self) -> int:
        return self.u_tx.shape[0]

    @property
    def n_rx(self) -> int:
        return self.u_rx.shape[0]

    @property
    def g_tx(self) -> int:
        return self.u_tx.shape[1]

    @property
    def g_rx(self) -> int:
        return self.u_rx.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.g_tx * self.g_rx


def build_beamspace(cfg: ArrayConfig) -> BeamspaceSystem:
    u_tx, grid_tx = build_dictionary(cfg.n_tx, cfg.g_tx)
    u_rx, grid_rx = build_dictionary(cfg.n_rx, cfg.g_rx)
    return BeamspaceSystem(u_tx=u_tx, u_rx=u_rx, grid_tx=grid_tx, grid_rx=grid_rx)


def diag_index_set(g_rx: int, g_tx: int) -> np.ndarray:
    """1-based flat indices of atoms with equal grid index on both ends.

    These are the atoms a monostatic path can occupy; consecutive entries
    differ by g_rx + 1.
    """
    g_rx = check_positive_int(g_rx, "g_rx")
    g_tx = check_positive_int(g_tx, "g_tx")
    i = np.arange(1, min(g_rx, g_tx) + 1)
    return i + g_rx * (i - 1)


def atom_split(m: int, g_rx: int) -> tuple[int, int]:
    """Flat atom index -> (receive grid index i, transmit grid index j), 1-based."""
    m = int(m)
    if m < 1:
        raise ValueError(f"atom index must be >= 1, got {m}")
    i = (m - 1) % g_rx + 1
    j = (m - 1) // g_rx + 1
    return i, j


def atom_to_angles(m: int, sys: BeamspaceSystem) -> tuple[float, float]:
    """Flat atom index -> (aoa, aod) grid angles in radians."""
    i, j = atom_split(m, sys.g_rx)
    if j > sys.g_tx:
        raise ValueError(f"atom index {m} exceeds grid ({sys.g_rx} x {sys.g_tx})")
    return float(sys.grid_rx[i - 1]), float(sys.grid_tx[j - 1])


def _nearest_grid_index(g: int, angle: float) -> int:
    """1-based index of the grid point nearest in the sine domain."""
    pos = (np.sin(angle) + 1.0) * g / 2.0
    return int(np.clip(np.rint(pos), 0, g - 1)) + 1


def nearest_atom(sys: BeamspaceSystem, aoa: float, aod: float) -> int:
    """Flat index of the atom nearest to (aoa, aod), sine-domain metric."""
    i = _nearest_grid_index(sys.g_rx, aoa)
    j = _nearest_grid_index(sys.g_tx, aod)
    return i + sys.g_rx * (j - 1)


def beamspace_coefficients(h: np.ndarray, sys: BeamspaceSystem) -> np.ndarray:
    """Column-major beamspace coefficient vector of a channel matrix.

    Returns the minimum-norm coefficients c with
    u_rx @ unvec(c) @ u_tx^H == h, namely

        (n_rx * n_tx) / (g_rx * g_tx) * vec(u_rx^H @ h @ u_tx),

    which reduces to the plain analysis coefficients when both grids are
    square (g == n).  Entry m-1 belongs to atom m.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.shape != (sys.n_rx, sys.n_tx):
        raise ValueError(f"h must be ({sys.n_rx}, {sys.n_tx}), got {h.shape}")
    scale = (sys.n_rx * sys.n_tx) / (sys.g_rx * sys.g_tx)
    coeff = sys.u_rx.conj().T @ h @ sys.u_tx
    return scale * coeff.flatten(order="F")


@dataclass(frozen=True)
class MeasurementOperator:
    """Dense per-subcarrier operator mapping beamspace coefficients to the
    noiseless received vector: omega is (n_rx, g_rx*g_tx)."""

    omega: np.ndarray
    subsystem: str

    def __post_init__(self):
        if self.subsystem not in SUBSYSTEMS:
            raise ValueError(f"subsystem must be one of {SUBSYSTEMS}, got {self.subsystem!r}")


class MeasurementStack:
    """All N per-subcarrier operators of one link in factored form.

    Each atom column factors as tx_gains[n, j] * u_rx[:, i], where
    tx_gains[n] = u_tx^H @ pilot[n].  The factored form gives fast
    correlations and column extraction; dense(n) materializes one operator.
    """

    def __init__(self, u_rx: np.ndarray, tx_gains: np.ndarray, subsystem: str):
        if subsystem not in SUBSYSTEMS:
            raise ValueError(f"subsystem must be one of {SUBSYSTEMS}, got {subsystem!r}")
        self.u_rx = np.asarray(u_rx, dtype=np.complex128)
        self.tx_gains = np.atleast_2d(np.asarray(tx_gains, dtype=np.complex128))
        self.subsystem = subsystem

    @property
    def n_subcarriers(self) -> int:
        return self.tx_gains.shape[0]

    @property
    def g_rx(self) -> int:
        return self.u_rx.shape[1]

    @property
    def g_tx(self) -> int:
        return self.tx_gains.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.g_rx * self.g_tx

    def dense(self, n: int) -> np.ndarray:
        """(n_rx, g_rx*g_tx) operator for subcarrier n (0-based)."""
        return np.kron(self.tx_gains[n][None, :], self.u_rx)

    def dense_stack(self) -> np.ndarray:
        return np.stack([self.dense(n) for n in range(self.n_subcarriers)])

    def columns(self, atoms) -> np.ndarray:
        """Columns for the given 1-based atoms across subcarriers: (N, n_rx, P)."""
        atoms = np.asarray(atoms, dtype=int)
        i = (atoms - 1) % self.g_rx
        j = (atoms - 1) // self.g_rx
        if atoms.size and (atoms.min() < 1 or j.max() >= self.g_tx):
            raise ValueError("atom index out of range")
        return np.einsum("np,rp->nrp", self.tx_gains[:, j], self.u_rx[:, i])

    def correlate(self, residuals: np.ndarray, candidates=None) -> np.ndarray:
        """Summed absolute correlations sum_n |<r[n], atom column>|.

        residuals: (N, n_rx).  candidates: 1-based atom indices (default all
        atoms); returns the correlation value per candidate, aligned.
        """
        r = as_signal_stack(residuals, "residuals")
        rx_abs = np.abs(self.u_rx.conj().T @ r.T)  # (g_rx, N)
        tx_abs = np.abs(self.tx_gains)  # (N, g_tx)
        if candidates is None:
            return (rx_abs @ tx_abs).flatten(order="F")
        cand = np.asarray(candidates, dtype=int)
        i = (cand - 1) % self.g_rx
        j = (cand - 1) // self.g_rx
        return np.einsum("pn,np->p", rx_abs[i, :], tx_abs[:, j])


def _link_pilot_stack(pilots: PilotSet, subsystem: str) -> np.ndarray:
    if subsystem == "sensing":
        return pilots.sensing
    if subsystem == "comm":
        return pilots.comm_effective
    raise ValueError(f"subsystem must be one of {SUBSYSTEMS}, got {subsystem!r}")


def build_measurement_stack(sys: BeamspaceSystem, pilots: PilotSet, subsystem: str) -> MeasurementStack:
    """Factored operators for every subcarrier of one link."""
    p = _link_pilot_stack(pilots, subsystem)
    if p.shape[1] != sys.n_tx:
        raise ValueError(f"pilots have {p.shape[1]} transmit entries, dictionary expects {sys.n_tx}")
    tx_gains = p @ sys.u_tx.conj()  # row n: (u_tx^H p[n])^T
    return MeasurementStack(u_rx=sys.u_rx, tx_gains=tx_gains, subsystem=subsystem)


def build_measurement(sys: BeamspaceSystem, pilots: PilotSet, subsystem: str, n: int) -> MeasurementOperator:
    """Dense operator of subcarrier n (0-based) for one link."""
    stack = build_measurement_stack(sys, pilots, subsystem)
    if not 0 <= n < stack.n_subcarriers:
        raise ValueError(f"subcarrier index {n} out of range [0, {stack.n_subcarriers})")
    return MeasurementOperator(omega=stack.dense(n), subsystem=subsystem)
