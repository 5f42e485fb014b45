"""Fisher information and estimation lower bounds for the arrival angle.

For a deterministic mean mu(eta) observed in circular complex Gaussian
noise of per-entry variance sigma^2, the Fisher information matrix over
the real parameter vector is

    FIM[p, q] = (2 / sigma^2) * Re{ (d mu / d eta_p)^H (d mu / d eta_q) }

summed over subcarriers.  Complex gains contribute two real coordinates.
The real parameter blocks, per path, are

    comm:   [re_gain, im_gain, aoa, aod]
    sens:   [re_gain, im_gain, angle]          (monostatic single angle)
    shared: [sens_re_gain, sens_im_gain, comm_re_gain, comm_im_gain,
             comm_aod, angle]                  (tied arrival angle)

and the shared FIM is the sum of the two per-link FIMs embedded into the
tied parametrization, which makes the shared information on the angle
coordinate exactly additive.  Two flavors of the angle bound are
reported: the reciprocal of the angle's own diagonal information entry
(``crlb_aoa_direct``) and the angle diagonal of the full FIM inverse,
which accounts for the unknown nuisance parameters (``crlb_aoa``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import SingularInformationError
from .sage import (
    SageParams,
    _comm_d_aoa,
    _comm_d_aod,
    _sens_d_angle,
    comm_component,
    params_from_scene,
    sens_component,
)

__all__ = [
    "SUBSYSTEMS",
    "FisherResult",
    "CrlbComparison",
    "fisher_info",
    "crlb_compare",
    "certify_shared_gain",
    "symmetric_comm_noise",
]

SUBSYSTEMS = ("comm", "sens", "shared")

_COND_LIMIT = 1e14


@dataclass(frozen=True)
class FisherResult:
    """Fisher information over the free real parameters of one subsystem.

    crlb_aoa is the nuisance-aware per-path angle bound (angle diagonal of
    the full FIM inverse); crlb_aoa_direct is the per-path reciprocal of
    the angle's own information entry, ignoring nuisance coupling.
    """

    subsystem: str
    fim: np.ndarray
    labels: tuple
    crlb_aoa: np.ndarray
    crlb_aoa_direct: np.ndarray


@dataclass(frozen=True)
class CrlbComparison:
    """Per-path angle bounds of the three subsystems, both flavors (rad^2)."""

    shared: np.ndarray
    comm: np.ndarray
    sens: np.ndarray
    shared_nuisance: np.ndarray
    comm_nuisance: np.ndarray
    sens_nuisance: np.ndarray


def _comm_blocks(params: SageParams, pilots, n_rx):
    """Per-path derivative columns of the uplink mean and block labels."""
    cols, labels, aoa_pos = [], [], []
    for k in range(params.k_paths):
        g, aoa, aod = params.comm_gains[k], params.comm_aoas[k], params.comm_aods[k]
        unit = comm_component(1.0, aoa, aod, pilots, n_rx)
        block = [unit, 1j * unit,
                 _comm_d_aoa(g, aoa, aod, pilots, n_rx),
                 _comm_d_aod(g, aoa, aod, pilots, n_rx)]
        aoa_pos.append(len(cols) + 2)
        cols.extend(block)
        labels.extend([f"path{k}:re_gain", f"path{k}:im_gain", f"path{k}:aoa", f"path{k}:aod"])
    return cols, labels, aoa_pos


def _sens_blocks(params: SageParams, pilots, n_rx):
    cols, labels, aoa_pos = [], [], []
    for k in range(params.k_paths):
        g, th = params.sens_gains[k], params.sens_angles[k]
        unit = sens_component(1.0, th, pilots, n_rx)
        block = [unit, 1j * unit, _sens_d_angle(g, th, pilots, n_rx)]
        aoa_pos.append(len(cols) + 2)
        cols.extend(block)
        labels.extend([f"path{k}:re_gain", f"path{k}:im_gain", f"path{k}:angle"])
    return cols, labels, aoa_pos


def _fim_from_columns(cols, noise_var: float) -> np.ndarray:
    j = np.stack([c.ravel() for c in cols], axis=1)
    fim = (2.0 / noise_var) * (j.conj().T @ j).real
    return 0.5 * (fim + fim.T)


def _shared_fim(params: SageParams, pilots, n_rx, noise_var_comm, noise_var_sens):
    """Sum of both links' information on the tied per-path parametrization
    [sens re_gain, sens im_gain, comm re_gain, comm im_gain, comm aod, angle]."""
    labels, aoa_pos = [], []
    zero_c = np.zeros((pilots["comm"].shape[0], n_rx), dtype=np.complex128)
    zero_s = np.zeros((pilots["sens"].shape[0], n_rx), dtype=np.complex128)

    cols_c, cols_s = [], []
    for k in range(params.k_paths):
        beta, aoa, aod = params.comm_gains[k], params.comm_aoas[k], params.comm_aods[k]
        alpha, th = params.sens_gains[k], params.sens_angles[k]
        if th != aoa:
            raise ValueError("shared subsystem needs the tied arrival angle (comm aoa == sens angle)")
        unit_c = comm_component(1.0, aoa, aod, pilots["comm"], n_rx)
        unit_s = sens_component(1.0, th, pilots["sens"], n_rx)
        # comm mean does not depend on the sensing gain and vice versa
        cols_c.extend([zero_c, zero_c, unit_c, 1j * unit_c,
                       _comm_d_aod(beta, aoa, aod, pilots["comm"], n_rx),
                       _comm_d_aoa(beta, aoa, aod, pilots["comm"], n_rx)])
        cols_s.extend([unit_s, 1j * unit_s, zero_s, zero_s, zero_s,
                       _sens_d_angle(alpha, th, pilots["sens"], n_rx)])
        labels.extend([f"path{k}:sens_re_gain", f"path{k}:sens_im_gain",
                       f"path{k}:comm_re_gain", f"path{k}:comm_im_gain",
                       f"path{k}:comm_aod", f"path{k}:angle"])
        aoa_pos.append(6 * k + 5)
    fim = _fim_from_columns(cols_c, noise_var_comm) + _fim_from_columns(cols_s, noise_var_sens)
    return fim, labels, aoa_pos


def _invert(fim: np.ndarray, subsystem: str) -> np.ndarray:
    cond = np.linalg.cond(fim)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularInformationError(subsystem, f"{subsystem} information matrix is singular (cond ~ {cond:.3g})")
    return np.linalg.inv(fim)


def fisher_info(scene, pilots, n_rx: int, subsystem: str, params: SageParams | None = None) -> FisherResult:
    """Fisher information of one subsystem at the scene's true parameters
    (or at an explicit parameter set).

    `pilots` is the pilot set whose transmissions produced the data;
    the uplink uses its effective (precoded) pilots.
    """
    if subsystem not in SUBSYSTEMS:
        raise ValueError(f"unknown subsystem {subsystem!r}; expected one of {SUBSYSTEMS}")
    if params is None:
        params = params_from_scene(scene)
    var_c = float(scene.noise_var_comm)
    var_s = float(scene.noise_var_sensing)
    if subsystem in ("comm", "shared") and var_c <= 0:
        raise ValueError("comm noise variance must be > 0 for information analysis")
    if subsystem in ("sens", "shared") and var_s <= 0:
        raise ValueError("sensing noise variance must be > 0 for information analysis")

    if subsystem == "comm":
        cols, labels, aoa_pos = _comm_blocks(params, pilots.comm_effective, n_rx)
        fim = _fim_from_columns(cols, var_c)
    elif subsystem == "sens":
        cols, labels, aoa_pos = _sens_blocks(params, pilots.sensing, n_rx)
        fim = _fim_from_columns(cols, var_s)
    else:
        fim, labels, aoa_pos = _shared_fim(
            params, {"comm": pilots.comm_effective, "sens": pilots.sensing}, n_rx, var_c, var_s
        )

    aoa_pos = np.asarray(aoa_pos, dtype=int)
    inv = _invert(fim, subsystem)
    return FisherResult(
        subsystem=subsystem,
        fim=fim,
        labels=tuple(labels),
        crlb_aoa=inv[aoa_pos, aoa_pos].copy(),
        crlb_aoa_direct=1.0 / fim[aoa_pos, aoa_pos],
    )


def crlb_compare(scene, pilots, n_rx: int, params: SageParams | None = None) -> CrlbComparison:
    """Per-path angle bounds of all three subsystems on one scene.

    Requires a scene with the tied arrival angle so the shared subsystem
    is defined.
    """
    comm = fisher_info(scene, pilots, n_rx, "comm", params)
    sens = fisher_info(scene, pilots, n_rx, "sens", params)
    shared = fisher_info(scene, pilots, n_rx, "shared", params)
    return CrlbComparison(
        shared=shared.crlb_aoa_direct,
        comm=comm.crlb_aoa_direct,
        sens=sens.crlb_aoa_direct,
        shared_nuisance=shared.crlb_aoa,
        comm_nuisance=comm.crlb_aoa,
        sens_nuisance=sens.crlb_aoa,
    )


def certify_shared_gain(comparison: CrlbComparison, rel_slack: float = 1e-12, nuisance_slack: float = 1e-9) -> bool:
    """Check shared <= min(comm, sens) per path, in both flavors.

    The direct bounds satisfy the inequality exactly (the angle information
    adds), so only `rel_slack` float headroom is allowed; the nuisance-aware
    bounds satisfy it by the information-ordering argument with a looser
    numerical slack.
    """
    standalone = np.minimum(comparison.comm, comparison.sens)
    ok_direct = np.all(comparison.shared <= standalone * (1.0 + rel_slack))
    standalone_n = np.minimum(comparison.comm_nuisance, comparison.sens_nuisance)
    ok_nuisance = np.all(comparison.shared_nuisance <= standalone_n * (1.0 + nuisance_slack))
    return bool(ok_direct and ok_nuisance)


def symmetric_comm_noise(scene, pilots, n_rx: int):
    """Rescale the comm noise variance so both links carry equal direct
    angle information (single-path scenes), making the shared direct bound
    exactly half the standalone bound."""
    comm = fisher_info(scene, pilots, n_rx, "comm")
    sens = fisher_info(scene, pilots, n_rx, "sens")
    if comm.crlb_aoa_direct.size != 1:
        raise ValueError("symmetric construction is defined for single-path scenes")
    info_c = 1.0 / comm.crlb_aoa_direct[0]
    info_s = 1.0 / sens.crlb_aoa_direct[0]
    return replace(scene, noise_var_comm=scene.noise_var_comm * info_c / info_s)
