"""Shared fixtures: array geometries and a deterministic two-link scene builder."""

import numpy as np
import pytest

from isacsim.arrays import ArrayConfig
from isacsim.channels import (
    PathParams,
    apply_channel,
    complex_noise,
    make_pilots,
    synth_comm_channel,
    synth_sensing_channel,
)
from isacsim.sage import SageData, SageParams


@pytest.fixture
def tiny_array():
    return ArrayConfig(n_tx=2, n_rx=2, g_tx=2, g_rx=2)


@pytest.fixture
def small_array():
    return ArrayConfig(n_tx=4, n_rx=4, g_tx=8, g_rx=8)


@pytest.fixture
def desk_array():
    return ArrayConfig(n_tx=16, n_rx=16, g_tx=32, g_rx=32)


@pytest.fixture
def two_link_scene():
    """Builder for a shared-angle two-link observation with known truth.

    Returns (truth, data, pilots, cfg); noise_var applies to both links.
    Angles are fixed (not seeded) so tests can pin convergence behavior;
    gains and pilots come from the seed.
    """

    def build(cfg=None, seed=0, n_subcarriers=3, noise_var=0.0, k_paths=2):
        cfg = cfg or ArrayConfig(n_tx=8, n_rx=8, g_tx=16, g_rx=16)
        rng = np.random.default_rng(seed)
        shared = np.array([0.35, -0.60, 0.95])[:k_paths]
        comm_aods = np.array([0.20, -0.90, 0.50])[:k_paths]
        phases = rng.uniform(0.0, 2.0 * np.pi, size=2 * k_paths)
        comm_gains = np.exp(1j * phases[:k_paths])
        sens_gains = 0.8 * np.exp(1j * phases[k_paths:])
        sens_paths = [PathParams(g, a, a) for g, a in zip(sens_gains, shared)]
        comm_paths = [PathParams(g, a, d) for g, a, d in zip(comm_gains, shared, comm_aods)]
        pilots = make_pilots(cfg, n_subcarriers, rng)
        y_s = apply_channel(synth_sensing_channel(sens_paths, cfg), pilots.sensing)
        y_c = apply_channel(synth_comm_channel(comm_paths, cfg), pilots.comm_effective)
        if noise_var > 0:
            y_s = y_s + complex_noise(rng, y_s.shape, noise_var)
            y_c = y_c + complex_noise(rng, y_c.shape, noise_var)
        truth = SageParams(
            comm_gains=comm_gains,
            comm_aoas=shared.copy(),
            comm_aods=comm_aods.copy(),
            sens_gains=sens_gains,
            sens_angles=shared.copy(),
        )
        data = SageData(
            comm_rx=y_c,
            comm_pilots=pilots.comm_effective,
            sens_rx=y_s,
            sens_pilots=pilots.sensing,
        )
        return truth, data, pilots, cfg

    return build
