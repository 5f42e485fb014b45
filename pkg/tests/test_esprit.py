"""Subspace angle estimator checks on noiseless and structured inputs."""

import numpy as np
import pytest

from isacsim.arrays import ArrayConfig
from isacsim.channels import PathParams, apply_channel, make_pilots, synth_sensing_channel
from isacsim.esprit import Esprit, esprit_aoa
from isacsim.exceptions import SubspaceDeficientError


def _echo_stack(angles, gains, n_subcarriers, cfg=None, seed=0):
    cfg = cfg or ArrayConfig(n_tx=16, n_rx=16, g_tx=32, g_rx=32)
    paths = [PathParams(g, a, a) for g, a in zip(gains, angles)]
    pilots = make_pilots(cfg, n_subcarriers, np.random.default_rng(seed))
    return apply_channel(synth_sensing_channel(paths, cfg), pilots.sensing)


def test_single_source_noiseless_exact():
    y = _echo_stack([0.4], [1.0], 8)
    est = esprit_aoa(y, 1)
    assert abs(est[0] - 0.4) < 1e-6


def test_two_sources_noiseless_exact():
    y = _echo_stack([-0.7, 0.3], [1.0, 0.5j], 10)
    est = np.sort(esprit_aoa(y, 2))
    np.testing.assert_allclose(est, [-0.7, 0.3], atol=1e-6)


def test_estimator_class_matches_function():
    y = _echo_stack([0.25, -0.55], [1.0, 0.8], 10)
    fitted = Esprit(n_paths=2).fit(y)
    np.testing.assert_allclose(np.sort(fitted.aoa_), np.sort(esprit_aoa(y, 2)), atol=1e-12)
    assert Esprit(n_paths=2).get_params() == {"n_paths": 2}


def test_subcarrier_permutation_invariance():
    y = _echo_stack([0.15, -0.35], [1.0, 0.9], 12)
    perm = np.random.default_rng(0).permutation(12)
    a = np.sort(esprit_aoa(y, 2))
    b = np.sort(esprit_aoa(y[perm], 2))
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_rank_deficient_snapshots_rejected():
    # two copies of one snapshot span a one-dimensional subspace;
    # two sources need two
    row = _echo_stack([0.1], [1.0], 1)
    y = np.vstack([row, row])
    with pytest.raises(SubspaceDeficientError):
        esprit_aoa(y, 2)


def test_too_few_snapshots_rejected():
    y = _echo_stack([0.1, -0.4], [1.0, 1.0], 1)
    with pytest.raises(ValueError):
        esprit_aoa(y, 2)


def test_estimates_within_angle_range():
    rng = np.random.default_rng(33)
    for trial in range(10):
        angles = np.sort(rng.uniform(-1.2, 1.2, size=2))
        if angles[1] - angles[0] < 0.3:
            continue
        y = _echo_stack(angles, [1.0, 0.7], 10, seed=trial)
        est = esprit_aoa(y, 2)
        assert np.all(np.abs(est) <= np.pi / 2)
        np.testing.assert_allclose(np.sort(est), angles, atol=1e-5)
