"""Fisher information and angle-bound tests, including an independent
finite-difference oracle for the single-path information value."""

import numpy as np
import pytest

from isacsim.arrays import ArrayConfig
from isacsim.channels import ChannelScene, PathParams, apply_channel, make_pilots, synth_sensing_channel
from isacsim.crlb import certify_shared_gain, crlb_compare, fisher_info, symmetric_comm_noise
from isacsim.exceptions import SingularInformationError


def _scene(seed=0, k_paths=2, noise_var_sens=0.3, noise_var_comm=0.7, n_subcarriers=4):
    rng = np.random.default_rng(seed)
    while True:
        shared = np.sort(rng.uniform(-1.1, 1.1, size=k_paths))
        if k_paths == 1 or np.min(np.diff(shared)) > 0.4:
            break
    aods = rng.uniform(-1.1, 1.1, size=k_paths)
    gains_c = rng.standard_normal(k_paths) + 1j * rng.standard_normal(k_paths)
    gains_s = rng.standard_normal(k_paths) + 1j * rng.standard_normal(k_paths)
    scene = ChannelScene(
        sensing_paths=tuple(PathParams(g, a, a) for g, a in zip(gains_s, shared)),
        comm_paths=tuple(PathParams(g, a, d) for g, a, d in zip(gains_c, shared, aods)),
        shared_aoa=True,
        n_subcarriers=n_subcarriers,
        noise_var_sensing=noise_var_sens,
        noise_var_comm=noise_var_comm,
    )
    cfg = ArrayConfig(n_tx=8, n_rx=8, g_tx=16, g_rx=16)
    pilots = make_pilots(cfg, n_subcarriers, rng)
    return scene, pilots, cfg


def test_fim_scales_inversely_with_noise():
    scene, pilots, cfg = _scene(seed=1)
    base = fisher_info(scene, pilots, cfg.n_rx, "shared")
    from dataclasses import replace

    doubled = replace(
        scene,
        noise_var_sensing=2 * scene.noise_var_sensing,
        noise_var_comm=2 * scene.noise_var_comm,
    )
    twice = fisher_info(doubled, pilots, cfg.n_rx, "shared")
    np.testing.assert_allclose(twice.fim, 0.5 * base.fim, rtol=1e-14)


def test_single_path_information_matches_numerical_oracle():
    # independent oracle: differentiate the noiseless mean numerically and
    # evaluate 2/sigma^2 * sum_n ||d mu[n] / d theta||^2
    scene, pilots, cfg = _scene(seed=2, k_paths=1)
    gain = scene.sensing_paths[0].gain
    theta = scene.sensing_paths[0].aoa
    h = 1e-6

    def mean(t):
        return apply_channel(synth_sensing_channel([PathParams(gain, t, t)], cfg), pilots.sensing)

    d_mu = (mean(theta + h) - mean(theta - h)) / (2 * h)
    oracle = (2.0 / scene.noise_var_sensing) * float(np.sum(np.abs(d_mu) ** 2))
    sens = fisher_info(scene, pilots, cfg.n_rx, "sens")
    assert 1.0 / sens.crlb_aoa_direct[0] == pytest.approx(oracle, rel=1e-5)


def test_shared_angle_information_is_the_sum_of_links():
    scene, pilots, cfg = _scene(seed=3)
    comm = fisher_info(scene, pilots, cfg.n_rx, "comm")
    sens = fisher_info(scene, pilots, cfg.n_rx, "sens")
    shared = fisher_info(scene, pilots, cfg.n_rx, "shared")
    for k in range(2):
        j_comm = comm.fim[4 * k + 2, 4 * k + 2]
        j_sens = sens.fim[3 * k + 2, 3 * k + 2]
        j_shared = shared.fim[6 * k + 5, 6 * k + 5]
        assert j_shared == pytest.approx(j_comm + j_sens, rel=1e-12)


def test_label_layout():
    scene, pilots, cfg = _scene(seed=4, k_paths=1)
    assert fisher_info(scene, pilots, cfg.n_rx, "comm").labels == (
        "path0:re_gain", "path0:im_gain", "path0:aoa", "path0:aod",
    )
    assert fisher_info(scene, pilots, cfg.n_rx, "sens").labels == (
        "path0:re_gain", "path0:im_gain", "path0:angle",
    )
    shared = fisher_info(scene, pilots, cfg.n_rx, "shared")
    assert shared.labels[-1] == "path0:angle"
    assert shared.fim.shape == (6, 6)


def test_certification_over_random_scenes():
    for seed in range(20):
        scene, pilots, cfg = _scene(seed=seed, noise_var_sens=0.1 + 0.05 * seed, noise_var_comm=1.5 - 0.05 * seed)
        comparison = crlb_compare(scene, pilots, cfg.n_rx)
        assert certify_shared_gain(comparison)


def test_symmetric_noise_gives_exact_halving():
    scene, pilots, cfg = _scene(seed=5, k_paths=1)
    balanced = symmetric_comm_noise(scene, pilots, cfg.n_rx)
    comparison = crlb_compare(balanced, pilots, cfg.n_rx)
    assert comparison.shared[0] == pytest.approx(comparison.sens[0] / 2, rel=1e-12)
    assert comparison.shared[0] == pytest.approx(comparison.comm[0] / 2, rel=1e-9)


def test_drowned_comm_link_reduces_to_sensing_bound():
    # noise heavy enough to silence the comm link, light enough to keep the
    # shared information matrix invertible
    from dataclasses import replace

    scene, pilots, cfg = _scene(seed=6)
    drowned = replace(scene, noise_var_comm=1e7)
    shared = fisher_info(drowned, pilots, cfg.n_rx, "shared")
    sens = fisher_info(drowned, pilots, cfg.n_rx, "sens")
    np.testing.assert_allclose(shared.crlb_aoa_direct, sens.crlb_aoa_direct, rtol=1e-5)


def test_zero_gain_path_is_singular():
    scene, pilots, cfg = _scene(seed=7, k_paths=1)
    from dataclasses import replace

    dead = replace(scene, sensing_paths=(PathParams(0.0, scene.sensing_paths[0].aoa, scene.sensing_paths[0].aoa),))
    with pytest.raises(SingularInformationError) as exc_info:
        fisher_info(dead, pilots, cfg.n_rx, "sens")
    assert exc_info.value.subsystem == "sens"


def test_zero_noise_rejected():
    from dataclasses import replace

    scene, pilots, cfg = _scene(seed=8)
    with pytest.raises(ValueError):
        fisher_info(replace(scene, noise_var_sensing=0.0), pilots, cfg.n_rx, "sens")


def test_fim_symmetric_and_psd():
    for seed in (9, 10, 11):
        scene, pilots, cfg = _scene(seed=seed)
        for subsystem in ("comm", "sens", "shared"):
            fim = fisher_info(scene, pilots, cfg.n_rx, subsystem).fim
            scale = np.linalg.norm(fim)
            assert np.max(np.abs(fim - fim.T)) < 1e-12 * scale
            assert np.min(np.linalg.eigvalsh(fim)) >= -1e-10 * scale
