"""Channel synthesis, pilot generation, and noise model checks."""

import numpy as np
import pytest

from isacsim.arrays import ArrayConfig
from isacsim.channels import (
    QPSK_POINTS,
    ChannelScene,
    PathParams,
    PilotSet,
    apply_channel,
    complex_noise,
    gen_echo,
    gen_uplink,
    make_pilots,
    mean_entry_power,
    snr_to_noise_var,
    synth_comm_channel,
    synth_sensing_channel,
)
from isacsim.exceptions import InvalidSceneError


def _cfg22():
    return ArrayConfig(n_tx=2, n_rx=2, g_tx=2, g_rx=2)


# ---------------------------------------------------------------------------
# channel synthesis


def test_single_broadside_unit_gain_path_is_all_ones():
    h = synth_sensing_channel([PathParams(1.0, 0.0, 0.0)], _cfg22())
    np.testing.assert_allclose(h, np.ones((2, 2)), atol=1e-15)


def test_gain_scales_channel_linearly():
    h = synth_sensing_channel([PathParams(1j, 0.0, 0.0)], _cfg22())
    np.testing.assert_allclose(h, 1j * np.ones((2, 2)), atol=1e-15)


def test_empty_path_list_gives_zero_channel():
    np.testing.assert_allclose(synth_comm_channel([], _cfg22()), np.zeros((2, 2)))


def test_two_paths_add():
    cfg = ArrayConfig(n_tx=4, n_rx=4, g_tx=8, g_rx=8)
    p1 = PathParams(0.7 - 0.2j, 0.3, 0.3)
    p2 = PathParams(-0.1 + 0.9j, -0.8, -0.8)
    both = synth_sensing_channel([p1, p2], cfg)
    separate = synth_sensing_channel([p1], cfg) + synth_sensing_channel([p2], cfg)
    np.testing.assert_allclose(both, separate, atol=1e-14)


def test_comm_channel_uses_departure_angle():
    cfg = ArrayConfig(n_tx=4, n_rx=4, g_tx=8, g_rx=8)
    a = synth_comm_channel([PathParams(1.0, 0.2, 0.9)], cfg)
    b = synth_comm_channel([PathParams(1.0, 0.2, -0.9)], cfg)
    assert np.linalg.norm(a - b) > 1e-3


# ---------------------------------------------------------------------------
# observation models


def test_echo_noiseless_matches_direct_product():
    cfg = ArrayConfig(n_tx=3, n_rx=4, g_tx=4, g_rx=4)
    rng = np.random.default_rng(0)
    h = synth_sensing_channel([PathParams(0.5 + 0.5j, 0.4, 0.4)], cfg)
    pilot = make_pilots(cfg, 1, rng).sensing[0]
    y = gen_echo(h, pilot, 0.0, np.random.default_rng(1))
    np.testing.assert_allclose(y, h @ pilot, atol=1e-14)


def test_apply_channel_stacks_per_subcarrier_products():
    cfg = ArrayConfig(n_tx=3, n_rx=4, g_tx=4, g_rx=4)
    rng = np.random.default_rng(0)
    h = synth_sensing_channel([PathParams(0.5 + 0.5j, 0.4, 0.4)], cfg)
    pilots = make_pilots(cfg, 5, rng).sensing
    y = apply_channel(h, pilots)
    assert y.shape == (5, 4)
    for n in range(5):
        np.testing.assert_allclose(y[n], h @ pilots[n], atol=1e-14)


def test_complex_noise_power_calibrated():
    z = complex_noise(np.random.default_rng(7), (25000, 2), 3.0)
    assert abs(mean_entry_power(z) / 3.0 - 1.0) < 0.02


def test_echo_seed_determinism():
    cfg = _cfg22()
    h = synth_sensing_channel([PathParams(1.0, 0.1, 0.1)], cfg)
    pilot = make_pilots(cfg, 1, np.random.default_rng(5)).sensing[0]
    y1 = gen_echo(h, pilot, 0.5, np.random.default_rng(42))
    y2 = gen_echo(h, pilot, 0.5, np.random.default_rng(42))
    y3 = gen_echo(h, pilot, 0.5, np.random.default_rng(43))
    np.testing.assert_array_equal(y1, y2)
    assert np.any(y1 != y3)


def test_uplink_identity_precoder_selects_first_column():
    cfg = ArrayConfig(n_tx=3, n_rx=4, g_tx=4, g_rx=4)
    h = synth_comm_channel([PathParams(1.0 - 0.3j, 0.25, -0.5)], cfg)
    x = np.zeros(3, dtype=complex)
    x[0] = 1.0
    y = gen_uplink(h, np.eye(3, dtype=complex), x, 0.0, np.random.default_rng(0))
    np.testing.assert_allclose(y, h[:, 0], atol=1e-14)


def test_uplink_zero_channel_reduces_to_the_noise_draw():
    h = np.zeros((2, 2), dtype=complex)
    y = gen_uplink(h, np.eye(2, dtype=complex), np.ones(2, dtype=complex), 2.0, np.random.default_rng(9))
    np.testing.assert_array_equal(y, complex_noise(np.random.default_rng(9), (2,), 2.0))


def test_complex_noise_zero_variance_is_exact_zero():
    z = complex_noise(np.random.default_rng(0), (4, 4), 0.0)
    np.testing.assert_array_equal(z, np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# SNR calibration


def test_snr_to_noise_var_pinned_values():
    assert snr_to_noise_var(0.0, 1.0) == pytest.approx(1.0, rel=1e-12)
    assert snr_to_noise_var(10.0, 1.0) == pytest.approx(0.1, rel=1e-12)
    assert snr_to_noise_var(-14.0, 2.0) == pytest.approx(2.0 * 10**1.4, rel=1e-12)


def test_snr_to_noise_var_edge_cases():
    assert snr_to_noise_var(5.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        snr_to_noise_var(0.0, -1.0)
    with pytest.raises(ValueError):
        snr_to_noise_var(np.inf, 1.0)


# ---------------------------------------------------------------------------
# pilots


def test_pilots_are_qpsk_and_unit_modulus():
    cfg = ArrayConfig(n_tx=5, n_rx=4, g_tx=8, g_rx=8)
    p = make_pilots(cfg, 6, np.random.default_rng(2))
    assert p.sensing.shape == (6, 5)
    assert p.comm_symbols.shape == (6, 5)
    assert p.beamformers.shape == (6, 5, 5)
    np.testing.assert_allclose(np.abs(p.sensing), 1.0, atol=1e-12)
    for v in p.comm_symbols.ravel():
        assert np.min(np.abs(QPSK_POINTS - v)) < 1e-12
    np.testing.assert_allclose(p.comm_effective, p.comm_symbols, atol=1e-14)


def test_pilot_subcarrier_slice_keeps_stack_layout():
    cfg = _cfg22()
    p = make_pilots(cfg, 4, np.random.default_rng(1))
    sl = p.subcarrier(2)
    assert sl.sensing.shape == (1, 2)
    np.testing.assert_array_equal(sl.sensing[0], p.sensing[2])


def test_pilot_set_shape_validation():
    with pytest.raises(ValueError):
        PilotSet(
            sensing=np.ones((3, 2), dtype=complex),
            beamformers=np.ones((3, 2, 3), dtype=complex),
            comm_symbols=np.ones((3, 2), dtype=complex),
        )


# ---------------------------------------------------------------------------
# scene validation


def _path(gain, aoa, aod=None):
    return PathParams(gain, aoa, aoa if aod is None else aod)


def test_scene_requires_monostatic_echo_paths():
    with pytest.raises(InvalidSceneError):
        ChannelScene(
            sensing_paths=(_path(1.0, 0.1, 0.2),),
            comm_paths=(_path(1.0, 0.1, 0.5),),
            shared_aoa=False,
            n_subcarriers=4,
            noise_var_sensing=0.1,
            noise_var_comm=0.1,
        )


def test_scene_shared_aoa_requires_matching_arrival_angles():
    with pytest.raises(InvalidSceneError):
        ChannelScene(
            sensing_paths=(_path(1.0, 0.1),),
            comm_paths=(_path(1.0, 0.3, 0.5),),
            shared_aoa=True,
            n_subcarriers=4,
            noise_var_sensing=0.1,
            noise_var_comm=0.1,
        )


def test_scene_accepts_valid_shared_pair():
    scene = ChannelScene(
        sensing_paths=(_path(1.0, 0.1),),
        comm_paths=(_path(0.5j, 0.1, -0.4),),
        shared_aoa=True,
        n_subcarriers=4,
        noise_var_sensing=0.1,
        noise_var_comm=0.2,
    )
    assert scene.k_paths == 1


def test_path_params_validation():
    with pytest.raises(ValueError):
        PathParams(np.nan, 0.0, 0.0)
    with pytest.raises(ValueError):
        PathParams(1.0, 2.0, 2.0)  # outside (-pi/2, pi/2)
