"""Dictionary construction, atom indexing, and measurement operator checks."""

import numpy as np
import pytest

from isacsim.arrays import ArrayConfig
from isacsim.beamspace import (
    atom_split,
    atom_to_angles,
    beamspace_coefficients,
    build_beamspace,
    build_dictionary,
    build_measurement_stack,
    diag_index_set,
    nearest_atom,
)
from isacsim.channels import PathParams, make_pilots, synth_sensing_channel


def _sys(n=4, g=8):
    return build_beamspace(ArrayConfig(n_tx=n, n_rx=n, g_tx=g, g_rx=g))


# ---------------------------------------------------------------------------
# dictionary


def test_two_by_two_dictionary_hand_computed():
    # grid sines are -1 and 0; columns exp(-j pi k s) / sqrt(2)
    u, grid = build_dictionary(2, 2)
    np.testing.assert_allclose(grid, np.arcsin([-1.0, 0.0]), atol=1e-14)
    np.testing.assert_allclose(u[:, 0], np.array([1.0, -1.0]) / np.sqrt(2), atol=1e-14)
    np.testing.assert_allclose(u[:, 1], np.array([1.0, 1.0]) / np.sqrt(2), atol=1e-14)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-14)


def test_columns_unit_norm():
    u, _ = build_dictionary(16, 32)
    np.testing.assert_allclose(np.linalg.norm(u, axis=0), np.ones(32), atol=1e-12)


def test_adjacent_column_coherence_dirichlet_value():
    # closed form: |<u_i, u_{i+1}>| = 1 / (m sin(pi / g)) at m=16, g=32
    u, _ = build_dictionary(16, 32)
    coherence = abs(np.vdot(u[:, 10], u[:, 11]))
    expected = 1.0 / (16.0 * np.sin(np.pi / 32.0))
    assert coherence == pytest.approx(expected, rel=1e-12)
    assert coherence == pytest.approx(0.6376435, rel=1e-6)


def test_grid_must_cover_array():
    with pytest.raises(ValueError):
        build_dictionary(8, 4)


# ---------------------------------------------------------------------------
# atom indexing (1-based, receive index fastest)


def test_diag_index_set_examples():
    assert list(diag_index_set(4, 4)) == [1, 6, 11, 16]
    assert list(diag_index_set(1, 1)) == [1]
    diag = list(diag_index_set(32, 32))
    assert len(diag) == 32
    assert diag[0] == 1 and diag[-1] == 1024
    assert all(b - a == 33 for a, b in zip(diag, diag[1:]))


def test_atom_split_example():
    assert atom_split(67, 32) == (3, 3)
    # inverse map: i + g_rx * (j - 1)
    assert 3 + 32 * (3 - 1) == 67


def test_atom_to_angles_and_nearest_atom_round_trip():
    sys = _sys(16, 32)
    for m in (1, 67, 495, 1024):
        aoa, aod = atom_to_angles(m, sys)
        assert nearest_atom(sys, aoa, aod) == m


def test_atom_to_angles_pinned():
    sys = _sys(16, 32)
    aoa, aod = atom_to_angles(67, sys)
    # position 3 on both axes: sine -1 + 2*(3-1)/32 = -0.875
    assert aoa == pytest.approx(np.arcsin(-0.875), abs=1e-14)
    assert aod == pytest.approx(np.arcsin(-0.875), abs=1e-14)


def test_atom_index_out_of_range_rejected():
    sys = _sys(4, 8)
    for m in (0, 65):
        with pytest.raises(ValueError):
            atom_to_angles(m, sys)


# ---------------------------------------------------------------------------
# beamspace coefficients


def test_on_grid_path_concentrates_on_one_atom():
    # square grid (g = n) makes the dictionary unitary, so an on-grid path
    # produces exactly one nonzero coefficient
    cfg = ArrayConfig(n_tx=4, n_rx=4, g_tx=4, g_rx=4)
    sys = build_beamspace(cfg)
    aoa, aod = atom_to_angles(6, sys)
    h = synth_sensing_channel([PathParams(1.0, aoa, aod)], cfg)
    coeffs = np.abs(beamspace_coefficients(h, sys))
    assert coeffs.shape == (16,)
    assert int(np.argmax(coeffs)) + 1 == 6
    mask = np.ones(16, dtype=bool)
    mask[5] = False
    assert np.max(coeffs[mask]) < 1e-10 * coeffs[5]


# ---------------------------------------------------------------------------
# measurement stacks


def test_operator_columns_match_rank_one_model():
    cfg = ArrayConfig(n_tx=3, n_rx=4, g_tx=4, g_rx=6)
    sys = build_beamspace(cfg)
    pilots = make_pilots(cfg, 2, np.random.default_rng(0))
    stack = build_measurement_stack(sys, pilots, "sensing")
    n = 1
    dense = stack.dense(n)
    assert dense.shape == (4, 24)
    # column of atom m = i + g_rx (j - 1) is (pilot . conj(u_tx[:, j])) u_rx[:, i]
    for m in (1, 7, 24):
        i, j = atom_split(m, 6)
        scalar = pilots.sensing[n] @ np.conj(sys.u_tx[:, j - 1])
        np.testing.assert_allclose(
            dense[:, m - 1], scalar * sys.u_rx[:, i - 1], atol=1e-12
        )


def test_correlate_matches_manual_inner_products():
    cfg = ArrayConfig(n_tx=4, n_rx=4, g_tx=8, g_rx=8)
    sys = build_beamspace(cfg)
    rng = np.random.default_rng(1)
    pilots = make_pilots(cfg, 3, rng)
    stack = build_measurement_stack(sys, pilots, "comm")
    residuals = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    candidates = np.array([1, 9, 33, 64])
    values = stack.correlate(residuals, candidates)
    dense = stack.dense_stack()
    manual = np.array(
        [
            sum(abs(np.vdot(dense[n][:, m - 1], residuals[n])) for n in range(3))
            for m in candidates
        ]
    )
    np.testing.assert_allclose(values, manual, rtol=1e-12)


def test_unknown_subsystem_rejected():
    cfg = ArrayConfig(n_tx=2, n_rx=2, g_tx=2, g_rx=2)
    sys = build_beamspace(cfg)
    pilots = make_pilots(cfg, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        build_measurement_stack(sys, pilots, "radar")
