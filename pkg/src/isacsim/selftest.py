"""Fast invariant suite behind the command line's selftest verb.

Each check is independent, seeded, and takes well under a second; the
suite covers the pinned algebraic identities and one smoke case per
estimator, not the statistical acceptance experiments.
"""

from __future__ import annotations

import numpy as np

from .arrays import ArrayConfig, steering
from .beamspace import (
    beamspace_coefficients,
    build_beamspace,
    build_dictionary,
    build_measurement_stack,
    diag_index_set,
    nearest_atom,
)
from .channels import (
    ChannelScene,
    PathParams,
    apply_channel,
    make_pilots,
    synth_comm_channel,
    synth_sensing_channel,
)
from .crlb import certify_shared_gain, crlb_compare
from .esprit import esprit_aoa
from .harness import ExperimentConfig, run_sweep, rmse, srp, trial_rng
from .omp import ProposedOMP, lobe_radius, neighborhood, weighted_ls
from .sage import SageData, params_from_scene, parameter_gradient, routed_cost

__all__ = ["CHECKS", "run_selftest"]

_ARRAY = ArrayConfig(n_tx=16, n_rx=16, g_tx=32, g_rx=32)


def _check_steering():
    got = steering(np.pi / 6, 2)
    assert np.allclose(got, [1.0, -1.0j], atol=1e-12), got


def _check_dictionary_frames():
    u, _ = build_dictionary(16, 16)
    assert np.allclose(u.conj().T @ u, np.eye(16), atol=1e-10)
    u, _ = build_dictionary(16, 32)
    assert np.allclose(u @ u.conj().T, 2.0 * np.eye(16), atol=1e-10)


def _check_atom_indexing():
    assert diag_index_set(4, 4).tolist() == [1, 6, 11, 16]
    assert lobe_radius(32) == 2
    assert neighborhood(67, 2, 32, 32).tolist() == [1, 34, 67, 100, 133]
    assert neighborhood(1, 2, 32, 32).tolist() == [1, 34, 67]


def _check_weighted_ls():
    rng = np.random.default_rng(7)
    cols = rng.standard_normal((3, 8, 4)) + 1j * rng.standard_normal((3, 8, 4))
    y = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
    w = rng.uniform(0.2, 2.0, size=4)
    plain = weighted_ls(y, cols)
    weighted = weighted_ls(y, cols, weights=w)
    assert np.max(np.abs(plain - weighted)) < 1e-10


def _check_operator_identity():
    rng = np.random.default_rng(11)
    sys = build_beamspace(_ARRAY)
    pilots = make_pilots(_ARRAY, 4, rng)
    paths = [PathParams(1.0 - 0.5j, 0.31, 0.31), PathParams(0.2j, -0.7, -0.7)]
    h = synth_sensing_channel(paths, _ARRAY)
    y = apply_channel(h, pilots.sensing)
    coeffs = beamspace_coefficients(h, sys)
    stack = build_measurement_stack(sys, pilots, "sensing")
    recon = np.einsum("nrg,g->nr", stack.dense_stack(), coeffs)
    assert np.linalg.norm(y - recon) / np.linalg.norm(y) < 1e-10


def _check_noiseless_recovery():
    rng = np.random.default_rng(13)
    sys = build_beamspace(_ARRAY)
    pilots = make_pilots(_ARRAY, 8, rng)
    angles = sys.grid_rx[[5, 20]]
    paths = [PathParams(1.0, angles[0], angles[0]), PathParams(0.3 + 0.1j, angles[1], angles[1])]
    y = apply_channel(synth_sensing_channel(paths, _ARRAY), pilots.sensing)
    est = ProposedOMP(sparsity=2).fit(y, build_measurement_stack(sys, pilots, "sensing"))
    truth = {nearest_atom(sys, a, a) for a in angles}
    assert set(est.center_atoms_) == truth, (est.center_atoms_, truth)
    assert est.residual_norm_ < 1e-10


def _check_esprit():
    rng = np.random.default_rng(17)
    pilots = make_pilots(_ARRAY, 12, rng)
    truth = np.array([-0.42, 0.37])
    paths = [PathParams(1.0, truth[0], truth[0]), PathParams(0.4 - 0.2j, truth[1], truth[1])]
    y = apply_channel(synth_sensing_channel(paths, _ARRAY), pilots.sensing)
    est = esprit_aoa(y, 2)
    assert np.max(np.abs(est - truth)) < 1e-8, est


def _random_shared_scene(rng, noise_c=0.01, noise_s=0.02):
    shared = np.sort(rng.uniform(-0.9, 0.9, size=2))
    aods = rng.uniform(-0.9, 0.9, size=2)
    sens = tuple(PathParams(g, a, a) for g, a in zip(rng.standard_normal(2) + 1j * rng.standard_normal(2), shared))
    comm = tuple(
        PathParams(g, a, d)
        for g, a, d in zip(rng.standard_normal(2) + 1j * rng.standard_normal(2), shared, aods)
    )
    return ChannelScene(
        sensing_paths=sens, comm_paths=comm, shared_aoa=True,
        n_subcarriers=4, noise_var_sensing=noise_s, noise_var_comm=noise_c,
    )


def _check_gradients():
    rng = np.random.default_rng(19)
    scene = _random_shared_scene(rng)
    pilots = make_pilots(_ARRAY, scene.n_subcarriers, rng)
    y_c = apply_channel(synth_comm_channel(scene.comm_paths, _ARRAY), pilots.comm_effective)
    y_s = apply_channel(synth_sensing_channel(scene.sensing_paths, _ARRAY), pilots.sensing)
    y_c = y_c + 0.05 * (rng.standard_normal(y_c.shape) + 1j * rng.standard_normal(y_c.shape))
    y_s = y_s + 0.05 * (rng.standard_normal(y_s.shape) + 1j * rng.standard_normal(y_s.shape))
    data = SageData(comm_rx=y_c, comm_pilots=pilots.comm_effective, sens_rx=y_s, sens_pilots=pilots.sensing)
    params = params_from_scene(scene)
    eps = 1e-7
    for mode, kind in (("joint", "shared"), ("joint", "comm_gain"), ("comm_only", "comm_aod"), ("sens_only", "sens_aoa")):
        grad = parameter_gradient(mode, kind, 0, params, data)
        if kind in ("comm_gain", "sens_gain"):
            fd = _fd_gain(mode, kind, params, data, eps)
            err = abs(grad - fd) / max(abs(fd), 1e-12)
        else:
            fd = _fd_angle(mode, kind, params, data, eps)
            err = abs(grad - fd) / max(abs(fd), 1e-12)
        assert err < 1e-5, (mode, kind, grad, fd)


def _perturbed(params, kind, delta):
    p = params.copy()
    if kind in ("shared", "comm_aoa", "sens_aoa", "sens_aod"):
        if kind == "comm_aoa":
            p.comm_aoas[0] += delta
        elif kind in ("sens_aoa", "sens_aod"):
            p.sens_angles[0] += delta
        else:
            p.comm_aoas[0] += delta
            p.sens_angles[0] += delta
    elif kind == "comm_aod":
        p.comm_aods[0] += delta
    return p


def _fd_angle(mode, kind, params, data, eps):
    hi = routed_cost(mode, kind, _perturbed(params, kind, eps), data)
    lo = routed_cost(mode, kind, _perturbed(params, kind, -eps), data)
    return (hi - lo) / (2 * eps)


def _fd_gain(mode, kind, params, data, eps):
    def at(delta):
        p = params.copy()
        if kind == "comm_gain":
            p.comm_gains[0] += delta
        else:
            p.sens_gains[0] += delta
        return routed_cost(mode, kind, p, data)

    d_re = (at(eps) - at(-eps)) / (2 * eps)
    d_im = (at(1j * eps) - at(-1j * eps)) / (2 * eps)
    return d_re + 1j * d_im


def _check_corollary():
    rng = np.random.default_rng(23)
    for _ in range(3):
        scene = _random_shared_scene(rng)
        pilots = make_pilots(_ARRAY, scene.n_subcarriers, rng)
        cmp = crlb_compare(scene, pilots, _ARRAY.n_rx)
        assert certify_shared_gain(cmp), cmp


def _check_metrics():
    assert srp([True, True, True, False]) == 0.75
    assert abs(rmse([0.5, -0.2], [0.4, -0.3]) - 0.1) < 1e-15


def _check_determinism():
    a = trial_rng(5, "srp", 1, 0, 7).standard_normal(4)
    b = trial_rng(5, "srp", 1, 0, 7).standard_normal(4)
    assert np.array_equal(a, b)
    cfg = ExperimentConfig(
        array=ArrayConfig(8, 8, 16, 16), snr_grid_db=(0.0,), n_subcarriers_list=(4,),
        trials=3, seed=42, methods=("proposed_omp",),
    )
    r1 = run_sweep(cfg, threads=1)
    r2 = run_sweep(cfg, threads=3)
    assert r1 == r2, (r1, r2)


CHECKS = (
    ("steering-example", _check_steering),
    ("dictionary-frames", _check_dictionary_frames),
    ("atom-indexing", _check_atom_indexing),
    ("weighted-equals-plain-ls", _check_weighted_ls),
    ("operator-identity", _check_operator_identity),
    ("noiseless-recovery", _check_noiseless_recovery),
    ("subspace-aoa", _check_esprit),
    ("refinement-gradients", _check_gradients),
    ("shared-bound", _check_corollary),
    ("metrics", _check_metrics),
    ("determinism", _check_determinism),
)


def run_selftest(out=print) -> int:
    """Run every check; report one line each; return the failure count."""
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            out(f"FAIL {name}: {exc!r}")
        else:
            out(f"ok   {name}")
    out(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
