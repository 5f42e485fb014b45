"""Monte Carlo experiment engine: scene sampling, SNR sweeps, metrics, CSV.

Three experiment kinds feed the metric records:

* ``srp``         — on-grid echo scenes scoring exact support recovery of
                    the grid-restricted and full-grid pursuits.
* ``coarse_rmse`` — off-grid echo scenes scoring arrival-angle RMSE of the
                    coarse estimators (pursuits and the subspace method).
* ``refine_rmse`` — off-grid shared-angle scenes scoring arrival-angle
                    RMSE of the three refinement modes, each initialized
                    from the coarse stage.

Methods belonging to one kind run on identical per-trial data (paired
comparison).  Every trial owns a generator seeded from (seed, kind,
snr index, N index, trial index), so results are independent of execution
order and of the thread count.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .arrays import ArrayConfig
from .beamspace import BeamspaceSystem, build_beamspace, build_measurement_stack, nearest_atom
from .channels import (
    PathParams,
    apply_channel,
    complex_noise,
    make_pilots,
    mean_entry_power,
    snr_to_noise_var,
    synth_comm_channel,
    synth_sensing_channel,
)
from .esprit import esprit_aoa
from .exceptions import ConfigError
from .omp import (
    DCSSOMP,
    ConventionalOMP,
    ProposedOMP,
    _pick_center,
    coarse_angles,
    lobe_radius,
    neighborhood,
    weighted_ls,
)
from .sage import SageData, SageParams, SageRefiner, least_squares_gains
from .validation import check_positive_int

__all__ = [
    "METHODS",
    "EXPERIMENT_KINDS",
    "METHOD_EXPERIMENTS",
    "LOS_GAIN_VAR",
    "NLOS_GAIN_VAR",
    "ExperimentConfig",
    "MetricRecord",
    "srp",
    "rmse",
    "pair_angles",
    "draw_path_gains",
    "sample_diagonal_positions",
    "sample_offgrid_sines",
    "trial_rng",
    "run_sweep",
    "write_csv",
    "estimate_scene",
    "run_refinement",
    "crlb_table",
]

METHODS = ("proposed_omp", "conventional_omp", "esprit", "sage_joint", "sage_comm", "sage_sens")

EXPERIMENT_KINDS = {"srp": 0, "coarse_rmse": 1, "refine_rmse": 2}

METHOD_EXPERIMENTS = {
    "proposed_omp": ("srp", "coarse_rmse"),
    "conventional_omp": ("srp", "coarse_rmse"),
    "esprit": ("coarse_rmse",),
    "sage_joint": ("refine_rmse",),
    "sage_comm": ("refine_rmse",),
    "sage_sens": ("refine_rmse",),
}

LOS_GAIN_VAR = 1.0
NLOS_GAIN_VAR = 0.25

SRP_MIN_SEPARATION_STEPS = 3  # diagonal grid steps between on-grid paths
OFFGRID_SINE_BOUND = 0.9
OFFGRID_MIN_SEPARATION_CELLS = 3  # in units of the grid cell 2/G
_MAX_SAMPLING_ATTEMPTS = 10000


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep description; everything that affects the output lives here."""

    array: ArrayConfig
    snr_grid_db: tuple = (-20, -18, -16, -14, -12, -10, -8, -6, -4, -2, 0, 2, 4, 6, 8, 10)
    n_subcarriers_list: tuple = (10, 20)
    trials: int = 1000
    seed: int = 0
    methods: tuple = ("proposed_omp", "conventional_omp")
    k_paths: int = 2
    lobe_radius_override: int | None = None
    sage_outer_iters: int = 100
    sage_step_angle: float = 1e-3
    sage_step_gain: float = 1e-2

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in np.atleast_1d(self.snr_grid_db)))
        object.__setattr__(self, "n_subcarriers_list", tuple(int(n) for n in np.atleast_1d(self.n_subcarriers_list)))
        object.__setattr__(self, "methods", tuple(self.methods))
        if len(self.snr_grid_db) == 0:
            raise ConfigError("snr_db grid must be non-empty")
        check_positive_int(self.trials, "trials")
        check_positive_int(self.k_paths, "k_paths")
        check_positive_int(self.sage_outer_iters, "sage_outer_iters")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method tag {m!r}; known methods: {', '.join(METHODS)}")
        if len(self.methods) == 0:
            raise ConfigError("methods must be non-empty")
        seed = self.seed
        if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")
        object.__setattr__(self, "seed", int(seed))


@dataclass(frozen=True)
class MetricRecord:
    snr_db: float
    n_subcarriers: int
    method: str
    metric: str
    value: float
    trials: int
    seed: int


# ---------------------------------------------------------------------------
# metrics


def srp(trial_outcomes) -> float:
    """Fraction of trials whose recovered support matched exactly."""
    outcomes = list(trial_outcomes)
    if not outcomes:
        raise ValueError("srp needs at least one trial outcome")
    return float(sum(bool(o) for o in outcomes)) / len(outcomes)


def pair_angles(estimates, truths) -> np.ndarray:
    """Signed errors after nearest-angle assignment of estimates to truths.

    Minimizes the total absolute difference over assignments (exhaustive for
    up to 8 paths, sorted-order pairing beyond that).
    """
    est = np.atleast_1d(np.asarray(estimates, dtype=float))
    tru = np.atleast_1d(np.asarray(truths, dtype=float))
    if est.shape != tru.shape or est.ndim != 1 or est.size == 0:
        raise ValueError("estimates and truths must be non-empty 1-D arrays of equal length")
    k = est.size
    if k > 8:
        return np.sort(est) - np.sort(tru)
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(k)):
        diffs = est - tru[list(perm)]
        cost = np.abs(diffs).sum()
        if cost < best_cost:
            best, best_cost = diffs, cost
    return best


def rmse(estimates, truths) -> float:
    """Root of the mean squared angle error after nearest assignment."""
    diffs = pair_angles(estimates, truths)
    return float(np.sqrt(np.mean(diffs**2)))


# ---------------------------------------------------------------------------
# scene sampling


def draw_path_gains(rng, k_paths: int) -> np.ndarray:
    """Unit-power first path, 6 dB weaker for the rest, uniform phases.

    Magnitudes are deterministic so the power profile holds per realization;
    a fading draw would put the weak path below the detection floor in a few
    percent of scenes and cap the support-recovery asymptote well under 1.
    The 6 dB gap keeps the weak path detectable by the greedy pursuit a few
    dB before the subspace method resolves it, which is where the coarse
    estimators separate.
    """
    powers = np.full(k_paths, NLOS_GAIN_VAR)
    powers[0] = LOS_GAIN_VAR
    phases = rng.uniform(0.0, 2.0 * np.pi, size=k_paths)
    return np.sqrt(powers) * np.exp(1j * phases)


def resolvable_separation(radius: int) -> int:
    """Smallest diagonal-step separation the neighborhood pursuit resolves.

    Two expanded neighborhoods of radius a stay disjoint only past 2(a+1)
    steps; closer paths are absorbed by the first path's local fit and the
    support criterion cannot reach probability one even without noise.
    """
    return 2 * (int(radius) + 1) + 1


def sample_diagonal_positions(
    rng,
    g: int,
    k_paths: int,
    min_step: int = SRP_MIN_SEPARATION_STEPS,
    sine_bound: float | None = None,
) -> np.ndarray:
    """Sorted 1-based diagonal grid positions with pairwise separation.

    Separation is circular: steering coherence is periodic in the sine with
    period 2 (= g steps), so the first and last grid positions are near
    neighbors and the wrap distance g - (last - first) must also clear
    `min_step`.  `sine_bound`, if given, keeps positions whose grid sine
    -1 + 2(i-1)/g lies within [-bound, bound]; endpoint targets sit where
    the sine-to-angle map degenerates and no unquantized estimator can
    resolve them.
    """
    if sine_bound is None:
        allowed = np.arange(1, g + 1)
    else:
        sines = -1.0 + 2.0 * np.arange(g) / g
        allowed = np.flatnonzero(np.abs(sines) <= sine_bound) + 1
    if k_paths * min_step > g or len(allowed) < k_paths:
        raise ValueError(f"cannot place {k_paths} paths {min_step} steps apart on a {g}-point diagonal")
    for _ in range(_MAX_SAMPLING_ATTEMPTS):
        pos = np.sort(rng.choice(allowed, size=k_paths, replace=False))
        if k_paths == 1:
            return pos
        gaps = np.concatenate([np.diff(pos), [g - (pos[-1] - pos[0])]])
        if np.all(gaps >= min_step):
            return pos
    raise ValueError("could not sample separated diagonal positions")


def sample_offgrid_sines(
    rng,
    k_paths: int,
    g: int,
    bound: float = OFFGRID_SINE_BOUND,
    min_cells: int = OFFGRID_MIN_SEPARATION_CELLS,
) -> np.ndarray:
    """Sorted arrival sines, uniform in [-bound, bound], separated by at
    least `min_cells` grid cells.

    Separation is checked modulo the dictionary period of 2 in sine space:
    steering correlation is periodic in the sine difference, so sines near
    opposite ends of the interval can alias onto nearby atoms and must obey
    the same floor through the wrap.
    """
    min_sep = min_cells * 2.0 / g
    if (k_paths - 1) * min_sep >= 2 * bound:
        raise ValueError(f"cannot separate {k_paths} sines by {min_sep} inside [-{bound}, {bound}]")
    for _ in range(_MAX_SAMPLING_ATTEMPTS):
        sines = np.sort(rng.uniform(-bound, bound, size=k_paths))
        if k_paths == 1:
            return sines
        gaps = np.diff(sines)
        wrap = 2.0 - (sines[-1] - sines[0])
        if np.all(gaps >= min_sep) and wrap >= min_sep:
            return sines
    raise ValueError("could not sample separated sines")


def trial_rng(seed: int, kind: str, snr_idx: int, n_idx: int, trial_idx: int) -> np.random.Generator:
    """The one generator a trial may use; fully determined by its indices."""
    return np.random.default_rng(
        np.random.SeedSequence([seed, EXPERIMENT_KINDS[kind], snr_idx, n_idx, trial_idx])
    )


# ---------------------------------------------------------------------------
# trials


class _Context:
    """Per-sweep immutable precomputation shared by all trials."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.system: BeamspaceSystem = build_beamspace(cfg.array)
        self.g_diag = min(cfg.array.g_rx, cfg.array.g_tx)
        radius = cfg.lobe_radius_override
        self.lobe = int(radius) if radius is not None else lobe_radius(cfg.array.g_rx)

    def sage_steps(self) -> dict:
        angle, gain = self.cfg.sage_step_angle, self.cfg.sage_step_gain
        return {k: angle for k in ("comm_aoa", "comm_aod", "sens_aoa", "sens_aod")} | {
            k: gain for k in ("comm_gain", "sens_gain")
        }


def _noisy(rng, noiseless: np.ndarray, snr_db: float):
    var = snr_to_noise_var(snr_db, mean_entry_power(noiseless))
    return noiseless + complex_noise(rng, noiseless.shape, var), var


def _srp_trial(ctx: _Context, snr_db: float, n: int, rng, methods) -> dict:
    cfg, sys = ctx.cfg, ctx.system
    pos = sample_diagonal_positions(
        rng,
        ctx.g_diag,
        cfg.k_paths,
        min_step=resolvable_separation(ctx.lobe),
        sine_bound=OFFGRID_SINE_BOUND,
    )
    angles = sys.grid_rx[pos - 1]
    gains = draw_path_gains(rng, cfg.k_paths)
    paths = [PathParams(g, a, a) for g, a in zip(gains, angles)]
    true_atoms = set((pos + cfg.array.g_rx * (pos - 1)).tolist())

    pilots = make_pilots(cfg.array, n, rng)
    h = synth_sensing_channel(paths, cfg.array)
    y, _ = _noisy(rng, apply_channel(h, pilots.sensing), snr_db)
    stack = build_measurement_stack(sys, pilots, "sensing")

    out = {}
    if "proposed_omp" in methods:
        est = ProposedOMP(sparsity=cfg.k_paths, lobe_radius=cfg.lobe_radius_override).fit(y, stack)
        out["proposed_omp"] = set(est.center_atoms_) == true_atoms
    if "conventional_omp" in methods:
        est = ConventionalOMP(sparsity=cfg.k_paths).fit(y, stack)
        out["conventional_omp"] = set(est.center_atoms_) == true_atoms
    return out


def _coarse_rmse_trial(ctx: _Context, snr_db: float, n: int, rng, methods) -> dict:
    cfg, sys = ctx.cfg, ctx.system
    pos = sample_diagonal_positions(
        rng,
        ctx.g_diag,
        cfg.k_paths,
        min_step=resolvable_separation(ctx.lobe),
        sine_bound=OFFGRID_SINE_BOUND,
    )
    angles = sys.grid_rx[pos - 1]
    gains = draw_path_gains(rng, cfg.k_paths)
    paths = [PathParams(g, a, a) for g, a in zip(gains, angles)]

    pilots = make_pilots(cfg.array, n, rng)
    h = synth_sensing_channel(paths, cfg.array)
    y, _ = _noisy(rng, apply_channel(h, pilots.sensing), snr_db)
    stack = build_measurement_stack(sys, pilots, "sensing")

    out = {}
    if "proposed_omp" in methods:
        est = ProposedOMP(sparsity=cfg.k_paths, lobe_radius=cfg.lobe_radius_override).fit(y, stack)
        out["proposed_omp"] = pair_angles(coarse_angles(est, sys)[:, 0], angles) ** 2
    if "conventional_omp" in methods:
        est = ConventionalOMP(sparsity=cfg.k_paths).fit(y, stack)
        out["conventional_omp"] = pair_angles(coarse_angles(est, sys)[:, 0], angles) ** 2
    if "esprit" in methods:
        out["esprit"] = pair_angles(esprit_aoa(y, cfg.k_paths), angles) ** 2
    return out


def _sample_refine_scene(ctx: _Context, n: int, rng):
    """Shared-angle scene draw: one arrival angle set ties both links.

    The shared arrivals keep the same separation floor as the on-grid
    experiments so the echo pursuit that seeds the refinement can actually
    resolve them; departure angles only need the baseline floor because the
    uplink dictionary separates paths in the full angle-pair plane.
    """
    cfg, sys = ctx.cfg, ctx.system
    shared = np.arcsin(
        sample_offgrid_sines(
            rng, cfg.k_paths, ctx.g_diag, min_cells=resolvable_separation(ctx.lobe)
        )
    )
    comm_aods = np.arcsin(sample_offgrid_sines(rng, cfg.k_paths, ctx.g_diag))
    sens_gains = draw_path_gains(rng, cfg.k_paths)
    comm_gains = draw_path_gains(rng, cfg.k_paths)
    sens_paths = [PathParams(g, a, a) for g, a in zip(sens_gains, shared)]
    comm_paths = [PathParams(g, a, d) for g, a, d in zip(comm_gains, shared, comm_aods)]
    pilots = make_pilots(cfg.array, n, rng)
    return shared, sens_paths, comm_paths, pilots


def _carve(y, stack, support: list, new_atoms) -> np.ndarray:
    """Grow the support, least-squares fit it, return the new residual.

    A tiny ridge keeps overlapping neighborhoods from tripping the
    singularity check; the fit itself is only used to clean the maps for
    the next pick, never as an estimate.
    """
    for m in new_atoms:
        if int(m) not in support:
            support.append(int(m))
    cols = stack.columns(support)
    trace = float(np.einsum("nrp,nrp->", cols.conj(), cols).real) / max(cols.shape[0], 1)
    coeffs = weighted_ls(y, cols, ridge=1e-10 * max(trace, np.finfo(float).tiny))
    return y - np.einsum("nrp,np->nr", cols, coeffs)


def _fused_shared_angles(ctx: _Context, y_s, y_c, pilots):
    """Shared-arrival detection for the joint pipeline.

    Both links observe the same arrivals, so each candidate arrival cell is
    scored by the sum of the two links' correlation maps, each divided by
    its own median to put the noise floors on a common scale; the uplink
    map is reduced over departure cells first.  After every pick both
    residuals are carved over the pick's main-lobe neighborhood and the
    cells one lobe around it leave the candidate set; refinement scenes keep paths
    farther apart than that, so the ring only ever hides leakage, never a
    real second arrival.  Returns (arrival angles, departure angles) sorted
    by arrival.
    """
    cfg, sys = ctx.cfg, ctx.system
    g = ctx.g_diag
    stack_s = build_measurement_stack(sys, pilots, "sensing")
    stack_c = build_measurement_stack(sys, pilots, "comm")
    diag_atoms = np.arange(1, g + 1) + g * np.arange(g)
    cells = np.arange(1, g + 1)

    res_s, res_c = y_s, y_c
    sup_s: list[int] = []
    sup_c: list[int] = []
    taken: set = set()
    aoa_cells: list[int] = []
    aod_cells: list[int] = []
    for _ in range(cfg.k_paths):
        c_s = stack_s.correlate(res_s, diag_atoms)
        c_c = stack_c.correlate(res_c).reshape(g, -1, order="F")
        c_c_aoa = c_c.max(axis=1)
        med_s = max(float(np.median(c_s)), np.finfo(float).tiny)
        med_c = max(float(np.median(c_c_aoa)), np.finfo(float).tiny)
        fused = c_s / med_s + c_c_aoa / med_c
        cell = _pick_center(cells, fused, taken)
        if cell is None:
            break
        for d in range(-(ctx.lobe + 1), ctx.lobe + 2):
            taken.add(cell + d)
        aoa_cells.append(cell)
        tx_cell = int(np.argmax(c_c[cell - 1])) + 1
        aod_cells.append(tx_cell)

        sens_atoms = neighborhood(cell + g * (cell - 1), ctx.lobe, g, g)
        comm_atoms = [
            r + g * (t - 1)
            for r in range(max(1, cell - ctx.lobe), min(g, cell + ctx.lobe) + 1)
            for t in range(max(1, tx_cell - ctx.lobe), min(g, tx_cell + ctx.lobe) + 1)
        ]
        res_s = _carve(y_s, stack_s, sup_s, sens_atoms)
        res_c = _carve(y_c, stack_c, sup_c, comm_atoms)

    aoas = sys.grid_rx[np.asarray(aoa_cells, dtype=int) - 1]
    aods = sys.grid_tx[np.asarray(aod_cells, dtype=int) - 1]
    order = np.argsort(aoas, kind="stable")
    return aoas[order], aods[order]


def _coarse_init(ctx: _Context, y_s, y_c, pilots):
    """Initial parameters from the coarse stage.

    Arrival angles come from the grid-restricted pursuit on the echo;
    uplink departure angles come from the distributed pursuit; gains are
    least squares fits over the full pilot stack.  The joint pipeline
    instead seeds the shared angles from the fused two-link detection,
    which is the point of running the two functions together.
    """
    cfg, sys = ctx.cfg, ctx.system
    prop = ProposedOMP(sparsity=cfg.k_paths, lobe_radius=cfg.lobe_radius_override).fit(
        y_s, build_measurement_stack(sys, pilots, "sensing")
    )
    theta = coarse_angles(prop, sys)[:, 0]
    dcs = DCSSOMP(sparsity=cfg.k_paths).fit(y_c, build_measurement_stack(sys, pilots, "comm"))
    comm_pairs = coarse_angles(dcs, sys)

    comm_pilots = pilots.comm_effective
    shared, aods = _fused_shared_angles(ctx, y_s, y_c, pilots)
    sens_init = SageParams(
        sens_gains=least_squares_gains(y_s, pilots.sensing, theta, theta),
        sens_angles=theta.copy(),
    )
    comm_init = SageParams(
        comm_gains=least_squares_gains(y_c, comm_pilots, comm_pairs[:, 0], comm_pairs[:, 1]),
        comm_aoas=comm_pairs[:, 0].copy(),
        comm_aods=comm_pairs[:, 1].copy(),
    )
    joint_init = SageParams(
        comm_gains=least_squares_gains(y_c, comm_pilots, shared, aods),
        comm_aoas=shared.copy(),
        comm_aods=aods.copy(),
        sens_gains=least_squares_gains(y_s, pilots.sensing, shared, shared),
        sens_angles=shared.copy(),
    )
    data = SageData(
        comm_rx=y_c, comm_pilots=comm_pilots,
        sens_rx=y_s, sens_pilots=pilots.sensing,
    )
    return data, {"sage_sens": sens_init, "sage_comm": comm_init, "sage_joint": joint_init}


def _refine_rmse_trial(ctx: _Context, snr_db: float, n: int, rng, methods) -> dict:
    cfg = ctx.cfg
    shared, sens_paths, comm_paths, pilots = _sample_refine_scene(ctx, n, rng)
    h_s = synth_sensing_channel(sens_paths, cfg.array)
    h_c = synth_comm_channel(comm_paths, cfg.array)
    y_s, _ = _noisy(rng, apply_channel(h_s, pilots.sensing), snr_db)
    y_c, _ = _noisy(rng, apply_channel(h_c, pilots.comm_effective), snr_db)

    data, inits = _coarse_init(ctx, y_s, y_c, pilots)
    # The refinement cost sums over subcarriers, so its gradients grow ~n;
    # dividing the steps by n keeps the per-subcarrier step invariant and
    # matches the single-subcarrier defaults at n = 1.
    steps = {k: v / n for k, v in ctx.sage_steps().items()}
    modes = {"sage_joint": "joint", "sage_comm": "comm_only", "sage_sens": "sens_only"}
    out = {}
    for method in methods:
        refiner = SageRefiner(
            mode=modes[method], outer_iters=cfg.sage_outer_iters, step_sizes=steps
        ).fit(data, inits[method])
        if method == "sage_comm":
            estimate = refiner.params_.comm_aoas
        else:
            estimate = refiner.params_.sens_angles
        out[method] = pair_angles(estimate, shared) ** 2
    return out


_TRIAL_FUNCTIONS = {
    "srp": _srp_trial,
    "coarse_rmse": _coarse_rmse_trial,
    "refine_rmse": _refine_rmse_trial,
}

_KIND_METRIC = {"srp": "srp", "coarse_rmse": "rmse_aoa_rad", "refine_rmse": "rmse_aoa_rad"}


# ---------------------------------------------------------------------------
# sweep driver


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list:
    """Run every configured (method, N, SNR) cell and return MetricRecords
    sorted by (method, n_subcarriers, snr_db, metric)."""
    threads = check_positive_int(threads, "threads")
    ctx = _Context(cfg)
    kinds = sorted({k for m in cfg.methods for k in METHOD_EXPERIMENTS[m]}, key=EXPERIMENT_KINDS.get)

    records = []
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for kind in kinds:
            kind_methods = tuple(m for m in cfg.methods if kind in METHOD_EXPERIMENTS[m])
            trial_fn = _TRIAL_FUNCTIONS[kind]
            for n_idx, n in enumerate(cfg.n_subcarriers_list):
                for snr_idx, snr_db in enumerate(cfg.snr_grid_db):

                    def one(trial_idx, _snr=snr_db, _n=n, _si=snr_idx, _ni=n_idx):
                        rng = trial_rng(cfg.seed, kind, _si, _ni, trial_idx)
                        return trial_fn(ctx, _snr, _n, rng, kind_methods)

                    if executor is None:
                        results = [one(t) for t in range(cfg.trials)]
                    else:
                        results = list(executor.map(one, range(cfg.trials)))

                    for method in kind_methods:
                        if kind == "srp":
                            value = srp([r[method] for r in results])
                        else:
                            pooled = np.concatenate([np.atleast_1d(r[method]) for r in results])
                            value = float(np.sqrt(np.mean(pooled)))
                        records.append(
                            MetricRecord(
                                snr_db=snr_db, n_subcarriers=n, method=method,
                                metric=_KIND_METRIC[kind], value=value,
                                trials=cfg.trials, seed=cfg.seed,
                            )
                        )
    finally:
        if executor is not None:
            executor.shutdown()
    records.sort(key=lambda r: (r.method, r.n_subcarriers, r.snr_db, r.metric))
    return records


def write_csv(records, path, header_lines=()) -> None:
    """Write metric records with the fixed header; 9 significant digits, LF."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("snr_db,n_subcarriers,method,metric,value,trials,seed\n")
        for r in records:
            fh.write(
                f"{r.snr_db:.9g},{r.n_subcarriers},{r.method},{r.metric},"
                f"{r.value:.9g},{r.trials},{r.seed}\n"
            )


# ---------------------------------------------------------------------------
# single-scene entry points for the command line


def estimate_scene(cfg: ExperimentConfig) -> dict:
    """Coarse estimation report on one seeded off-grid echo scene."""
    ctx = _Context(cfg)
    snr_db, n = cfg.snr_grid_db[0], cfg.n_subcarriers_list[0]
    rng = trial_rng(cfg.seed, "coarse_rmse", 0, 0, 0)
    sys = ctx.system

    sines = sample_offgrid_sines(rng, cfg.k_paths, ctx.g_diag)
    angles = np.arcsin(sines)
    gains = draw_path_gains(rng, cfg.k_paths)
    paths = [PathParams(g, a, a) for g, a in zip(gains, angles)]
    pilots = make_pilots(cfg.array, n, rng)
    y, noise_var = _noisy(rng, apply_channel(synth_sensing_channel(paths, cfg.array), pilots.sensing), snr_db)
    stack = build_measurement_stack(sys, pilots, "sensing")

    report = {
        "snr_db": snr_db,
        "n_subcarriers": n,
        "noise_var": noise_var,
        "true": {
            "aoa_rad": angles.tolist(),
            "nearest_atoms": [int(nearest_atom(sys, a, a)) for a in angles],
        },
        "methods": {},
    }
    prop = ProposedOMP(sparsity=cfg.k_paths, lobe_radius=cfg.lobe_radius_override).fit(y, stack)
    conv = ConventionalOMP(sparsity=cfg.k_paths).fit(y, stack)
    for name, est in (("proposed_omp", prop), ("conventional_omp", conv)):
        report["methods"][name] = {
            "center_atoms": [int(m) for m in est.center_atoms_],
            "support": [int(m) for m in est.support_],
            "aoa_rad": coarse_angles(est, sys)[:, 0].tolist(),
            "residual_norm": est.residual_norm_,
        }
    report["methods"]["esprit"] = {"aoa_rad": esprit_aoa(y, cfg.k_paths).tolist()}
    return report


def run_refinement(cfg: ExperimentConfig, mode: str = "joint"):
    """One seeded refinement run; returns (truth dict, fitted refiner)."""
    ctx = _Context(cfg)
    snr_db, n = cfg.snr_grid_db[0], cfg.n_subcarriers_list[0]
    rng = trial_rng(cfg.seed, "refine_rmse", 0, 0, 0)
    shared, sens_paths, comm_paths, pilots = _sample_refine_scene(ctx, n, rng)
    y_s, _ = _noisy(rng, apply_channel(synth_sensing_channel(sens_paths, cfg.array), pilots.sensing), snr_db)
    y_c, _ = _noisy(rng, apply_channel(synth_comm_channel(comm_paths, cfg.array), pilots.comm_effective), snr_db)
    data, inits = _coarse_init(ctx, y_s, y_c, pilots)
    method = {"joint": "sage_joint", "comm_only": "sage_comm", "sens_only": "sage_sens"}.get(mode)
    if method is None:
        raise ConfigError(f"unknown sage_mode {mode!r}; expected joint, comm_only, or sens_only")
    steps = {k: v / n for k, v in ctx.sage_steps().items()}
    refiner = SageRefiner(mode=mode, outer_iters=cfg.sage_outer_iters, step_sizes=steps)
    refiner.fit(data, inits[method])
    truth = {
        "shared_aoa_rad": shared.tolist(),
        "comm_aod_rad": [p.aod for p in comm_paths],
        "snr_db": snr_db,
        "n_subcarriers": n,
    }
    return truth, refiner


def crlb_table(cfg: ExperimentConfig) -> list:
    """Angle-bound rows (snr_db, subsystem, path, direct, nuisance-aware)
    on one seeded shared-angle scene, sweeping the noise level."""
    from .channels import ChannelScene
    from .crlb import crlb_compare

    ctx = _Context(cfg)
    n = cfg.n_subcarriers_list[0]
    rng = trial_rng(cfg.seed, "refine_rmse", 0, 0, 0)
    shared, sens_paths, comm_paths, pilots = _sample_refine_scene(ctx, n, rng)
    power_s = mean_entry_power(apply_channel(synth_sensing_channel(sens_paths, cfg.array), pilots.sensing))
    power_c = mean_entry_power(apply_channel(synth_comm_channel(comm_paths, cfg.array), pilots.comm_effective))

    rows = []
    for snr_db in cfg.snr_grid_db:
        scene = ChannelScene(
            sensing_paths=tuple(sens_paths),
            comm_paths=tuple(comm_paths),
            shared_aoa=True,
            n_subcarriers=n,
            noise_var_sensing=snr_to_noise_var(snr_db, power_s),
            noise_var_comm=snr_to_noise_var(snr_db, power_c),
        )
        cmp = crlb_compare(scene, pilots, cfg.array.n_rx)
        for sub in ("shared", "comm", "sens"):
            direct = getattr(cmp, sub)
            nuis = getattr(cmp, sub + "_nuisance")
            for k in range(direct.size):
                rows.append((snr_db, sub, k, float(direct[k]), float(nuis[k])))
    return rows
