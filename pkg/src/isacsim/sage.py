"""Off-grid refinement of path parameters by alternating per-path descent.

The estimator cycles over paths; for each path it subtracts every other
path's reconstructed contribution from the observations (the expectation
step) and then takes one gradient step per parameter kind (the
maximization step).  Three modes are supported:

* ``joint``     — the uplink arrival angle and the echo angle are one
                  shared parameter per path, descended on the summed-
                  observation cost; private parameters keep their own
                  link's cost.
* ``comm_only`` — uplink parameters only, against the uplink cost.
* ``sens_only`` — echo parameters only, against the echo cost.

Echo paths are monostatic throughout: one angle drives both the transmit
and receive steering, so the ``sens_aoa`` and ``sens_aod`` parameter kinds
name the same underlying coordinate.

Cost routing per parameter kind (``joint`` mode):

    shared angle (aliases comm_aoa, sens_aoa, sens_aod) -> joint cost
    comm_gain, comm_aod                                 -> uplink cost
    sens_gain                                           -> echo cost

Gain gradients are complex with the convention d = dQ/dRe + j dQ/dIm, so
the descent update is simply ``gain -= step * d``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .arrays import steering, steering_derivative
from .exceptions import DivergenceWarning
from .validation import HALF_PI, as_signal_stack, check_nonnegative, check_positive, check_positive_int

__all__ = [
    "MODES",
    "ANGLE_KINDS",
    "GAIN_KINDS",
    "SHARED_ALIASES",
    "SageParams",
    "SageData",
    "default_step_sizes",
    "sweep_kinds",
    "comm_component",
    "sens_component",
    "comm_model",
    "sens_model",
    "cost_comm",
    "cost_sens",
    "cost_joint",
    "mode_cost",
    "routed_cost",
    "parameter_gradient",
    "params_from_scene",
    "least_squares_gains",
    "SageRefiner",
]

MODES = ("joint", "comm_only", "sens_only")
ANGLE_KINDS = ("comm_aoa", "comm_aod", "sens_aoa", "sens_aod")
GAIN_KINDS = ("comm_gain", "sens_gain")
SHARED_ALIASES = ("shared", "comm_aoa", "sens_aoa", "sens_aod")

_ANGLE_LO = -HALF_PI + 1e-6
_ANGLE_HI = HALF_PI - 1e-6
_MAX_HALVINGS = 30
_DIVERGENCE_PATIENCE = 5


def default_step_sizes(angle: float = 1e-3, gain: float = 1e-2) -> dict:
    """Step-size map keyed by parameter kind."""
    steps = {k: float(angle) for k in ANGLE_KINDS}
    steps.update({k: float(gain) for k in GAIN_KINDS})
    return steps


def sweep_kinds(mode: str) -> tuple:
    """Per-path visit order of the free parameters in a mode.

    The three shared-angle aliases collapse to a single visit in joint
    mode, and the monostatic echo angle is one coordinate in sens_only.
    """
    if mode == "joint":
        return ("sens_gain", "comm_gain", "comm_aod", "shared")
    if mode == "comm_only":
        return ("comm_gain", "comm_aod", "comm_aoa")
    if mode == "sens_only":
        return ("sens_gain", "sens_aoa")
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _angles(values, name: str, k: int | None = None) -> np.ndarray:
    a = np.atleast_1d(np.asarray(values, dtype=float))
    if a.ndim != 1 or a.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if k is not None and a.size != k:
        raise ValueError(f"{name} must have length {k}, got {a.size}")
    if not np.all(np.isfinite(a)) or np.any(a < -HALF_PI) or np.any(a >= HALF_PI):
        raise ValueError(f"{name} must lie in [-pi/2, pi/2)")
    return a


def _gains(values, name: str, k: int | None = None) -> np.ndarray:
    g = np.atleast_1d(np.asarray(values, dtype=np.complex128))
    if g.ndim != 1 or g.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if k is not None and g.size != k:
        raise ValueError(f"{name} must have length {k}, got {g.size}")
    if not np.all(np.isfinite(g)):
        raise ValueError(f"{name} must be finite")
    return g


@dataclass
class SageParams:
    """Per-path parameters of both links.

    Each present field is a length-K array; the echo angle is single
    (monostatic), readable through both ``sens_aoas`` and ``sens_aods``.
    A link's fields may be None when only the other link is refined.
    """

    comm_gains: np.ndarray | None = None
    comm_aoas: np.ndarray | None = None
    comm_aods: np.ndarray | None = None
    sens_gains: np.ndarray | None = None
    sens_angles: np.ndarray | None = None

    def __post_init__(self):
        k = None
        if self.comm_gains is not None or self.comm_aoas is not None or self.comm_aods is not None:
            self.comm_gains = _gains(self.comm_gains, "comm_gains")
            k = self.comm_gains.size
            self.comm_aoas = _angles(self.comm_aoas, "comm_aoas", k)
            self.comm_aods = _angles(self.comm_aods, "comm_aods", k)
        if self.sens_gains is not None or self.sens_angles is not None:
            self.sens_gains = _gains(self.sens_gains, "sens_gains", k)
            self.sens_angles = _angles(self.sens_angles, "sens_angles", self.sens_gains.size)
        if self.comm_gains is None and self.sens_gains is None:
            raise ValueError("at least one link's parameters must be given")

    @property
    def k_paths(self) -> int:
        return self.comm_gains.size if self.comm_gains is not None else self.sens_gains.size

    @property
    def sens_aoas(self):
        return self.sens_angles

    @property
    def sens_aods(self):
        return self.sens_angles

    def copy(self) -> "SageParams":
        def c(a):
            return None if a is None else a.copy()

        return SageParams(
            comm_gains=c(self.comm_gains),
            comm_aoas=c(self.comm_aoas),
            comm_aods=c(self.comm_aods),
            sens_gains=c(self.sens_gains),
            sens_angles=c(self.sens_angles),
        )


@dataclass(frozen=True)
class SageData:
    """Observed stacks and the pilots that produced them.

    comm_pilots are the effective uplink pilots (precoder applied), shape
    (N, n_tx); received stacks are (N, n_rx).  Joint refinement needs both
    links with matching N and n_rx.
    """

    comm_rx: np.ndarray | None = None
    comm_pilots: np.ndarray | None = None
    sens_rx: np.ndarray | None = None
    sens_pilots: np.ndarray | None = None

    def __post_init__(self):
        for rx_name, p_name in (("comm_rx", "comm_pilots"), ("sens_rx", "sens_pilots")):
            rx, p = getattr(self, rx_name), getattr(self, p_name)
            if (rx is None) != (p is None):
                raise ValueError(f"{rx_name} and {p_name} must be given together")
            if rx is not None:
                rx = as_signal_stack(rx, rx_name)
                p = as_signal_stack(p, p_name)
                if p.shape[0] != rx.shape[0]:
                    raise ValueError(f"{p_name} has {p.shape[0]} subcarriers, {rx_name} has {rx.shape[0]}")
                object.__setattr__(self, rx_name, rx)
                object.__setattr__(self, p_name, p)
        if self.comm_rx is None and self.sens_rx is None:
            raise ValueError("at least one link's data must be given")
        if self.comm_rx is not None and self.sens_rx is not None:
            if self.comm_rx.shape != self.sens_rx.shape:
                raise ValueError(
                    f"joint data needs matching stacks, got {self.comm_rx.shape} and {self.sens_rx.shape}"
                )

    @property
    def has_comm(self) -> bool:
        return self.comm_rx is not None

    @property
    def has_sens(self) -> bool:
        return self.sens_rx is not None

    @property
    def n_rx(self) -> int:
        rx = self.comm_rx if self.comm_rx is not None else self.sens_rx
        return rx.shape[1]

    @property
    def n_subcarriers(self) -> int:
        rx = self.comm_rx if self.comm_rx is not None else self.sens_rx
        return rx.shape[0]


# ---------------------------------------------------------------------------
# component models


def comm_component(gain, aoa, aod, pilots, n_rx) -> np.ndarray:
    """One uplink path's noiseless contribution, (N, n_rx)."""
    pilots = as_signal_stack(pilots, "pilots")
    tx = pilots @ steering(aod, pilots.shape[1]).conj()
    return gain * np.outer(tx, steering(aoa, n_rx))


def sens_component(gain, angle, pilots, n_rx) -> np.ndarray:
    """One monostatic echo path's noiseless contribution, (N, n_rx)."""
    pilots = as_signal_stack(pilots, "pilots")
    tx = pilots @ steering(angle, pilots.shape[1]).conj()
    return gain * np.outer(tx, steering(angle, n_rx))


def _comm_d_aoa(gain, aoa, aod, pilots, n_rx):
    tx = pilots @ steering(aod, pilots.shape[1]).conj()
    return gain * np.outer(tx, steering_derivative(aoa, n_rx))


def _comm_d_aod(gain, aoa, aod, pilots, n_rx):
    dtx = pilots @ steering_derivative(aod, pilots.shape[1]).conj()
    return gain * np.outer(dtx, steering(aoa, n_rx))


def _sens_d_angle(gain, angle, pilots, n_rx):
    n_tx = pilots.shape[1]
    tx = pilots @ steering(angle, n_tx).conj()
    dtx = pilots @ steering_derivative(angle, n_tx).conj()
    return gain * (np.outer(dtx, steering(angle, n_rx)) + np.outer(tx, steering_derivative(angle, n_rx)))


def comm_model(params: SageParams, pilots, n_rx) -> np.ndarray:
    """Sum of all uplink path components, (N, n_rx)."""
    pilots = as_signal_stack(pilots, "pilots")
    out = np.zeros((pilots.shape[0], n_rx), dtype=np.complex128)
    for g, aoa, aod in zip(params.comm_gains, params.comm_aoas, params.comm_aods):
        out += comm_component(g, aoa, aod, pilots, n_rx)
    return out


def sens_model(params: SageParams, pilots, n_rx) -> np.ndarray:
    """Sum of all echo path components, (N, n_rx)."""
    pilots = as_signal_stack(pilots, "pilots")
    out = np.zeros((pilots.shape[0], n_rx), dtype=np.complex128)
    for g, th in zip(params.sens_gains, params.sens_angles):
        out += sens_component(g, th, pilots, n_rx)
    return out


# ---------------------------------------------------------------------------
# costs and gradients


def _sqnorm(e: np.ndarray) -> float:
    return float(np.vdot(e, e).real)


def cost_comm(params: SageParams, data: SageData) -> float:
    """Squared residual norm of the uplink observation."""
    return _sqnorm(data.comm_rx - comm_model(params, data.comm_pilots, data.n_rx))


def cost_sens(params: SageParams, data: SageData) -> float:
    """Squared residual norm of the echo observation."""
    return _sqnorm(data.sens_rx - sens_model(params, data.sens_pilots, data.n_rx))


def cost_joint(params: SageParams, data: SageData) -> float:
    """Squared residual norm of the summed observations against the summed
    models; couples the links through the cross term, so it differs from
    cost_comm + cost_sens in general."""
    e_c = data.comm_rx - comm_model(params, data.comm_pilots, data.n_rx)
    e_s = data.sens_rx - sens_model(params, data.sens_pilots, data.n_rx)
    return _sqnorm(e_c + e_s)


def mode_cost(mode: str, params: SageParams, data: SageData) -> float:
    """The total cost a mode descends (and reports in its trace).

    Joint mode descends the decoupled total cost_comm + cost_sens rather
    than cost_joint: the links are observed with independent noise, so
    the summed-observation residual of cost_joint doubles the noise the
    shared angle sees and lets the two links' sensitivities interfere,
    which caps the shared estimate near the better single link.  The
    decoupled total adds the links' information instead, so the tied
    angle genuinely beats both standalone modes once the descent is in
    the right basin.  cost_joint stays available as the summed-
    observation diagnostic.
    """
    if mode == "joint":
        return cost_comm(params, data) + cost_sens(params, data)
    if mode == "comm_only":
        return cost_comm(params, data)
    if mode == "sens_only":
        return cost_sens(params, data)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _route(mode: str, kind: str) -> str:
    """Map (mode, kind) to the cost tag the kind descends: comm, sens, joint."""
    if mode == "comm_only":
        if kind in ("comm_gain", "comm_aoa", "comm_aod"):
            return "comm"
        raise ValueError(f"kind {kind!r} is not refined in mode {mode!r}")
    if mode == "sens_only":
        if kind in ("sens_gain", "sens_aoa", "sens_aod"):
            return "sens"
        raise ValueError(f"kind {kind!r} is not refined in mode {mode!r}")
    if mode == "joint":
        if kind == "comm_gain" or kind == "comm_aod":
            return "comm"
        if kind == "sens_gain":
            return "sens"
        if kind in SHARED_ALIASES:
            return "joint"
        raise ValueError(f"unknown parameter kind {kind!r}")
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def routed_cost(mode: str, kind: str, params: SageParams, data: SageData) -> float:
    """The cost function a parameter kind is descended on in a mode.

    Shared angles in joint mode descend the decoupled total (see
    mode_cost); single-link kinds descend their own link's cost, which
    equals their decoupled-total gradient since the other link's term
    does not depend on them.
    """
    tag = _route(mode, kind)
    if tag == "comm":
        return cost_comm(params, data)
    if tag == "sens":
        return cost_sens(params, data)
    return cost_comm(params, data) + cost_sens(params, data)


def _check_path(path: int, k: int) -> int:
    path = int(path)
    if not 0 <= path < k:
        raise ValueError(f"path index {path} out of range for {k} paths")
    return path


def parameter_gradient(mode: str, kind: str, path: int, params: SageParams, data: SageData):
    """Analytic gradient of the routed cost with respect to one parameter.

    Angles return a real derivative.  Gains return a complex d with
    Re(d) = dQ/dRe(gain) and Im(d) = dQ/dIm(gain), so a descent step is
    ``gain -= step * d``.  In joint mode the shared-angle aliases all
    return the same total derivative of the decoupled total cost.
    """
    tag = _route(mode, kind)
    k = _check_path(path, params.k_paths)
    n_rx = data.n_rx

    e_c = e_s = None
    if tag in ("comm", "joint"):
        e_c = data.comm_rx - comm_model(params, data.comm_pilots, n_rx)
    if tag in ("sens", "joint"):
        e_s = data.sens_rx - sens_model(params, data.sens_pilots, n_rx)

    if tag == "comm":
        g, aoa, aod = params.comm_gains[k], params.comm_aoas[k], params.comm_aods[k]
        if kind == "comm_gain":
            v = comm_component(1.0, aoa, aod, data.comm_pilots, n_rx)
            return -2.0 * np.vdot(v, e_c)
        if kind == "comm_aoa":
            d = _comm_d_aoa(g, aoa, aod, data.comm_pilots, n_rx)
        else:
            d = _comm_d_aod(g, aoa, aod, data.comm_pilots, n_rx)
        return -2.0 * np.vdot(d, e_c).real

    if tag == "sens":
        g, th = params.sens_gains[k], params.sens_angles[k]
        if kind == "sens_gain":
            v = sens_component(1.0, th, data.sens_pilots, n_rx)
            return -2.0 * np.vdot(v, e_s)
        d = _sens_d_angle(g, th, data.sens_pilots, n_rx)
        return -2.0 * np.vdot(d, e_s).real

    # shared angle: each link's sensitivity against its own residual
    d_c = _comm_d_aoa(params.comm_gains[k], params.comm_aoas[k], params.comm_aods[k], data.comm_pilots, n_rx)
    d_s = _sens_d_angle(params.sens_gains[k], params.sens_angles[k], data.sens_pilots, n_rx)
    return -2.0 * (np.vdot(d_c, e_c).real + np.vdot(d_s, e_s).real)


def params_from_scene(scene) -> SageParams:
    """True path parameters of a scene, as a refiner parameter set."""
    return SageParams(
        comm_gains=np.array([p.gain for p in scene.comm_paths]),
        comm_aoas=np.array([p.aoa for p in scene.comm_paths]),
        comm_aods=np.array([p.aod for p in scene.comm_paths]),
        sens_gains=np.array([p.gain for p in scene.sensing_paths]),
        sens_angles=np.array([p.aoa for p in scene.sensing_paths]),
    )


def least_squares_gains(rx, pilots, aoas, aods) -> np.ndarray:
    """Best-fit complex path gains at fixed angles (plain least squares)."""
    rx = as_signal_stack(rx, "rx")
    pilots = as_signal_stack(pilots, "pilots")
    n_rx = rx.shape[1]
    aoas = np.atleast_1d(np.asarray(aoas, dtype=float))
    aods = np.atleast_1d(np.asarray(aods, dtype=float))
    if aoas.shape != aods.shape:
        raise ValueError("aoas and aods must have equal lengths")
    cols = np.stack(
        [comm_component(1.0, aoa, aod, pilots, n_rx).ravel() for aoa, aod in zip(aoas, aods)],
        axis=1,
    )
    return np.linalg.lstsq(cols, rx.ravel(), rcond=None)[0]


# ---------------------------------------------------------------------------
# refinement loop


def _clamp(theta: float) -> float:
    return min(max(theta, _ANGLE_LO), _ANGLE_HI)


class SageRefiner(BaseEstimator):
    """Alternating per-path descent refiner.

    mode:            joint, comm_only, or sens_only.
    outer_iters:     maximum number of full sweeps.
    step_sizes:      optional map kind -> step, merged over the defaults
                     (1e-3 angles, 1e-2 gains); the shared angle uses the
                     comm_aoa entry.
    convergence_tol: early exit when a sweep improves the mode cost by
                     less than tol * max(1, cost).
    backtracking:    halve a step (up to 30 times) until the mode's total
                     cost decreases, rejecting the visit outright if it
                     never does; keeps the cost trace non-increasing.
                     With backtracking off, fixed steps are taken and five
                     consecutive cost increases abort with a
                     DivergenceWarning, returning the best sweep seen.
    """

    def __init__(self, mode="joint", outer_iters=100, step_sizes=None,
                 convergence_tol=1e-10, backtracking=True):
        self.mode = mode
        self.outer_iters = outer_iters
        self.step_sizes = step_sizes
        self.convergence_tol = convergence_tol
        self.backtracking = backtracking

    # -- fitted state: params_, trace_, cost_, n_iter_, converged_

    def _resolved_steps(self) -> dict:
        steps = default_step_sizes()
        if self.step_sizes is not None:
            for kind, value in dict(self.step_sizes).items():
                if kind not in steps:
                    raise ValueError(f"unknown parameter kind {kind!r} in step_sizes")
                steps[kind] = check_positive(value, f"step_sizes[{kind!r}]")
        steps["shared"] = steps["comm_aoa"]
        return steps

    def _validate(self, data: SageData, init: SageParams):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        needs_comm = self.mode in ("joint", "comm_only")
        needs_sens = self.mode in ("joint", "sens_only")
        if needs_comm and (not data.has_comm or init.comm_gains is None):
            raise ValueError(f"mode {self.mode!r} needs uplink data and parameters")
        if needs_sens and (not data.has_sens or init.sens_gains is None):
            raise ValueError(f"mode {self.mode!r} needs echo data and parameters")
        if self.mode == "joint" and not np.array_equal(init.comm_aoas, init.sens_angles):
            raise ValueError("joint mode ties the arrival angles: init.comm_aoas must equal init.sens_angles")

    def fit(self, data: SageData, init: SageParams):
        """Refine `init` against `data`; fitted attributes carry the result."""
        self._validate(data, init)
        outer_iters = check_positive_int(self.outer_iters, "outer_iters")
        tol = check_nonnegative(self.convergence_tol, "convergence_tol")
        steps = self._resolved_steps()
        kinds = sweep_kinds(self.mode)
        params = init.copy()
        k_paths = params.k_paths
        n_rx = data.n_rx

        use_comm = self.mode in ("joint", "comm_only")
        use_sens = self.mode in ("joint", "sens_only")

        def components_comm():
            return [
                comm_component(params.comm_gains[k], params.comm_aoas[k], params.comm_aods[k],
                               data.comm_pilots, n_rx)
                for k in range(k_paths)
            ]

        def components_sens():
            return [
                sens_component(params.sens_gains[k], params.sens_angles[k], data.sens_pilots, n_rx)
                for k in range(k_paths)
            ]

        mu_c = components_comm() if use_comm else None
        mu_s = components_sens() if use_sens else None
        e_c = data.comm_rx - sum(mu_c) if use_comm else None
        e_s = data.sens_rx - sum(mu_s) if use_sens else None

        def active_cost():
            if self.mode == "joint":
                return _sqnorm(e_c) + _sqnorm(e_s)
            return _sqnorm(e_c) if self.mode == "comm_only" else _sqnorm(e_s)

        def gradient(kind, k):
            # mirrors parameter_gradient on the maintained residuals
            tag = _route(self.mode, kind)
            if tag == "comm":
                g, aoa, aod = params.comm_gains[k], params.comm_aoas[k], params.comm_aods[k]
                if kind == "comm_gain":
                    return -2.0 * np.vdot(comm_component(1.0, aoa, aod, data.comm_pilots, n_rx), e_c)
                if kind == "comm_aoa":
                    return -2.0 * np.vdot(_comm_d_aoa(g, aoa, aod, data.comm_pilots, n_rx), e_c).real
                return -2.0 * np.vdot(_comm_d_aod(g, aoa, aod, data.comm_pilots, n_rx), e_c).real
            if tag == "sens":
                g, th = params.sens_gains[k], params.sens_angles[k]
                if kind == "sens_gain":
                    return -2.0 * np.vdot(sens_component(1.0, th, data.sens_pilots, n_rx), e_s)
                return -2.0 * np.vdot(_sens_d_angle(g, th, data.sens_pilots, n_rx), e_s).real
            d_c = _comm_d_aoa(params.comm_gains[k], params.comm_aoas[k], params.comm_aods[k],
                              data.comm_pilots, n_rx)
            d_s = _sens_d_angle(params.sens_gains[k], params.sens_angles[k], data.sens_pilots, n_rx)
            return -2.0 * (np.vdot(d_c, e_c).real + np.vdot(d_s, e_s).real)

        def apply_candidate(kind, k, step, grad):
            """Candidate (params fields, components, residuals) for one step."""
            new_c = new_s = None
            if kind == "comm_gain":
                value = params.comm_gains[k] - step * grad
                new_c = comm_component(value, params.comm_aoas[k], params.comm_aods[k], data.comm_pilots, n_rx)
            elif kind == "comm_aod":
                value = _clamp(params.comm_aods[k] - step * grad)
                new_c = comm_component(params.comm_gains[k], params.comm_aoas[k], value, data.comm_pilots, n_rx)
            elif kind == "comm_aoa":
                value = _clamp(params.comm_aoas[k] - step * grad)
                new_c = comm_component(params.comm_gains[k], value, params.comm_aods[k], data.comm_pilots, n_rx)
            elif kind == "sens_gain":
                value = params.sens_gains[k] - step * grad
                new_s = sens_component(value, params.sens_angles[k], data.sens_pilots, n_rx)
            elif kind in ("sens_aoa", "sens_aod"):
                value = _clamp(params.sens_angles[k] - step * grad)
                new_s = sens_component(params.sens_gains[k], value, data.sens_pilots, n_rx)
            else:  # shared
                value = _clamp(params.comm_aoas[k] - step * grad)
                new_c = comm_component(params.comm_gains[k], value, params.comm_aods[k], data.comm_pilots, n_rx)
                new_s = sens_component(params.sens_gains[k], value, data.sens_pilots, n_rx)
            cand_e_c = e_c + mu_c[k] - new_c if new_c is not None else e_c
            cand_e_s = e_s + mu_s[k] - new_s if new_s is not None else e_s
            return value, new_c, new_s, cand_e_c, cand_e_s

        def store(kind, k, value, new_c, new_s):
            if kind == "comm_gain":
                params.comm_gains[k] = value
            elif kind == "comm_aod":
                params.comm_aods[k] = value
            elif kind == "comm_aoa":
                params.comm_aoas[k] = value
            elif kind == "sens_gain":
                params.sens_gains[k] = value
            elif kind in ("sens_aoa", "sens_aod"):
                params.sens_angles[k] = value
            else:  # shared keeps the tie
                params.comm_aoas[k] = value
                params.sens_angles[k] = value
            if new_c is not None:
                mu_c[k] = new_c
            if new_s is not None:
                mu_s[k] = new_s

        def visit(kind, k):
            nonlocal e_c, e_s
            grad = gradient(kind, k)
            if grad == 0:
                return
            step = steps[kind]
            if not self.backtracking:
                value, new_c, new_s, cand_c, cand_s = apply_candidate(kind, k, step, grad)
                store(kind, k, value, new_c, new_s)
                e_c, e_s = cand_c, cand_s
                return
            current = active_cost()
            for _ in range(_MAX_HALVINGS + 1):
                value, new_c, new_s, cand_c, cand_s = apply_candidate(kind, k, step, grad)
                saved_c, saved_s = e_c, e_s
                e_c, e_s = cand_c, cand_s
                if active_cost() < current:
                    store(kind, k, value, new_c, new_s)
                    return
                e_c, e_s = saved_c, saved_s
                step *= 0.5
            # no step length decreased the cost: reject the visit

        cost = active_cost()
        trace = [(0, self.mode, cost)]
        best_cost, best_params = cost, params.copy()
        prev_cost = cost
        increases = 0
        diverged = False
        converged = False
        n_iter = 0

        for it in range(1, outer_iters + 1):
            for k in range(k_paths):
                for kind in kinds:
                    visit(kind, k)
            # rebuild the reconstructions from the parameters each sweep
            if use_comm:
                mu_c = components_comm()
                e_c = data.comm_rx - sum(mu_c)
            if use_sens:
                mu_s = components_sens()
                e_s = data.sens_rx - sum(mu_s)
            cost = active_cost()
            n_iter = it
            trace.append((it, self.mode, cost))
            if cost < best_cost:
                best_cost, best_params = cost, params.copy()
            if cost > prev_cost:
                increases += 1
                if increases >= _DIVERGENCE_PATIENCE:
                    warnings.warn(
                        f"cost increased for {increases} consecutive sweeps; "
                        f"returning the best parameters seen",
                        DivergenceWarning,
                        stacklevel=2,
                    )
                    params, cost = best_params, best_cost
                    diverged = True
                    break
            else:
                increases = 0
            if abs(prev_cost - cost) <= tol * max(1.0, prev_cost):
                converged = True
                prev_cost = cost
                break
            prev_cost = cost

        self.params_ = params
        self.trace_ = trace
        self.cost_ = float(cost)
        self.n_iter_ = n_iter
        self.converged_ = converged
        self.diverged_ = diverged
        return self
