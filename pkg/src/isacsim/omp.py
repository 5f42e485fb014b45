"""Greedy sparse support recovery on beamspace measurement operators.

Three matching-pursuit variants share one engine:

* ProposedOMP restricts atom selection to the monostatic diagonal of the
  atom grid, then admits the whole main-lobe neighborhood of each selected
  center atom at once, with correlation-proportional weights entering the
  support least squares.
* ConventionalOMP picks one atom per iteration over the full grid with a
  plain least squares.
* DCSSOMP is the distributed variant sharing one support across
  subcarriers; with a single dictionary per subcarrier and a flat channel
  it performs the same steps as ConventionalOMP and is kept as a separate
  entry point for the uplink role (it always runs its full budget).

Atom indices are 1-based flat indices, receive index fastest (see the
beamspace module).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .beamspace import BeamspaceSystem, MeasurementOperator, MeasurementStack, atom_to_angles, diag_index_set
from .exceptions import DegenerateWeightsError, SingularSystemError
from .validation import as_signal_stack, check_nonnegative, check_positive_int

__all__ = [
    "SparseEstimate",
    "correlate_atoms",
    "lobe_radius",
    "neighborhood",
    "neighborhood_weights",
    "weighted_ls",
    "ProposedOMP",
    "ConventionalOMP",
    "DCSSOMP",
    "coarse_angles",
]

_COND_LIMIT = 1e12


@dataclass
class SparseEstimate:
    """Result of a greedy pursuit.

    support:        1-based atom indices in admission order.
    weights:        weight per support atom (latest neighborhood wins);
                    all ones for the unweighted variants.
    coefficients:   (N, |support|) per-subcarrier solution over the support.
    center_atoms:   the argmax atom of each iteration, in order.
    residual_norm:  max over subcarriers of the final residual 2-norm.
    residual_norms: that norm before any admission and after each
                    iteration's refit; non-increasing, since every refit
                    solves least squares over a superset support.
    """

    support: np.ndarray
    weights: np.ndarray
    coefficients: np.ndarray
    center_atoms: list
    residual_norm: float
    residual_norms: list
    n_iterations: int


def _as_stack(operators) -> MeasurementStack:
    """Accept a MeasurementStack, a dense (N, n_rx, G) array, or a list of
    MeasurementOperator; return a MeasurementStack-compatible wrapper."""
    if isinstance(operators, MeasurementStack):
        return operators
    if isinstance(operators, MeasurementOperator):
        operators = [operators]
    if isinstance(operators, (list, tuple)) and operators and isinstance(operators[0], MeasurementOperator):
        dense = np.stack([op.omega for op in operators])
        subsystem = operators[0].subsystem
        return _DenseStack(dense, subsystem)
    arr = np.asarray(operators, dtype=np.complex128)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError("operators must be a MeasurementStack, a dense (N, n_rx, G) array, or MeasurementOperator list")
    return _DenseStack(arr, "sensing")


class _DenseStack:
    """MeasurementStack-compatible view over dense operators (test/oracle path)."""

    def __init__(self, dense: np.ndarray, subsystem: str):
        self._dense = dense
        self.subsystem = subsystem

    @property
    def n_subcarriers(self) -> int:
        return self._dense.shape[0]

    @property
    def n_atoms(self) -> int:
        return self._dense.shape[2]

    def dense(self, n: int) -> np.ndarray:
        return self._dense[n]

    def dense_stack(self) -> np.ndarray:
        return self._dense

    def columns(self, atoms) -> np.ndarray:
        idx = np.asarray(atoms, dtype=int) - 1
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_atoms):
            raise ValueError("atom index out of range")
        return self._dense[:, :, idx]

    def correlate(self, residuals: np.ndarray, candidates=None) -> np.ndarray:
        r = as_signal_stack(residuals, "residuals")
        inner = np.einsum("nrg,nr->ng", self._dense.conj(), r)
        c = np.abs(inner).sum(axis=0)
        if candidates is None:
            return c
        return c[np.asarray(candidates, dtype=int) - 1]


def correlate_atoms(residuals, operators, candidates=None):
    """Summed absolute inner products of the residuals with atom columns.

    Returns (m_max, correlations) where correlations maps each candidate's
    1-based atom index to sum_n |<r[n], column_m[n]>| and m_max attains the
    maximum (ties broken toward the smallest index).
    """
    stack = _as_stack(operators)
    if candidates is None:
        cand = np.arange(1, stack.n_atoms + 1)
    else:
        cand = np.unique(np.asarray(list(candidates), dtype=int))
        if cand.size == 0:
            raise ValueError("candidate set must be non-empty")
    values = stack.correlate(residuals, cand)
    m_max = int(cand[int(np.argmax(values))])  # argmax takes the first max: smallest index
    return m_max, dict(zip(cand.tolist(), values.tolist()))


def lobe_radius(g_rx: int) -> int:
    """Half-width, in diagonal grid steps, of the dictionary main lobe."""
    g_rx = check_positive_int(g_rx, "g_rx")
    return int(np.floor(g_rx / (4.0 * np.pi)))


def neighborhood(m_max: int, radius: int, g_rx: int, g_tx: int) -> np.ndarray:
    """Diagonal atoms within `radius` diagonal steps of a diagonal center atom.

    Steps move by g_rx + 1 in the flat index; entries falling off either end
    of the diagonal are clipped, so the result has at most 2*radius + 1
    atoms, sorted ascending.
    """
    g_rx = check_positive_int(g_rx, "g_rx")
    g_tx = check_positive_int(g_tx, "g_tx")
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    i = (int(m_max) - 1) % g_rx + 1
    j = (int(m_max) - 1) // g_rx + 1
    if i != j or j > g_tx:
        raise ValueError(f"center atom {m_max} is not on the diagonal of a {g_rx} x {g_tx} grid")
    d_max = min(g_rx, g_tx)
    steps = np.arange(-int(radius), int(radius) + 1)
    diag_pos = i + steps
    diag_pos = diag_pos[(diag_pos >= 1) & (diag_pos <= d_max)]
    return diag_pos + g_rx * (diag_pos - 1)


def neighborhood_weights(correlations: dict, atoms) -> dict:
    """Correlation-proportional weights over a neighborhood, summing to one."""
    atoms = list(atoms)
    values = np.array([float(correlations[m]) for m in atoms])
    if np.any(values < 0):
        raise ValueError("correlations must be nonnegative")
    total = values.sum()
    if total <= 0:
        raise DegenerateWeightsError("all correlations in the neighborhood are zero")
    return {m: v / total for m, v in zip(atoms, values)}


def weighted_ls(y, columns, weights=None, ridge: float | None = None) -> np.ndarray:
    """Per-subcarrier weighted least squares over the support columns.

    Solves, for each subcarrier n,

        diag(w) A[n]^H A[n]  h[n] = diag(w) A[n]^H y[n]

    `columns` is (N, n_rx, P), `weights` a length-P strictly positive vector
    or None for plain LS.  An invertible diag(w) multiplies both sides and
    cancels exactly, so the system is solved in its unscaled form; forming
    the row-scaled matrix literally would report a false singularity (and
    lose the solution to roundoff) whenever the weights span many orders of
    magnitude, which routine neighborhood weights do.  The singularity test
    therefore reflects the rank of the support columns themselves.  `ridge`,
    if given, is added to the diagonal of A^H A to lift rank deficiency;
    otherwise a singular system raises SingularSystemError.
    """
    y = as_signal_stack(y, "y")
    a = np.asarray(columns, dtype=np.complex128)
    if a.ndim != 3 or a.shape[0] != y.shape[0] or a.shape[1] != y.shape[1]:
        raise ValueError(f"columns must be (N, n_rx, P) matching y {y.shape}, got {a.shape}")
    p = a.shape[2]
    gram = np.einsum("nrp,nrq->npq", a.conj(), a)
    rhs = np.einsum("nrp,nr->np", a.conj(), y)
    if ridge is not None:
        gram = gram + check_nonnegative(ridge, "ridge") * np.eye(p)[None, :, :]
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (p,):
            raise ValueError(f"weights must have shape ({p},), got {w.shape}")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be strictly positive and finite")
    cond = np.linalg.cond(gram)
    if not np.all(np.isfinite(cond)) or np.max(cond) > _COND_LIMIT:
        raise SingularSystemError(
            f"support normal matrix is numerically singular (cond ~ {np.max(cond):.3g})"
        )
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


def _solve_support(y, cols, weights):
    """LS with the spec'd ridge fallback on rank deficiency."""
    try:
        return weighted_ls(y, cols, weights)
    except SingularSystemError:
        gram_trace = np.einsum("nrp,nrp->", cols.conj(), cols).real / max(cols.shape[0], 1)
        return weighted_ls(y, cols, weights, ridge=1e-10 * float(gram_trace))


def _pick_center(candidates, values, taken: set):
    """Highest-correlation candidate not already in the support (ties to the
    smallest index); None when every candidate is taken."""
    order = np.lexsort((candidates, -values))
    for idx in order:
        m = int(candidates[idx])
        if m not in taken:
            return m
    return None


class _PursuitBase(BaseEstimator):
    """Shared greedy loop; subclasses fix the candidate set and admission rule."""

    def __init__(self, sparsity=2, tolerance=0.0):
        self.sparsity = sparsity
        self.tolerance = tolerance

    def _candidates(self, stack) -> np.ndarray:
        raise NotImplementedError

    def _admit(self, m_max, candidates, values, stack):
        """Return (atoms, weights) admitted for a center atom."""
        raise NotImplementedError

    def fit(self, y, operators):
        """Run the pursuit on a received stack y (N, n_rx) with matching
        per-subcarrier operators; fitted attributes carry the estimate."""
        sparsity = check_positive_int(self.sparsity, "sparsity")
        tolerance = check_nonnegative(self.tolerance, "tolerance")
        y = as_signal_stack(y, "y")
        stack = _as_stack(operators)
        if stack.n_subcarriers != y.shape[0]:
            raise ValueError(
                f"y has {y.shape[0]} subcarriers, operators have {stack.n_subcarriers}"
            )
        candidates = self._candidates(stack)

        support: list[int] = []
        weight_of: dict[int, float] = {}
        centers: list[int] = []
        residual = y.copy()
        coeffs = np.zeros((y.shape[0], 0), dtype=np.complex128)
        iterations = 0
        norms = [float(np.max(np.linalg.norm(residual, axis=1)))]

        for _ in range(sparsity):
            if not np.max(np.linalg.norm(residual, axis=1)) >= tolerance:
                break
            values = stack.correlate(residual, candidates)
            m_max = _pick_center(candidates, values, set(support) | set(centers))
            if m_max is None:
                break
            centers.append(m_max)
            iterations += 1

            atoms, weights = self._admit(m_max, candidates, values, stack)
            for m, w in zip(atoms, weights):
                if m in weight_of:
                    weight_of[m] = w  # overlapping neighborhoods: latest wins
                else:
                    support.append(m)
                    weight_of[m] = w

            cols = stack.columns(support)
            w_vec = np.array([weight_of[m] for m in support])
            coeffs = _solve_support(y, cols, w_vec if self._weighted else None)
            residual = y - np.einsum("nrp,np->nr", cols, coeffs)
            norms.append(float(np.max(np.linalg.norm(residual, axis=1))))

        self.estimate_ = SparseEstimate(
            support=np.array(support, dtype=int),
            weights=np.array([weight_of[m] for m in support]),
            coefficients=coeffs,
            center_atoms=list(centers),
            residual_norm=norms[-1],
            residual_norms=norms,
            n_iterations=iterations,
        )
        self.support_ = self.estimate_.support
        self.weights_ = self.estimate_.weights
        self.coefficients_ = self.estimate_.coefficients
        self.center_atoms_ = self.estimate_.center_atoms
        self.residual_norm_ = self.estimate_.residual_norm
        self.n_iter_ = iterations
        return self


class ProposedOMP(_PursuitBase):
    """Diagonal-constrained pursuit with main-lobe neighborhoods and
    correlation-proportional weights in the support least squares.

    sparsity:    number of center atoms (expected path count).
    tolerance:   residual 2-norm floor; 0 disables early stopping.
    lobe_radius: neighborhood half-width in diagonal steps; None uses
                 floor(g_rx / (4*pi)).
    """

    _weighted = True

    def __init__(self, sparsity=2, tolerance=0.0, lobe_radius=None):
        super().__init__(sparsity=sparsity, tolerance=tolerance)
        self.lobe_radius = lobe_radius

    def _candidates(self, stack) -> np.ndarray:
        return diag_index_set(stack.g_rx, stack.g_tx)

    def _radius(self, stack) -> int:
        if self.lobe_radius is None:
            return lobe_radius(stack.g_rx)
        radius = int(self.lobe_radius)
        if radius < 0:
            raise ValueError(f"lobe_radius must be >= 0, got {self.lobe_radius}")
        return radius

    def _admit(self, m_max, candidates, values, stack):
        atoms = neighborhood(m_max, self._radius(stack), stack.g_rx, stack.g_tx)
        corr = dict(zip(candidates.tolist(), values.tolist()))
        try:
            w = neighborhood_weights(corr, atoms)
        except DegenerateWeightsError:
            w = {m: 1.0 / len(atoms) for m in atoms}
        return list(atoms), [w[m] for m in atoms]


class ConventionalOMP(_PursuitBase):
    """Plain orthogonal matching pursuit over the full atom grid."""

    _weighted = False

    def _candidates(self, stack) -> np.ndarray:
        return np.arange(1, stack.n_atoms + 1)

    def _admit(self, m_max, candidates, values, stack):
        return [m_max], [1.0]


class DCSSOMP(ConventionalOMP):
    """Distributed simultaneous pursuit across subcarriers.

    Atom choice already sums correlations over subcarriers and the support
    is shared, so with one dictionary per subcarrier this runs the exact
    ConventionalOMP steps; it always runs its full sparsity budget
    (tolerance fixed to 0) and degenerates to ConventionalOMP at N = 1.
    """

    def __init__(self, sparsity=2):
        super().__init__(sparsity=sparsity, tolerance=0.0)


def coarse_angles(estimate, sys: BeamspaceSystem) -> np.ndarray:
    """Grid (aoa, aod) pairs of the center atoms, sorted ascending by aoa.

    Accepts a SparseEstimate, a fitted pursuit estimator, or an iterable of
    1-based atom indices; returns an (n_atoms, 2) float array.
    """
    if hasattr(estimate, "center_atoms_"):
        atoms = estimate.center_atoms_
    elif hasattr(estimate, "center_atoms"):
        atoms = estimate.center_atoms
    else:
        atoms = list(estimate)
    pairs = np.array([atom_to_angles(int(m), sys) for m in atoms], dtype=float).reshape(-1, 2)
    return pairs[np.argsort(pairs[:, 0], kind="stable")]
