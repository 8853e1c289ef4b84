"""Column compression pipelines: randomized sampling and barrier selection.

Both pipelines take a wide matrix X (n rows, d columns, d >> n) and return
a thin matrix Y whose columns are reweighted columns of X such that
``Y Y^T`` approximates ``X X^T`` in the two-sided spectral sense.

The randomized path samples columns with replacement, proportionally to
approximate leverage scores of ``X^T``. The deterministic path whitens the
columns so their outer products sum to the identity, then runs a two-sided
barrier selection: each step picks one vector and a weight that keep the
running eigenvalues strictly between a rising lower barrier and a rising
upper barrier, certified by the trace potentials ``tr((A - lI)^-1)`` and
``tr((uI - A)^-1)`` never exceeding their initial values.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from threadpoolctl import threadpool_limits

from . import linalg
from .errors import (
    ContractViolationError,
    InternalInvariantError,
    RadiusValidationError,
)
from .leverage import (
    C_CHERNOFF,
    C_JL_COLS,
    C_SKETCH_ROWS,
    SamplingPlan,
    approx_leverage,
    build_probabilities,
    chernoff_trials,
    sample_gram,
)
from .rng import derive_seed

#: Default multiplier for the barrier selection budget (steps per dimension
#: is ``ceil(C_BSS / eps^2)``; the nonzero count is at most that times n).
C_BSS = 9.0

#: Default constant-factor accuracy for the leverage stage of the
#: randomized pipeline.
EPS_SIGMA_DEFAULT = 0.5


def _nnz(data) -> int:
    if sp.issparse(data):
        return int(data.nnz)
    return int(np.count_nonzero(data))


@dataclass(frozen=True, eq=False)
class InputMatrix:
    """A wide input matrix with its declared entrywise Gram radius.

    ``radius`` must lie in (0, 0.1). When ``validate_radius`` is set the
    constructor computes the Gram matrix and rejects inputs whose largest
    absolute Gram entry exceeds ``radius`` (with 1e-9 absolute slack).
    """

    data: object
    radius: float
    validate_radius: bool = True

    def __post_init__(self):
        data = self.data
        if not sp.issparse(data):
            data = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
            object.__setattr__(self, "data", data)
            if not np.all(np.isfinite(data)):
                raise ContractViolationError("input matrix has non-finite entries")
        if data.ndim != 2:
            raise ContractViolationError("input matrix must be 2-dimensional")
        n, d = data.shape
        if not 1 <= n <= d:
            raise ContractViolationError(f"need d >= n >= 1, got n={n}, d={d}")
        if not 0.0 < self.radius < 0.1:
            raise ContractViolationError(
                f"radius must lie in (0, 0.1), got {self.radius}"
            )
        if self.validate_radius:
            g = linalg.gram(data)
            worst = float(np.max(np.abs(g))) if g.size else 0.0
            if worst > self.radius + 1e-9:
                i, j = np.unravel_index(int(np.argmax(np.abs(g))), g.shape)
                raise RadiusValidationError(
                    f"|Gram| entry ({i}, {j}) = {g[i, j]!r} exceeds radius "
                    f"{self.radius}",
                    i=int(i), j=int(j), value=float(g[i, j]),
                )

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def nnz(self) -> int:
        return _nnz(self.data)


@dataclass(frozen=True, eq=False)
class ReducedMatrix:
    """Compressed output: reweighted selected columns plus provenance."""

    data: np.ndarray
    selected_indices: np.ndarray | None
    weights: np.ndarray | None
    method: str
    seed: int | None = None

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise ContractViolationError("reduced matrix must be 2-dimensional")
        if self.method not in ("randomized", "deterministic"):
            raise ContractViolationError(f"unknown method {self.method!r}")
        if (self.selected_indices is None) != (self.weights is None):
            raise ContractViolationError("indices and weights must come together")
        if self.selected_indices is not None:
            idx = np.asarray(self.selected_indices, dtype=np.int64)
            w = np.asarray(self.weights, dtype=np.float64)
            object.__setattr__(self, "selected_indices", idx)
            object.__setattr__(self, "weights", w)
            if idx.shape != (data.shape[1],) or w.shape != (data.shape[1],):
                raise ContractViolationError("provenance length must equal m")
            if np.any(w <= 0):
                raise ContractViolationError("weights must be positive")

    @property
    def m(self) -> int:
        return self.data.shape[1]

    def reconstruct(self, x_data) -> np.ndarray:
        """Rebuild the reduced matrix from the original columns."""
        if self.selected_indices is None:
            raise ContractViolationError("no provenance stored")
        return _weighted_columns(x_data, self.selected_indices, self.weights)


@dataclass
class BssState:
    """Running state of the barrier selection, exposed to step callbacks."""

    a_cur: np.ndarray
    lower: float
    upper: float
    weights: np.ndarray
    step: int


def _weighted_columns(x_data, indices, weights) -> np.ndarray:
    if sp.issparse(x_data):
        cols = np.asarray(x_data.tocsc()[:, indices].todense(), dtype=np.float64)
    else:
        cols = np.asarray(x_data, dtype=np.float64)[:, indices]
    return np.ascontiguousarray(cols * weights[np.newaxis, :])


def whiten(x: InputMatrix):
    """Map the columns of x to vectors whose outer products sum to identity.

    With ``G = X X^T = V diag(lam) V^T`` (eigenvalues above the relative
    rank threshold), returns ``(vectors, basis)`` where column i of
    ``vectors`` is ``lam^{-1/2} V^T x_i`` in R^rank. Rank deficiency just
    shrinks the output dimension.
    """
    g = linalg.gram(x.data)
    eig = linalg.sym_eig(g)
    lam = eig.eigenvalues
    thresh = linalg.RANK_TOL * max(float(lam[-1]), 0.0) if lam.size else 0.0
    keep = lam > thresh
    if not np.any(keep):
        return np.zeros((0, x.d)), eig
    basis = eig.eigenvectors[:, keep] / np.sqrt(lam[keep])[np.newaxis, :]  # n x r
    if sp.issparse(x.data):
        vectors = np.ascontiguousarray(
            np.asarray((x.data.T @ basis)).T
        )
    else:
        vectors = np.ascontiguousarray(linalg.matmul(basis.T, x.data))
    return vectors, eig


def _bss_parameters(n, eps, c_bss):
    steps_per_dim = math.ceil(c_bss / eps ** 2)
    root = math.sqrt(steps_per_dim)
    # Feasible schedule: achieved half-width 2*root/(steps_per_dim + 1) < eps.
    if 2.0 * root / (steps_per_dim + 1.0) > eps:
        raise ContractViolationError(
            f"c_bss={c_bss} too small for eps={eps}: barrier schedule cannot "
            f"certify the requested factor"
        )
    delta_l = 1.0
    delta_u = (root + 1.0) / (root - 1.0)
    eps_l = 1.0 / root
    eps_u = (root - 1.0) / (steps_per_dim + root)
    return steps_per_dim, delta_l, delta_u, eps_l, eps_u


def bss_select(vectors, eps, *, c_bss=C_BSS, step_callback=None) -> np.ndarray:
    """Deterministic weighted subset selection for an isotropic family.

    ``vectors`` holds d columns in R^n with ``sum_i v_i v_i^T = I`` (checked
    to 1e-6). Returns nonnegative weights, at most ``ceil(c_bss/eps^2) * n``
    of them nonzero, such that the weighted outer-product sum is within the
    ``(1 +- eps)`` spectral sandwich of the identity. No randomness anywhere;
    ties are broken toward the lowest column index.
    """
    v = np.ascontiguousarray(np.asarray(vectors, dtype=np.float64))
    if v.ndim != 2:
        raise ContractViolationError("vectors must be a 2-d array of columns")
    n, d = v.shape
    if not 0.0 < eps < 1.0:
        raise ContractViolationError(f"need 0 < eps < 1, got {eps}")
    iso_residual = linalg.inf_norm(linalg.gram(v) - np.eye(n))
    if iso_residual > 1e-6:
        raise ContractViolationError(
            f"vectors are not isotropic: residual {iso_residual:g} > 1e-6"
        )

    steps_per_dim, delta_l, delta_u, eps_l, eps_u = _bss_parameters(n, eps, c_bss)
    total_steps = steps_per_dim * n
    lower = -n / eps_l
    upper = n / eps_u

    weights = np.zeros(d)
    a_cur = np.zeros((n, n))
    nonzero_cols = np.flatnonzero(np.sum(v * v, axis=0) > 0.0)
    if nonzero_cols.size == 0:
        raise ContractViolationError("all candidate vectors are zero")
    vnz = v[:, nonzero_cols]

    for step in range(total_steps):
        lam, q = np.linalg.eigh(a_cur)
        lam_min, lam_max = float(lam[0]), float(lam[-1])
        if not (lower < lam_min and lam_max < upper):
            raise InternalInvariantError(
                f"barrier breach at step {step}: eigenvalues in "
                f"[{lam_min:g}, {lam_max:g}], barriers ({lower:g}, {upper:g})"
            )
        pot_u = float(np.sum(1.0 / (upper - lam)))
        pot_l = float(np.sum(1.0 / (lam - lower)))
        if pot_u > eps_u * (1.0 + 1e-9) or pot_l > eps_l * (1.0 + 1e-9):
            raise InternalInvariantError(
                f"potential grew at step {step}: "
                f"upper {pot_u:g} vs {eps_u:g}, lower {pot_l:g} vs {eps_l:g}"
            )
        if step_callback is not None:
            step_callback(BssState(a_cur=a_cur.copy(), lower=lower, upper=upper,
                                   weights=weights.copy(), step=step))

        upper_next = upper + delta_u
        lower_next = lower + delta_l
        inv_u = 1.0 / (upper_next - lam)
        inv_l = 1.0 / (lam - lower_next)
        dpot_u = pot_u - float(np.sum(inv_u))
        dpot_l = float(np.sum(inv_l)) - pot_l

        z = linalg.matmul(q.T, vnz)
        z2 = z * z
        quad_u1 = inv_u @ z2
        quad_u2 = (inv_u * inv_u) @ z2
        quad_l1 = inv_l @ z2
        quad_l2 = (inv_l * inv_l) @ z2
        cap_u = quad_u2 / dpot_u + quad_u1
        cap_l = quad_l2 / dpot_l - quad_l1

        quotient = cap_l / cap_u
        best = float(np.max(quotient))
        if best < 1.0:
            raise InternalInvariantError(
                f"no admissible vector at step {step} (best margin {best:g})"
            )
        candidates = np.flatnonzero(quotient >= max(best - 1e-12, 1.0))
        pick_local = int(candidates[0])
        pick = int(nonzero_cols[pick_local])
        weight = 2.0 / (cap_u[pick_local] + cap_l[pick_local])

        weights[pick] += weight
        chosen = v[:, pick]
        a_cur += weight * np.outer(chosen, chosen)
        upper, lower = upper_next, lower_next

    lam = np.linalg.eigvalsh(a_cur)
    scale = 2.0 / (float(lam[0]) + float(lam[-1]))
    weights *= scale
    holds, eps_star = linalg.psd_sandwich_check(np.eye(n), scale * a_cur, eps)
    if not holds:
        raise InternalInvariantError(
            f"final sandwich check failed: eps_star {eps_star:g} > eps {eps}"
        )
    return weights


def _zero_reduction(x: InputMatrix, method, seed=None) -> ReducedMatrix:
    # Canonical output for X = 0: one zero column with unit weight.
    return ReducedMatrix(
        data=np.zeros((x.n, 1)),
        selected_indices=np.zeros(1, dtype=np.int64),
        weights=np.ones(1),
        method=method,
        seed=seed,
    )


def sparsify_randomized(x: InputMatrix, eps, delta, seed, *,
                        eps_sigma=EPS_SIGMA_DEFAULT, delta_sigma=None,
                        c_chernoff=C_CHERNOFF, c_rows=C_SKETCH_ROWS,
                        c_cols=C_JL_COLS, nnz_per_column=None,
                        jl_kind="gaussian", timings=None) -> ReducedMatrix:
    """Leverage-score sampling compression.

    Samples ``m = ceil(c_chernoff * eps^-2 * n * ln(n/delta))`` columns of X
    with replacement, proportionally to approximate leverage scores of
    ``X^T`` (estimated at accuracy ``eps_sigma`` and failure budget
    ``delta/2``), each reweighted by ``1/sqrt(m p_j)``. With probability at
    least ``1 - delta`` the output satisfies the ``(1 +- eps)`` spectral
    sandwich against ``X X^T``.
    """
    if not 0.0 < eps < 1.0:
        raise ContractViolationError(f"need 0 < eps < 1, got {eps}")
    if not 0.0 < delta < 0.1:
        raise ContractViolationError(f"need 0 < delta < 0.1, got {delta}")
    if delta_sigma is None:
        delta_sigma = delta / 2.0
    if timings is None:
        timings = {}

    if linalg.inf_norm(linalg.gram(x.data)) == 0.0:
        timings["leverage_ms"] = 0.0
        timings["select_ms"] = 0.0
        return _zero_reduction(x, "randomized", seed)

    a_rows = x.data.T if sp.issparse(x.data) else np.ascontiguousarray(x.data.T)

    t0 = time.perf_counter()
    scores = approx_leverage(a_rows, eps_sigma, delta_sigma,
                             derive_seed(seed, "leverage"),
                             c_rows=c_rows, c_cols=c_cols,
                             nnz_per_column=nnz_per_column, jl_kind=jl_kind)
    timings["leverage_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    p, beta = build_probabilities(scores)
    trials = chernoff_trials(eps, delta, x.n, c_chernoff)
    if trials > x.d:
        raise ContractViolationError(
            f"sample count {trials} exceeds d={x.d}; the with-replacement "
            f"output cannot have m <= d (this pipeline expects d >> n)"
        )
    plan = SamplingPlan.draw(p, beta, trials, derive_seed(seed, "sample"))
    _, (indices, reweights) = sample_gram(a_rows, plan)
    data = _weighted_columns(x.data, indices, reweights)
    timings["select_ms"] = (time.perf_counter() - t0) * 1e3

    return ReducedMatrix(data=data, selected_indices=indices,
                         weights=reweights, method="randomized", seed=seed)


def sparsify_deterministic(x: InputMatrix, eps, *, c_bss=C_BSS,
                           timings=None) -> ReducedMatrix:
    """Whiten, run the barrier selection, and map the weights back.

    Output columns are ``sqrt(w_i) x_i`` for the nonzero weights. The
    ``(1 +- eps)`` sandwich against ``X X^T`` holds on every run, and the
    output is bit-identical across runs and thread counts (all reductions
    in this path run under a single BLAS thread).
    """
    if not 0.0 < eps < 1.0:
        raise ContractViolationError(f"need 0 < eps < 1, got {eps}")
    if timings is None:
        timings = {}

    with threadpool_limits(limits=1):
        if linalg.inf_norm(linalg.gram(x.data)) == 0.0:
            timings["whiten_ms"] = 0.0
            timings["select_ms"] = 0.0
            return _zero_reduction(x, "deterministic")

        t0 = time.perf_counter()
        vectors, _ = whiten(x)
        timings["whiten_ms"] = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        w = bss_select(vectors, eps, c_bss=c_bss)
        indices = np.flatnonzero(w > 0.0)
        weights = np.sqrt(w[indices])
        data = _weighted_columns(x.data, indices, weights)
        timings["select_ms"] = (time.perf_counter() - t0) * 1e3

    return ReducedMatrix(data=data, selected_indices=indices,
                         weights=weights, method="deterministic")
