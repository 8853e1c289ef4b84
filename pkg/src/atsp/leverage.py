"""Leverage scores and reweighted row sampling.

The matrix convention throughout: ``a_rows`` has d rows living in R^n
(d >= n in the intended regime), and the score of row j is
``a_j^T (A^T A)^+ a_j``. Scores lie in [0, 1] and sum to rank(A).

``approx_leverage`` is the sketched estimator: a sparse embedding
compresses the d rows so a QR factor of the compressed matrix whitens the
column space, then a JL sketch estimates all d row norms of ``A R^{-1}`` at
once. ``sample_gram`` realizes the reweighted with-replacement sampling
process whose expectation is exactly ``A^T A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular

from . import linalg
from .errors import ContractViolationError, SketchRankError
from .rng import derive_seed, substream
from .sketch import SketchMatrix, SketchSpec, apply_left, make_sketch

#: Default multiplier for the sparse-embedding row count s1.
C_SKETCH_ROWS = 8.0
#: Default multiplier for the JL column count s2.
C_JL_COLS = 48.0
#: Default multiplier inside the trial-count formula.
C_CHERNOFF = 4.0


@dataclass(frozen=True, eq=False)
class LeverageScores:
    """Per-row scores with their approximation parameters.

    ``n`` is the column dimension of the scored matrix (the ambient space
    of its rows); it feeds the certified oversampling factor downstream.
    """

    scores: np.ndarray
    eps_sigma: float
    delta_sigma: float
    exact: bool
    n: int

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", s)
        if s.ndim != 1:
            raise ContractViolationError("scores must be a vector")
        if np.any(s < 0) or np.any(s > 1.0 + self.eps_sigma + 1e-12):
            raise ContractViolationError("scores must lie in [0, 1 + eps_sigma]")


def exact_leverage(a_rows) -> LeverageScores:
    """Exact leverage scores via the pseudo-inverse of the Gram matrix.

    Rank deficiency is handled by dropping eigenvalues below the global
    relative threshold. Scores are clipped to [0, 1] against round-off, and
    their sum is checked against the numerical rank.
    """
    if sp.issparse(a_rows):
        a_rows = np.asarray(a_rows.todense(), dtype=np.float64)
    a = np.ascontiguousarray(a_rows, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ContractViolationError("need a matrix with at least one row and column")
    d, n = a.shape
    g = linalg.gram(a.T)  # A^T A, n x n
    eig = linalg.sym_eig(g)
    lam = eig.eigenvalues
    thresh = linalg.RANK_TOL * max(float(lam[-1]), 0.0) if lam.size else 0.0
    keep = lam > thresh
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        scores = np.zeros(d)
    else:
        basis = eig.eigenvectors[:, keep] / np.sqrt(lam[keep])[np.newaxis, :]
        proj = linalg.matmul(a, basis)
        scores = np.minimum(np.sum(proj * proj, axis=1), 1.0)
    total = float(np.sum(scores))
    if abs(total - rank) > 1e-8:
        raise ContractViolationError(
            f"exact scores sum to {total!r}, expected rank {rank}"
        )
    return LeverageScores(scores=scores, eps_sigma=0.0, delta_sigma=0.0,
                          exact=True, n=n)


def _sketch_sizes(n, d, eps_sigma, delta_sigma, c_rows, c_cols):
    log_term = math.log(d / delta_sigma)
    s1 = math.ceil(c_rows * eps_sigma ** -2 * n * log_term)
    s2 = math.ceil(c_cols * log_term)
    return s1, s2


def approx_leverage(a_rows, eps_sigma, delta_sigma, seed, *,
                    c_rows=C_SKETCH_ROWS, c_cols=C_JL_COLS,
                    nnz_per_column=None, jl_kind="gaussian") -> LeverageScores:
    """Sketched multiplicative approximation of all leverage scores.

    With probability at least ``1 - delta_sigma`` over the seed, every
    returned score lies within ``(1 +- eps_sigma)`` of the exact one.
    Pipeline: compress rows with a sparse embedding (s1 rows), take the R
    factor of its QR, apply a JL sketch (s2 columns) to ``R^{-1}``, and read
    off the squared row norms of ``A (R^{-1} S2)``. If the compressed matrix
    is rank deficient the sketch is redrawn from a fresh substream, at most
    three times.
    """
    if not 0.0 < eps_sigma < 1.0:
        raise ContractViolationError(f"need 0 < eps_sigma < 1, got {eps_sigma}")
    if not 0.0 < delta_sigma < 1.0:
        raise ContractViolationError(f"need 0 < delta_sigma < 1, got {delta_sigma}")
    if jl_kind not in ("gaussian", "ams"):
        raise ContractViolationError(f"jl_kind must be gaussian or ams, got {jl_kind!r}")
    d, n = a_rows.shape
    s1, s2 = _sketch_sizes(n, d, eps_sigma, delta_sigma, c_rows, c_cols)
    s1 = max(s1, n)
    if nnz_per_column is None:
        nnz_per_column = math.ceil(2.0 / eps_sigma * math.log(d / delta_sigma))
    nnz_per_column = int(min(max(1, nnz_per_column), s1))

    last_diag = None
    for attempt in range(3):
        s1_spec = SketchSpec(kind="sparse-embedding", out_dim=s1, in_dim=d,
                             nnz_per_column=nnz_per_column,
                             seed=derive_seed(seed, f"leverage/s1/attempt{attempt}"))
        m = apply_left(make_sketch(s1_spec), a_rows)
        _, r = linalg.qr_decompose(m)
        diag = np.abs(np.diag(r))
        last_diag = diag
        if diag.size and diag.min() > linalg.RANK_TOL * max(diag.max(), 0.0):
            break
    else:
        raise SketchRankError(
            f"sketched matrix rank deficient after 3 attempts "
            f"(min |R_ii| = {last_diag.min():g})"
        )

    if jl_kind == "gaussian":
        s2_spec = SketchSpec(kind="gaussian", out_dim=s2, in_dim=n,
                             scale=1.0 / math.sqrt(s2),
                             seed=derive_seed(seed, f"leverage/s2/attempt{attempt}"))
    else:
        s2_spec = SketchSpec(kind="ams", out_dim=s2, in_dim=n,
                             seed=derive_seed(seed, f"leverage/s2/attempt{attempt}"))
    s2_right = np.ascontiguousarray(make_sketch(s2_spec).dense().T)  # n x s2
    nmat = solve_triangular(r, s2_right, lower=False)  # R^{-1} S2
    proj = linalg.matmul(a_rows, nmat)  # d x s2
    scores = np.clip(np.sum(proj * proj, axis=1), 0.0, 1.0 + eps_sigma)
    return LeverageScores(scores=scores, eps_sigma=eps_sigma,
                          delta_sigma=delta_sigma, exact=False, n=n)


def build_probabilities(scores: LeverageScores):
    """Sampling distribution proportional to the scores.

    Also returns the largest oversampling factor ``beta`` such that
    ``p_j >= beta * sigma_j / n`` is certified by the multiplicative score
    guarantee: ``beta = n (1 - eps_sigma) / sum(scores)``.
    """
    s = scores.scores
    if np.any(s < 0):
        raise ContractViolationError("scores must be nonnegative")
    total = float(np.sum(s))
    if total <= 0.0:
        raise ContractViolationError("cannot build probabilities from all-zero scores")
    p = s / total
    beta = scores.n * (1.0 - scores.eps_sigma) / total
    return p, beta


def chernoff_trials(eps0, delta0, n, c_chernoff=C_CHERNOFF) -> int:
    """Trial count ``ceil(c * eps0^-2 * n * ln(n / delta0))``."""
    if not 0.0 < eps0 < 1.0:
        raise ContractViolationError(f"need 0 < eps0 < 1, got {eps0}")
    if not 0.0 < delta0 < 0.1:
        raise ContractViolationError(f"need 0 < delta0 < 0.1, got {delta0}")
    if n < 1:
        raise ContractViolationError(f"need n >= 1, got {n}")
    if c_chernoff <= 0:
        raise ContractViolationError("c_chernoff must be positive")
    return math.ceil(c_chernoff * eps0 ** -2 * n * math.log(n / delta0))


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    """A realized with-replacement sampling plan over d rows."""

    probabilities: np.ndarray
    beta: float
    trials: int
    indices: np.ndarray = field(repr=False)
    reweights: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        object.__setattr__(self, "probabilities", p)
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-12:
            raise ContractViolationError("probabilities must be a distribution")
        if np.any(p[self.indices] <= 0):
            raise ContractViolationError("drawn an index with zero probability")

    @classmethod
    def draw(cls, p, beta, trials, seed) -> "SamplingPlan":
        rng = substream(seed, "sample")
        p = np.asarray(p, dtype=np.float64)
        indices = rng.choice(p.size, size=trials, p=p)
        reweights = 1.0 / np.sqrt(trials * p[indices])
        return cls(probabilities=p, beta=beta, trials=trials,
                   indices=indices, reweights=reweights, seed=seed)


def sample_gram(a_rows, plan: SamplingPlan):
    """Sampled Gram estimate ``(1/T) sum (1/p_j) a_j a_j^T`` plus provenance.

    Returns ``(h_tilde, (indices, weights))``. Stacking the rows
    ``weights[t] * a_rows[indices[t]]`` and forming their Gram product
    reproduces ``h_tilde`` bit for bit, because that is how it is computed.
    """
    if sp.issparse(a_rows):
        rows = np.asarray(a_rows.tocsr()[plan.indices].todense(), dtype=np.float64)
    else:
        rows = np.asarray(a_rows, dtype=np.float64)[plan.indices]
    weighted = rows * plan.reweights[:, np.newaxis]
    h_tilde = linalg.gram(np.ascontiguousarray(weighted.T))
    return h_tilde, (plan.indices.copy(), plan.reweights.copy())
