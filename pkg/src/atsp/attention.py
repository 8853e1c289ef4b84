"""Exact symmetric attention and the numerical error certifier.

The attention of a matrix X is ``D^{-1} exp(X X^T)`` where D holds the row
sums of the entrywise exponential. ``verify_reduction`` compares the
attention of an input against the attention of its compression and attaches
the concrete bounds the two-sided spectral sandwich implies: with radius
``r = max|X X^T|`` below 0.1 and the sandwich holding with a factor below
1, every compressed Gram entry stays within ``(1 + eps_star) r``, both
relative exponential errors stay within ``6 r``, and the entrywise
attention error stays within ``12 r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import ContractViolationError

#: Constants in the attention error bound (c1 + c2) * r.
C1 = 6.0
C2 = 6.0

#: Absolute slack for the entrywise Gram bound check.
ENTRY_BOUND_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class AttentionPair:
    """Gram matrix, its entrywise exponential, row sums, and attention."""

    gram: np.ndarray
    exp_gram: np.ndarray
    d_diag: np.ndarray
    attention: np.ndarray

    def __post_init__(self):
        if np.any(self.d_diag <= 0.0):
            raise ContractViolationError("normalization row sums must be positive")
        row_sums = self.attention.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > 1e-12:
            raise ContractViolationError("attention rows must sum to 1")
        if np.any(self.attention <= 0.0):
            raise ContractViolationError("attention entries must be positive")


def attention_matrix(x) -> AttentionPair:
    """Row-normalized entrywise exponential of the Gram matrix of ``x``."""
    if not sp.issparse(x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ContractViolationError("need a matrix with at least one row")
    g = linalg.gram(x)
    e = linalg.entrywise_exp(g)
    d_diag = e.sum(axis=1)
    attention = e / d_diag[:, np.newaxis]
    return AttentionPair(gram=g, exp_gram=e, d_diag=d_diag, attention=attention)


@dataclass(frozen=True, eq=False)
class AttentionErrorReport:
    """Measured errors next to the bounds the sandwich certifies.

    ``bounds_applicable`` is set when the sandwich holds with
    ``eps_star < 1`` and ``r_measured < 0.1``; only then do the lemma-style
    bounds apply. ``bounds_pass`` is None when they do not apply.
    """

    r_measured: float
    sandwich_holds: bool
    eps_star: float
    entry_bound_ok: bool
    exp_rel_err: float
    rowsum_rel_err: float
    attention_inf_err: float
    c1: float = C1
    c2: float = C2

    @property
    def exp_bound(self) -> float:
        return self.c2 * self.r_measured

    @property
    def rowsum_bound(self) -> float:
        return self.c1 * self.r_measured

    @property
    def attention_bound(self) -> float:
        return (self.c1 + self.c2) * self.r_measured

    @property
    def bounds_applicable(self) -> bool:
        return bool(self.sandwich_holds and self.eps_star < 1.0
                    and self.r_measured < 0.1)

    @property
    def bounds_pass(self):
        if not self.bounds_applicable:
            return None
        return bool(
            self.entry_bound_ok
            and self.exp_rel_err <= self.exp_bound
            and self.rowsum_rel_err <= self.rowsum_bound
            and self.attention_inf_err <= self.attention_bound
        )

    def to_dict(self) -> dict:
        eps_star = None if not np.isfinite(self.eps_star) else self.eps_star
        return {
            "r_measured": self.r_measured,
            "sandwich_holds": self.sandwich_holds,
            "eps_star": eps_star,
            "entry_bound_ok": self.entry_bound_ok,
            "exp_rel_err": self.exp_rel_err,
            "exp_bound": self.exp_bound,
            "rowsum_rel_err": self.rowsum_rel_err,
            "rowsum_bound": self.rowsum_bound,
            "attention_inf_err": self.attention_inf_err,
            "attention_bound": self.attention_bound,
            "c1": self.c1,
            "c2": self.c2,
            "bounds_applicable": self.bounds_applicable,
            "bounds_pass": self.bounds_pass,
        }


def _data_of(obj):
    return obj.data if hasattr(obj, "data") else obj


def verify_reduction(x, y, eps) -> AttentionErrorReport:
    """Measure every quantity in the error chain for a compression of x.

    ``x`` and ``y`` may be raw matrices or the pipeline's input/output
    wrappers; they must agree on the row count. All errors are computed
    unconditionally; applicability of the bounds is reported separately.
    """
    xd = _data_of(x)
    yd = _data_of(y)
    if xd.shape[0] != yd.shape[0]:
        raise ContractViolationError(
            f"row counts disagree: {xd.shape[0]} vs {yd.shape[0]}"
        )
    pair_x = attention_matrix(xd)
    pair_y = attention_matrix(yd)

    r = linalg.inf_norm(pair_x.gram)
    holds, eps_star = linalg.psd_sandwich_check(pair_x.gram, pair_y.gram, eps)

    entry_limit = (1.0 + eps_star) * r + ENTRY_BOUND_SLACK
    entry_bound_ok = bool(linalg.inf_norm(pair_y.gram) <= entry_limit)

    exp_rel_err = float(np.max(
        np.abs(pair_x.exp_gram - pair_y.exp_gram)
        / np.minimum(pair_x.exp_gram, pair_y.exp_gram)
    ))
    rowsum_rel_err = float(np.max(
        np.abs(pair_x.d_diag - pair_y.d_diag)
        / np.minimum(pair_x.d_diag, pair_y.d_diag)
    ))
    attention_inf_err = linalg.inf_norm(pair_x.attention - pair_y.attention)

    return AttentionErrorReport(
        r_measured=r,
        sandwich_holds=holds,
        eps_star=eps_star,
        entry_bound_ok=entry_bound_ok,
        exp_rel_err=exp_rel_err,
        rowsum_rel_err=rowsum_rel_err,
        attention_inf_err=attention_inf_err,
    )
