"""Scikit-learn style transformers around the compression pipelines.

Both estimators treat the input as one wide matrix X of shape (n, d) with
d >> n and learn a weighted column selection; ``transform`` applies that
selection, so ``fit_transform(X)`` is the compressed matrix Y with
``Y Y^T`` spectrally close to ``X X^T``.
"""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import linalg
from .attention import AttentionErrorReport, verify_reduction
from .errors import ContractViolationError
from .leverage import C_CHERNOFF, C_JL_COLS, C_SKETCH_ROWS
from .sparsify import (
    C_BSS,
    EPS_SIGMA_DEFAULT,
    InputMatrix,
    sparsify_deterministic,
    sparsify_randomized,
)


class _BaseAttentionSparsifier(TransformerMixin, BaseEstimator):
    """Shared column-selection mechanics; subclasses run one pipeline."""

    def _validate_x(self, X):
        return check_array(X, dtype=np.float64, accept_sparse="csr",
                           ensure_2d=True)

    def _resolve_radius(self, X):
        if self.radius is not None:
            return float(self.radius)
        measured = linalg.inf_norm(linalg.gram(X))
        if 0.0 < measured < 0.1:
            return measured
        if measured == 0.0:
            return 0.05  # any admissible radius works for the zero matrix
        raise ContractViolationError(
            f"measured Gram radius {measured:g} is outside (0, 0.1); pass an "
            f"explicit radius or rescale the input"
        )

    def _fit_reduction(self, X):
        raise NotImplementedError

    def fit(self, X, y=None):
        """Learn the weighted column selection from X."""
        X = self._validate_x(X)
        reduction = self._fit_reduction(X)
        self.n_features_in_ = X.shape[1]
        self.reduction_ = reduction
        self.selected_indices_ = reduction.selected_indices
        self.weights_ = reduction.weights
        self.m_ = reduction.m
        return self

    def transform(self, X):
        """Apply the learned selection: pick columns and reweight them."""
        check_is_fitted(self, "reduction_")
        X = self._validate_x(X)
        if X.shape[1] != self.n_features_in_:
            raise ContractViolationError(
                f"X has {X.shape[1]} columns, fitted on {self.n_features_in_}"
            )
        if sp.issparse(X):
            cols = np.asarray(X.tocsc()[:, self.selected_indices_].todense())
        else:
            cols = X[:, self.selected_indices_]
        return np.ascontiguousarray(cols * self.weights_[np.newaxis, :])

    def error_report(self, X) -> AttentionErrorReport:
        """Attention error of the fitted reduction against X."""
        check_is_fitted(self, "reduction_")
        X = self._validate_x(X)
        return verify_reduction(X, self.reduction_.data, self.eps)


class RandomizedAttentionSparsifier(_BaseAttentionSparsifier):
    """Leverage-score sampling compressor.

    Samples ``m = ceil(c_chernoff eps^-2 n ln(n/delta))`` columns with
    replacement, proportionally to sketched leverage scores, and reweights
    each by ``1/sqrt(m p_j)``. With probability at least ``1 - delta`` the
    spectral sandwich ``(1-eps) X X^T <= Y Y^T <= (1+eps) X X^T`` holds.

    Parameters
    ----------
    eps : float in (0, 1)
        Target sandwich factor.
    delta : float in (0, 0.1)
        Failure probability budget.
    eps_sigma, delta_sigma : float
        Accuracy and failure budget of the leverage-score stage;
        ``delta_sigma`` defaults to ``delta / 2``.
    c_chernoff, c_sketch_rows, c_jl_cols : float
        Constants behind the sample count and sketch sizes.
    sketch_nnz : int or None
        Nonzeros per sparse-embedding column (derived when None).
    jl_kind : {"gaussian", "ams"}
        Which norm-preserving sketch estimates the row norms.
    radius : float or None
        Declared Gram radius; measured from X when None.
    validate_radius : bool
        Verify the declared radius during fit.
    random_state : int
        Master seed; every internal stream derives from it.

    Attributes
    ----------
    selected_indices_ : ndarray of shape (m,)
    weights_ : ndarray of shape (m,)
    m_ : int
    reduction_ : ReducedMatrix
    """

    def __init__(self, eps=0.5, delta=0.05, eps_sigma=EPS_SIGMA_DEFAULT,
                 delta_sigma=None, c_chernoff=C_CHERNOFF,
                 c_sketch_rows=C_SKETCH_ROWS, c_jl_cols=C_JL_COLS,
                 sketch_nnz=None, jl_kind="gaussian", radius=None,
                 validate_radius=True, random_state=0):
        self.eps = eps
        self.delta = delta
        self.eps_sigma = eps_sigma
        self.delta_sigma = delta_sigma
        self.c_chernoff = c_chernoff
        self.c_sketch_rows = c_sketch_rows
        self.c_jl_cols = c_jl_cols
        self.sketch_nnz = sketch_nnz
        self.jl_kind = jl_kind
        self.radius = radius
        self.validate_radius = validate_radius
        self.random_state = random_state

    def _fit_reduction(self, X):
        if not isinstance(self.random_state, numbers.Integral):
            raise ContractViolationError("random_state must be an integer seed")
        x = InputMatrix(data=X, radius=self._resolve_radius(X),
                        validate_radius=self.validate_radius)
        return sparsify_randomized(
            x, self.eps, self.delta, int(self.random_state),
            eps_sigma=self.eps_sigma, delta_sigma=self.delta_sigma,
            c_chernoff=self.c_chernoff, c_rows=self.c_sketch_rows,
            c_cols=self.c_jl_cols, nnz_per_column=self.sketch_nnz,
            jl_kind=self.jl_kind,
        )


class DeterministicAttentionSparsifier(_BaseAttentionSparsifier):
    """Barrier-selection compressor.

    Whitens the columns of X and runs the deterministic two-sided barrier
    selection, keeping at most ``ceil(c_bss / eps^2) * n`` columns. The
    sandwich holds on every run (not probabilistically) and refitting the
    same bytes reproduces the same output bytes.

    Parameters
    ----------
    eps : float in (0, 1)
        Target sandwich factor.
    c_bss : float
        Selection budget multiplier.
    radius : float or None
        Declared Gram radius; measured from X when None.
    validate_radius : bool
        Verify the declared radius during fit.

    Attributes
    ----------
    selected_indices_ : ndarray of shape (m,)
    weights_ : ndarray of shape (m,)
    m_ : int
    reduction_ : ReducedMatrix
    """

    def __init__(self, eps=0.5, c_bss=C_BSS, radius=None, validate_radius=True):
        self.eps = eps
        self.c_bss = c_bss
        self.radius = radius
        self.validate_radius = validate_radius

    def _fit_reduction(self, X):
        x = InputMatrix(data=X, radius=self._resolve_radius(X),
                        validate_radius=self.validate_radius)
        return sparsify_deterministic(x, self.eps, c_bss=self.c_bss)
