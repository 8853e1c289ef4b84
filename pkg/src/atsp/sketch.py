"""Seeded random sketching transforms.

Three kinds are supported:

* ``sparse-embedding``: every column carries exactly ``nnz_per_column``
  entries of value +-1/sqrt(nnz_per_column), at row positions drawn
  uniformly without replacement (independently per column).
* ``gaussian``: i.i.d. standard normal entries times a scalar ``scale``.
* ``ams``: sign matrix with entry (i, j) equal to h_i(j) in
  {-1/sqrt(out_dim), +1/sqrt(out_dim)}, where each h_i is drawn from a
  4-wise independent family (degree-3 polynomial hashing over the prime
  field 2^61 - 1, sign taken from the low output bit).

Every realized sketch is a pure function of its spec, including the seed.
The realized array always has shape ``(out_dim, in_dim)``; right
application multiplies by its transpose so the output dimension is still
reduced to ``out_dim``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import ContractViolationError
from .rng import substream

KINDS = ("sparse-embedding", "gaussian", "ams")

_M61 = np.uint64((1 << 61) - 1)
_MASK31 = np.uint64((1 << 31) - 1)
_MASK30 = np.uint64((1 << 30) - 1)


@dataclass(frozen=True)
class SketchSpec:
    """Parameters that fully determine a sketch realization."""

    kind: str
    out_dim: int
    in_dim: int
    nnz_per_column: int | None = None
    scale: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolationError(f"unknown sketch kind {self.kind!r}")
        if self.out_dim < 1 or self.in_dim < 1:
            raise ContractViolationError("out_dim and in_dim must be >= 1")
        if self.kind == "sparse-embedding":
            s = self.nnz_per_column
            if s is None or not (1 <= s <= self.out_dim):
                raise ContractViolationError(
                    f"need 1 <= nnz_per_column <= out_dim, got {s}"
                )
        if self.kind == "gaussian":
            if self.scale is None or not (self.scale > 0 and np.isfinite(self.scale)):
                raise ContractViolationError("gaussian sketch needs a positive scale")


@dataclass(frozen=True, eq=False)
class SketchMatrix:
    """A realized sketch: spec plus concrete entries of shape (out, in)."""

    spec: SketchSpec
    matrix: object  # csc_array for sparse-embedding, ndarray otherwise

    def dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return np.asarray(self.matrix.todense(), dtype=np.float64)
        return np.asarray(self.matrix, dtype=np.float64)


def _mulmod_m61(a, b):
    """(a * b) mod (2^61 - 1) for uint64 arrays with a, b < 2^61."""
    a1, a0 = a >> np.uint64(31), a & _MASK31
    b1, b0 = b >> np.uint64(31), b & _MASK31
    hi = a1 * b1
    mid = a1 * b0 + a0 * b1
    lo = a0 * b0
    total = (hi << np.uint64(1)) + (mid >> np.uint64(30)) \
        + ((mid & _MASK30) << np.uint64(31)) + lo
    for _ in range(3):
        total = (total >> np.uint64(61)) + (total & _M61)
    total = np.where(total >= _M61, total - _M61, total)
    return total


def _ams_signs(coeffs, n):
    """Evaluate one degree-3 hash row on 0..n-1 and map the low bit to +-1."""
    j = np.arange(n, dtype=np.uint64)
    h = np.full(n, coeffs[0], dtype=np.uint64)
    for c in coeffs[1:]:
        h = _mulmod_m61(h, j)
        h = h + np.uint64(c)
        h = np.where(h >= _M61, h - _M61, h)
    return np.where((h & np.uint64(1)).astype(bool), 1.0, -1.0)


def make_sketch(spec: SketchSpec) -> SketchMatrix:
    """Realize a sketch from its spec.

    The realization is deterministic in ``spec.seed``. Sparse-embedding
    column positions are drawn uniformly without replacement per column,
    signs uniformly; gaussian entries are ziggurat normals times
    ``spec.scale``; AMS rows come from freshly drawn degree-3 polynomial
    hash functions.
    """
    rng = substream(spec.seed, f"sketch/{spec.kind}")
    b, n = spec.out_dim, spec.in_dim

    if spec.kind == "sparse-embedding":
        s = spec.nnz_per_column
        value = 1.0 / np.sqrt(s)
        rows = np.empty((n, s), dtype=np.int64)
        vals = np.empty((n, s), dtype=np.float64)
        for col in range(n):
            pos = rng.choice(b, size=s, replace=False)
            order = np.argsort(pos, kind="stable")
            rows[col] = pos[order]
            signs = rng.integers(0, 2, size=s) * 2 - 1
            vals[col] = signs * value
        indptr = np.arange(n + 1, dtype=np.int64) * s
        mat = sp.csc_array((vals.ravel(), rows.ravel(), indptr), shape=(b, n))
        return SketchMatrix(spec=spec, matrix=mat)

    if spec.kind == "gaussian":
        mat = spec.scale * rng.standard_normal((b, n))
        return SketchMatrix(spec=spec, matrix=mat)

    # ams
    coeffs = rng.integers(0, int(_M61), size=(b, 4), dtype=np.uint64)
    mat = np.empty((b, n), dtype=np.float64)
    for i in range(b):
        mat[i] = _ams_signs(coeffs[i], n)
    mat /= np.sqrt(b)
    return SketchMatrix(spec=spec, matrix=mat)


def apply_left(sk: SketchMatrix, a) -> np.ndarray:
    """Compute ``S @ a`` where S is the (out, in) realization of ``sk``."""
    rows = a.shape[0]
    if rows != sk.spec.in_dim:
        raise ContractViolationError(
            f"sketch in_dim {sk.spec.in_dim} does not match a.rows {rows}"
        )
    if sp.issparse(sk.matrix):
        out = sk.matrix @ a
        if sp.issparse(out):
            out = np.asarray(out.todense(), dtype=np.float64)
        return np.asarray(out, dtype=np.float64)
    return linalg.matmul(sk.matrix, a if not sp.issparse(a) else np.asarray(a.todense()))


def apply_right(a, sk: SketchMatrix) -> np.ndarray:
    """Compute ``a @ S.T``: apply the sketch to the rows of ``a``."""
    cols = a.shape[1]
    if cols != sk.spec.in_dim:
        raise ContractViolationError(
            f"sketch in_dim {sk.spec.in_dim} does not match a.cols {cols}"
        )
    if sp.issparse(sk.matrix):
        out = (sk.matrix @ np.asarray(a).T).T
        return np.ascontiguousarray(out, dtype=np.float64)
    return linalg.matmul(np.asarray(a), np.ascontiguousarray(sk.matrix.T))
