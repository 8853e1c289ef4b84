"""Dense and sparse matrix kernels with reproducibility guarantees.

Dense products are computed by compiled kernels that accumulate each output
entry sequentially over the inner dimension (parallelism only across output
entries), so identical inputs give identical output bits regardless of run
or thread count. Sparse products go through scipy, whose CSR kernels are
sequential and equally reproducible. Factorizations use LAPACK via numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit, prange

from .errors import ContractViolationError

#: Relative threshold below which a diagonal/eigenvalue counts as zero.
RANK_TOL = 1e-10

#: Entries above this would overflow exp in float64.
EXP_OVERFLOW_LIMIT = 700.0


@njit(parallel=True, cache=True)
def _matmul_kernel(a, b):  # pragma: no cover - compiled
    m, k = a.shape
    n = b.shape[1]
    out = np.empty((m, n))
    for i in prange(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


@njit(parallel=True, cache=True)
def _gram_kernel(x):  # pragma: no cover - compiled
    m, k = x.shape
    out = np.empty((m, m))
    for i in prange(m):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += x[i, t] * x[j, t]
            out[i, j] = acc
    return out


def _as_dense64(m, name="matrix"):
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractViolationError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    return arr


def _check_finite(arr, name="result"):
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b):
    """Matrix product ``a @ b`` with a fixed, deterministic summation order.

    ``a`` may be dense or a scipy sparse matrix; ``b`` must be dense. Same
    input bits always produce the same output bits.
    """
    b = _as_dense64(b, "right factor")
    if sp.issparse(a):
        if a.shape[1] != b.shape[0]:
            raise ContractViolationError(
                f"inner dimensions disagree: {a.shape} x {b.shape}"
            )
        out = a @ b
        return _check_finite(np.asarray(out), "product")
    a = _as_dense64(a, "left factor")
    if a.shape[1] != b.shape[0]:
        raise ContractViolationError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    out = _matmul_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b))
    return _check_finite(out, "product")


def gram(x):
    """Gram matrix ``x @ x.T``, symmetrized by averaging with its transpose."""
    if sp.issparse(x):
        g = np.asarray((x @ x.T).todense(), dtype=np.float64)
    else:
        x = _as_dense64(x, "input")
        g = _gram_kernel(np.ascontiguousarray(x))
    g = 0.5 * (g + g.T)
    return _check_finite(g, "gram matrix")


def inf_norm(m):
    """Maximum absolute entry (0 for an empty matrix)."""
    if sp.issparse(m):
        return 0.0 if m.nnz == 0 else float(abs(m).max())
    m = np.asarray(m, dtype=np.float64)
    return 0.0 if m.size == 0 else float(np.max(np.abs(m)))


def entrywise_exp(m):
    """Entrywise exponential; refuses entries that would overflow float64."""
    m = _as_dense64(m, "input")
    if m.size and np.max(m) > EXP_OVERFLOW_LIMIT:
        raise ContractViolationError(
            f"entry {np.max(m):g} exceeds exp overflow limit {EXP_OVERFLOW_LIMIT:g}"
        )
    return np.exp(m)


def qr_decompose(m):
    """Householder QR with the diagonal of R made nonnegative.

    Requires rows >= cols. Returns ``(q, r)`` with orthonormal columns in
    ``q`` and upper-triangular ``r``. Rank deficiency is not an error here;
    callers detect it from small diagonal entries of ``r`` (relative
    threshold ``RANK_TOL``).
    """
    m = _as_dense64(m, "input")
    if m.shape[0] < m.shape[1]:
        raise ContractViolationError(f"need rows >= cols, got shape {m.shape}")
    q, r = np.linalg.qr(m, mode="reduced")
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs[np.newaxis, :]
    r = r * signs[:, np.newaxis]
    return _check_finite(q, "Q"), _check_finite(r, "R")


@dataclass(frozen=True, eq=False)
class SymEig:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` ascend; ``eigenvectors`` holds the matching orthonormal
    eigenvectors as columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def sym_eig(m):
    """Symmetric eigendecomposition; rejects inputs that are not symmetric."""
    m = _as_dense64(m, "input")
    if m.shape[0] != m.shape[1]:
        raise ContractViolationError(f"input must be square, got shape {m.shape}")
    tol = 1e-12 * max(1.0, inf_norm(m))
    if m.size and np.max(np.abs(m - m.T)) > tol:
        raise ContractViolationError("input is not symmetric within 1e-12")
    w, v = np.linalg.eigh(m)
    return SymEig(eigenvalues=_check_finite(w, "eigenvalues"),
                  eigenvectors=_check_finite(v, "eigenvectors"))


def _check_sym_pair(a, b):
    a = _as_dense64(a, "a")
    b = _as_dense64(b, "b")
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ContractViolationError(f"shape mismatch: {a.shape} vs {b.shape}")
    for name, m in (("a", a), ("b", b)):
        tol = 1e-12 * max(1.0, inf_norm(m))
        if m.size and np.max(np.abs(m - m.T)) > tol:
            raise ContractViolationError(f"{name} is not symmetric")
    return a, b


def psd_sandwich_check(a, b, eps):
    """Check the two-sided spectral bound ``(1-eps) a <= b <= (1+eps) a``.

    ``a`` must be positive semidefinite. Returns ``(holds, eps_star)`` where
    ``holds`` reports whether both ``(1+eps) a - b`` and ``b - (1-eps) a``
    have smallest eigenvalue >= ``-tol`` (``tol = 1e-9 * max|a|``), and
    ``eps_star`` is the smallest factor for which the bound holds. For
    singular ``a`` the comparison is restricted to the range of ``a``; any
    component of ``b`` outside that range beyond ``tol`` makes the check fail
    and ``eps_star`` infinite. Values of ``eps_star`` below 1e-12 are
    reported as exactly 0.
    """
    a, b = _check_sym_pair(a, b)
    tol_psd = 1e-9 * inf_norm(a)
    ev_a = np.linalg.eigvalsh(a) if a.size else np.zeros(0)
    if ev_a.size and ev_a[0] < -max(tol_psd, 0.0):
        raise ContractViolationError("a is not positive semidefinite")

    upper_ok = bool(np.linalg.eigvalsh((1.0 + eps) * a - b)[0] >= -tol_psd)
    lower_ok = bool(np.linalg.eigvalsh(b - (1.0 - eps) * a)[0] >= -tol_psd)
    holds = upper_ok and lower_ok

    eig = sym_eig(a)
    lam = eig.eigenvalues
    thresh = RANK_TOL * max(float(lam[-1]), 0.0) if lam.size else 0.0
    keep = lam > thresh
    if not np.any(keep):
        # a ~ 0: the bound holds only for b ~ 0.
        eps_star = 0.0 if inf_norm(b) <= tol_psd else float("inf")
        return (holds, eps_star)

    vr = eig.eigenvectors[:, keep]
    lam_r = lam[keep]
    if not np.all(keep):
        proj = vr @ vr.T
        residual = b - proj @ b @ proj
        if inf_norm(residual) > tol_psd:
            return (holds, float("inf"))

    scaled = vr / np.sqrt(lam_r)[np.newaxis, :]
    pencil = scaled.T @ b @ scaled
    pencil = 0.5 * (pencil + pencil.T)
    mu = np.linalg.eigvalsh(pencil)
    eps_star = max(float(mu[-1]) - 1.0, 1.0 - float(mu[0]), 0.0)
    if eps_star <= 1e-12:
        eps_star = 0.0
    return (holds, eps_star)
