"""Kernel-level contracts: products, factorizations, and spectral checks."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from atsp import linalg
from atsp.errors import ContractViolationError


def naive_matmul(a, b):
    """Triple-loop product with left-to-right accumulation per entry."""
    m, k = a.shape
    n = b.shape[1]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


class TestMatmul:
    def test_identity(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal((3, 5))
        np.testing.assert_array_equal(linalg.matmul(np.eye(3), b), b)

    def test_zero(self):
        b = np.random.default_rng(1).standard_normal((4, 2))
        np.testing.assert_array_equal(
            linalg.matmul(np.zeros((3, 4)), b), np.zeros((3, 2))
        )

    def test_matches_triple_loop_oracle_exactly(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        np.testing.assert_array_equal(linalg.matmul(a, b), naive_matmul(a, b))

    def test_large_matches_oracle_exactly(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((7, 300))
        b = rng.standard_normal((300, 5))
        np.testing.assert_array_equal(linalg.matmul(a, b), naive_matmul(a, b))

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolationError):
            linalg.matmul(np.zeros((2, 3)), np.zeros((4, 2)))

    def test_sparse_left_factor(self):
        rng = np.random.default_rng(4)
        a = sp.random_array((6, 9), density=0.4, rng=rng)
        b = rng.standard_normal((9, 3))
        dense = linalg.matmul(np.asarray(a.todense()), b)
        np.testing.assert_allclose(linalg.matmul(a, b), dense, atol=1e-12)

    def test_bit_deterministic_across_thread_counts(self):
        import numba

        rng = np.random.default_rng(5)
        a = rng.standard_normal((32, 512))
        b = rng.standard_normal((512, 32))
        numba.set_num_threads(1)
        first = linalg.matmul(a, b)
        numba.set_num_threads(min(2, numba.config.NUMBA_NUM_THREADS))
        second = linalg.matmul(a, b)
        np.testing.assert_array_equal(first, second)


class TestGram:
    def test_scaled_identity(self):
        np.testing.assert_array_equal(
            linalg.gram(2.0 * np.eye(2)), np.array([[4.0, 0.0], [0.0, 4.0]])
        )

    def test_row_vector(self):
        np.testing.assert_array_equal(
            linalg.gram(np.array([[1.0, 1.0, 1.0]])), np.array([[3.0]])
        )

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((4, 64))
        oracle = naive_matmul(x, x.T.copy())
        assert linalg.inf_norm(linalg.gram(x) - oracle) <= 1e-12

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(7)
        g = linalg.gram(rng.standard_normal((9, 33)))
        np.testing.assert_array_equal(g, g.T)

    def test_sparse_matches_dense(self):
        rng = np.random.default_rng(8)
        x = sp.random_array((5, 40), density=0.3, rng=rng)
        np.testing.assert_allclose(
            linalg.gram(x), linalg.gram(np.asarray(x.todense())), atol=1e-12
        )

    def test_bit_deterministic_across_runs(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((16, 200))
        np.testing.assert_array_equal(linalg.gram(x), linalg.gram(x))

    def test_psd_diagonal_dominates_off_diagonal(self):
        # For PSD B: B_ii * B_jj >= B_ij^2 up to round-off.
        rng = np.random.default_rng(10)
        for _ in range(50):
            n = int(rng.integers(1, 9))
            d = int(rng.integers(n, 4 * n + 1))
            b = linalg.gram(rng.standard_normal((n, d)))
            diag = np.diag(b)
            assert np.all(np.outer(diag, diag) >= b * b - 1e-12)


class TestQrDecompose:
    def test_identity(self):
        q, r = linalg.qr_decompose(np.eye(3))
        np.testing.assert_allclose(q, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(r, np.eye(3), atol=1e-12)

    def test_orthogonal_scaled_columns(self):
        m = np.vstack([np.diag([2.0, 3.0]), np.zeros((3, 2))])
        _, r = linalg.qr_decompose(m)
        np.testing.assert_allclose(r, np.diag([2.0, 3.0]), atol=1e-12)

    def test_residuals(self):
        rng = np.random.default_rng(11)
        m = rng.standard_normal((8, 3))
        q, r = linalg.qr_decompose(m)
        assert linalg.inf_norm(q.T @ q - np.eye(3)) <= 1e-10
        assert linalg.inf_norm(q @ r - m) <= 1e-10 * linalg.inf_norm(m)
        assert np.all(np.diag(r) >= 0.0)
        assert np.allclose(r, np.triu(r))

    def test_wide_input_rejected(self):
        with pytest.raises(ContractViolationError):
            linalg.qr_decompose(np.zeros((2, 3)))

    def test_reconstruction_many_shapes(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            cols = int(rng.integers(1, 65))
            rows = int(rng.integers(cols, 65))
            m = rng.standard_normal((rows, cols))
            q, r = linalg.qr_decompose(m)
            scale = max(1.0, linalg.inf_norm(m))
            assert linalg.inf_norm(q @ r - m) <= 1e-10 * scale
            assert linalg.inf_norm(q.T @ q - np.eye(cols)) <= 1e-10


class TestSymEig:
    def test_diagonal(self):
        eig = linalg.sym_eig(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(eig.eigenvalues, [1.0, 2.0, 3.0], atol=1e-12)

    def test_exchange_matrix(self):
        # Characteristic polynomial of [[0,1],[1,0]] is t^2 - 1.
        eig = linalg.sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(eig.eigenvalues, [-1.0, 1.0], atol=1e-12)

    def test_reconstruction(self):
        rng = np.random.default_rng(13)
        m = rng.standard_normal((6, 6))
        m = 0.5 * (m + m.T)
        eig = linalg.sym_eig(m)
        assert linalg.inf_norm(eig.reconstruct() - m) <= 1e-10
        assert linalg.inf_norm(
            eig.eigenvectors.T @ eig.eigenvectors - np.eye(6)
        ) <= 1e-10

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractViolationError):
            linalg.sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_reconstruction_many_shapes(self):
        rng = np.random.default_rng(14)
        for _ in range(15):
            n = int(rng.integers(1, 65))
            m = rng.standard_normal((n, n))
            m = 0.5 * (m + m.T)
            eig = linalg.sym_eig(m)
            scale = max(1.0, linalg.inf_norm(m))
            assert linalg.inf_norm(eig.reconstruct() - m) <= 1e-10 * scale


class TestPsdSandwichCheck:
    def test_equal_matrices(self):
        rng = np.random.default_rng(15)
        a = linalg.gram(rng.standard_normal((4, 12)))
        holds, eps_star = linalg.psd_sandwich_check(a, a, 0.0)
        assert holds
        assert eps_star == 0.0

    def test_inside_band(self):
        holds, _ = linalg.psd_sandwich_check(np.eye(2), 1.4 * np.eye(2), 0.5)
        assert holds

    def test_outside_band(self):
        holds, eps_star = linalg.psd_sandwich_check(np.eye(2), 1.6 * np.eye(2), 0.5)
        assert not holds
        assert abs(eps_star - 0.6) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolationError):
            linalg.psd_sandwich_check(np.eye(2), np.eye(3), 0.5)

    def test_asymmetric_rejected(self):
        with pytest.raises(ContractViolationError):
            linalg.psd_sandwich_check(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2), 0.5)

    def test_singular_a_with_b_outside_range(self):
        a = np.diag([1.0, 0.0])
        b = np.diag([1.0, 0.5])
        holds, eps_star = linalg.psd_sandwich_check(a, b, 0.9)
        assert not holds
        assert math.isinf(eps_star)

    def test_singular_a_with_b_inside_range(self):
        a = np.diag([2.0, 0.0])
        b = np.diag([2.2, 0.0])
        holds, eps_star = linalg.psd_sandwich_check(a, b, 0.5)
        assert holds
        assert abs(eps_star - 0.1) <= 1e-9

    def test_zero_a(self):
        holds, eps_star = linalg.psd_sandwich_check(
            np.zeros((3, 3)), np.zeros((3, 3)), 0.5
        )
        assert holds
        assert eps_star == 0.0

    def test_diagonal_consequence(self):
        # When the sandwich holds, diagonals obey the same two-sided bound.
        rng = np.random.default_rng(16)
        for _ in range(25):
            n = int(rng.integers(1, 7))
            x = rng.standard_normal((n, 3 * n))
            a = linalg.gram(x)
            b = linalg.gram(x + 0.05 * rng.standard_normal(x.shape))
            eps = float(rng.uniform(0.1, 0.9))
            holds, _ = linalg.psd_sandwich_check(a, b, eps)
            if not holds:
                continue
            tol = 1e-9 * max(1.0, linalg.inf_norm(a))
            da, db = np.diag(a), np.diag(b)
            assert np.all(db >= (1.0 - eps) * da - tol)
            assert np.all(db <= (1.0 + eps) * da + tol)

    def test_eps_star_consistent_with_holds(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(1, 6))
            x = rng.standard_normal((n, 4 * n))
            a = linalg.gram(x)
            b = linalg.gram(x + 0.01 * rng.standard_normal(x.shape))
            holds, eps_star = linalg.psd_sandwich_check(a, b, 0.99)
            if np.isfinite(eps_star):
                again, _ = linalg.psd_sandwich_check(a, b, eps_star + 1e-9)
                assert again


class TestInfNorm:
    def test_zero(self):
        assert linalg.inf_norm(np.zeros((3, 3))) == 0.0

    def test_small_example(self):
        assert linalg.inf_norm(np.array([[-3.0, 2.0], [1.0, 0.0]])) == 3.0

    def test_matches_scan(self):
        rng = np.random.default_rng(18)
        m = rng.standard_normal((7, 9))
        expected = max(abs(v) for row in m for v in row)
        assert linalg.inf_norm(m) == expected


class TestEntrywiseExp:
    def test_zero_matrix(self):
        np.testing.assert_array_equal(
            linalg.entrywise_exp(np.zeros((2, 3))), np.ones((2, 3))
        )

    def test_log_two(self):
        np.testing.assert_allclose(
            linalg.entrywise_exp(np.array([[math.log(2.0)]])), [[2.0]], rtol=1e-15
        )

    def test_small_gram_values(self):
        m = np.array([[0.05, 0.02], [0.02, 0.05]])
        expected = np.array([[math.exp(0.05), math.exp(0.02)],
                             [math.exp(0.02), math.exp(0.05)]])
        np.testing.assert_array_equal(linalg.entrywise_exp(m), expected)

    def test_overflow_guard(self):
        with pytest.raises(ContractViolationError):
            linalg.entrywise_exp(np.array([[701.0]]))


def test_exp_within_twice_x_on_small_interval():
    # |1 - exp(x)| <= 2|x| on [-0.1, 0.1], boundary included.
    rng = np.random.default_rng(19)
    x = rng.uniform(-0.1, 0.1, size=100_000)
    x = np.concatenate([x, [-0.1, 0.1, 0.0]])
    assert np.all(np.abs(1.0 - np.exp(x)) <= 2.0 * np.abs(x) + 1e-12)
