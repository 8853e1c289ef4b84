"""File formats and synthetic instance generation."""

import numpy as np
import pytest
import scipy.sparse as sp

from atsp import linalg
from atsp.data import emit, generate, ingest, read_bin, write_bin
from atsp.errors import ContractViolationError, ParseError


class TestBinaryFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((5, 17))
        path = tmp_path / "x.bin"
        write_bin(path, x)
        back = read_bin(path)
        np.testing.assert_array_equal(back, x)
        assert back.dtype == np.float64

    def test_write_twice_identical_bytes(self, tmp_path):
        x = np.random.default_rng(1).standard_normal((3, 4))
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        write_bin(p1, x)
        write_bin(p2, x)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(ParseError):
            read_bin(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "trunc.bin"
        write_bin(path, np.ones((2, 2)))
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(ParseError) as err:
            read_bin(path)
        assert err.value.byte is not None


class TestCsvFormat:
    def test_zero_matrix(self, tmp_path):
        path = tmp_path / "z.csv"
        path.write_text("0,0\n0,0\n")
        np.testing.assert_array_equal(ingest(path, "csv"), np.zeros((2, 2)))

    def test_round_trip_exact(self, tmp_path):
        x = np.random.default_rng(2).standard_normal((4, 6))
        path = tmp_path / "x.csv"
        emit(path, "csv", x)
        np.testing.assert_array_equal(ingest(path, "csv"), x)

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(ParseError) as err:
            ingest(path, "csv")
        assert err.value.line == 2

    def test_ragged_row_reports_line(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(ParseError) as err:
            ingest(path, "csv")
        assert err.value.line == 2


class TestMatrixMarket:
    def test_identity_coordinate(self, tmp_path):
        path = tmp_path / "eye.mm"
        path.write_text(
            "%%MatrixMarket matrix coordinate real general\n"
            "2 2 2\n"
            "1 1 1.0\n"
            "2 2 1.0\n"
        )
        mat = ingest(path, "mm")
        assert sp.issparse(mat)
        assert mat.nnz == 2
        np.testing.assert_array_equal(np.asarray(mat.todense()), np.eye(2))

    def test_symmetric_mirrors_entries(self, tmp_path):
        path = tmp_path / "sym.mm"
        path.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "% comment line\n"
            "3 3 2\n"
            "2 1 5.0\n"
            "3 3 1.0\n"
        )
        mat = np.asarray(ingest(path, "mm").todense())
        expected = np.zeros((3, 3))
        expected[1, 0] = expected[0, 1] = 5.0
        expected[2, 2] = 1.0
        np.testing.assert_array_equal(mat, expected)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        x = sp.random_array((6, 9), density=0.3, rng=rng).tocsr()
        path = tmp_path / "x.mm"
        emit(path, "mm", x)
        back = ingest(path, "mm")
        np.testing.assert_array_equal(np.asarray(back.todense()),
                                      np.asarray(x.todense()))

    def test_unsupported_field(self, tmp_path):
        path = tmp_path / "c.mm"
        path.write_text("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n")
        with pytest.raises(ParseError) as err:
            ingest(path, "mm")
        assert err.value.line == 1

    def test_out_of_range_index(self, tmp_path):
        path = tmp_path / "oob.mm"
        path.write_text(
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"
        )
        with pytest.raises(ParseError) as err:
            ingest(path, "mm")
        assert err.value.line == 3

    def test_nnz_mismatch(self, tmp_path):
        path = tmp_path / "short.mm"
        path.write_text(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n"
        )
        with pytest.raises(ParseError):
            ingest(path, "mm")


class TestGenerate:
    def test_radius_hits_target(self):
        x = generate(4, 256, 0.05, 1.0, seed=0)
        peak = linalg.inf_norm(linalg.gram(x))
        assert abs(peak - 0.05) <= 1e-9

    def test_density_controls_nnz(self):
        dense = generate(16, 2048, 0.05, 1.0, seed=1)
        sparse = generate(16, 2048, 0.05, 0.01, seed=1)
        ratio = np.count_nonzero(sparse) / np.count_nonzero(dense)
        assert abs(ratio - 0.01) <= 0.01 * 0.2

    def test_determinism(self):
        a = generate(4, 64, 0.03, 0.5, seed=2)
        b = generate(4, 64, 0.03, 0.5, seed=2)
        np.testing.assert_array_equal(a, b)

    def test_rejects_n_above_d(self):
        with pytest.raises(ContractViolationError):
            generate(8, 4, 0.05)

    def test_rejects_bad_radius_or_density(self):
        with pytest.raises(ContractViolationError):
            generate(2, 8, 0.1)
        with pytest.raises(ContractViolationError):
            generate(2, 8, 0.05, density=0.0)

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ContractViolationError):
            emit(tmp_path / "x.npz", "npz", np.eye(2))
        with pytest.raises(ContractViolationError):
            ingest(tmp_path / "x.npz", "npz")
