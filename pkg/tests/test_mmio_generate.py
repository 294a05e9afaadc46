import numpy as np
import pytest

from entrysolve import mmio
from entrysolve.core import SddmValidationError
from entrysolve.generate import InstanceSpec, generate_matrix, generate_rhs
from conftest import random_sddm


class TestMatrixRoundTrip:
    def test_lossless(self, tmp_path):
        L = random_sddm(20, U=10, seed=1)
        path = tmp_path / "m.mtx"
        mmio.write_matrix(path, L)
        back = mmio.read_matrix(path)
        assert back.n == L.n and back.U == L.U
        assert np.array_equal(back.dense(), L.dense())
        assert back.content_hash() == L.content_hash()

    def test_U_comment_round_trips(self, tmp_path):
        # declared bound larger than any entry survives the round trip
        from entrysolve.core import validate_sddm
        L = validate_sddm([[2, -1], [-1, 2]], U=7)
        path = tmp_path / "m.mtx"
        mmio.write_matrix(path, L)
        assert mmio.read_matrix(path).U == 7

    def test_U_inferred_without_comment(self, tmp_path):
        path = tmp_path / "m.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate integer symmetric\n"
            "2 2 3\n1 1 2\n2 2 2\n2 1 -1\n"
        )
        assert mmio.read_matrix(path).U == 2


class TestMatrixParseErrors:
    def _write(self, tmp_path, text):
        path = tmp_path / "bad.mtx"
        path.write_text(text)
        return path

    def test_missing_file(self, tmp_path):
        with pytest.raises(mmio.ParseError):
            mmio.read_matrix(tmp_path / "nope.mtx")

    def test_missing_header(self, tmp_path):
        path = self._write(tmp_path, "2 2 1\n1 1 2\n")
        with pytest.raises(mmio.ParseError):
            mmio.read_matrix(path)

    def test_real_field_rejected(self, tmp_path):
        path = self._write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 2.0\n",
        )
        with pytest.raises(mmio.ParseError):
            mmio.read_matrix(path)

    def test_malformed_size_line(self, tmp_path):
        path = self._write(
            tmp_path, "%%MatrixMarket matrix coordinate integer symmetric\n2 2\n")
        with pytest.raises(mmio.ParseError):
            mmio.read_matrix(path)

    def test_out_of_range_index(self, tmp_path):
        path = self._write(
            tmp_path,
            "%%MatrixMarket matrix coordinate integer symmetric\n2 2 1\n3 1 -1\n",
        )
        with pytest.raises(mmio.ParseError):
            mmio.read_matrix(path)

    def test_upper_triangle_rejected(self, tmp_path):
        path = self._write(
            tmp_path,
            "%%MatrixMarket matrix coordinate integer symmetric\n2 2 1\n1 2 -1\n",
        )
        with pytest.raises(mmio.ParseError):
            mmio.read_matrix(path)

    def test_non_integer_entry(self, tmp_path):
        path = self._write(
            tmp_path,
            "%%MatrixMarket matrix coordinate integer symmetric\n1 1 1\n1 1 2.5\n",
        )
        with pytest.raises(mmio.ParseError):
            mmio.read_matrix(path)

    def test_entry_count_mismatch(self, tmp_path):
        path = self._write(
            tmp_path,
            "%%MatrixMarket matrix coordinate integer symmetric\n2 2 3\n1 1 2\n2 2 2\n",
        )
        with pytest.raises(mmio.ParseError):
            mmio.read_matrix(path)

    def test_validation_still_applies(self, tmp_path):
        # parses fine but fails SDDM validation (positive off-diagonal)
        path = self._write(
            tmp_path,
            "%%MatrixMarket matrix coordinate integer symmetric\n2 2 3\n1 1 2\n2 2 2\n2 1 1\n",
        )
        with pytest.raises(SddmValidationError):
            mmio.read_matrix(path)


class TestVectors:
    def test_round_trip_floats(self, tmp_path):
        path = tmp_path / "v.vec"
        vals = np.array([0.1, 2.0, 3.5e-30, 7.0])
        mmio.write_vector(path, vals)
        assert np.array_equal(mmio.read_vector(path), vals)

    def test_round_trip_ints(self, tmp_path):
        path = tmp_path / "v.vec"
        mmio.write_vector(path, np.array([1, 0, 5]))
        assert np.array_equal(mmio.read_vector(path), [1.0, 0.0, 5.0])

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "v.vec"
        path.write_text("1.0 two 3.0\n")
        with pytest.raises(mmio.ParseError):
            mmio.read_vector(path)


class TestGenerators:
    def test_path_shape(self):
        L = generate_matrix(InstanceSpec(family="path", n=5, U=3, surplus="endpoint"))
        dense = L.dense()
        for i in range(4):
            assert dense[i, i + 1] == -1
        assert dense[0, 2] == 0
        assert L.surplus[0] >= 1  # surplus at an endpoint

    def test_dumbbell_shape(self):
        L = generate_matrix(InstanceSpec(family="dumbbell", n=10, U=10, seed=0))
        dense = L.dense()
        # two dense blocks, single bridge edge
        assert np.all(dense[:5, :5][~np.eye(5, dtype=bool)] < 0)
        assert np.all(dense[5:, 5:][~np.eye(5, dtype=bool)] < 0)
        cross = dense[:5, 5:]
        assert np.count_nonzero(cross) == 1

    def test_determinism(self):
        a = generate_matrix(InstanceSpec(family="random-graph", n=30, U=10, seed=9))
        b = generate_matrix(InstanceSpec(family="random-graph", n=30, U=10, seed=9))
        assert a.content_hash() == b.content_hash()

    @pytest.mark.parametrize("family,n,U", [
        ("path", 12, 2), ("path", 30, 100),
        ("grid", 16, 5), ("grid", 40, 100),
        ("random-graph", 2, 2), ("random-graph", 25, 2), ("random-graph", 60, 100),
        ("dumbbell", 8, 10), ("dumbbell", 20, 100),
        ("expander-ish", 12, 10), ("expander-ish", 50, 100),
    ])
    def test_all_families_validate(self, family, n, U):
        for seed in range(3):
            for surplus in ("scattered", "max", "endpoint"):
                L = generate_matrix(InstanceSpec(
                    family=family, n=n, U=U, surplus=surplus, seed=seed))
                assert L.n == n and L.U == U

    def test_infeasible_raises(self):
        with pytest.raises(ValueError):
            generate_matrix(InstanceSpec(family="grid", n=16, U=4))
        with pytest.raises(ValueError):
            generate_matrix(InstanceSpec(family="dumbbell", n=40, U=10))

    def test_rhs_in_range_and_deterministic(self):
        a = generate_rhs(50, 10, seed=3)
        b = generate_rhs(50, 10, seed=3)
        assert np.array_equal(a, b)
        assert a.min() >= 0 and a.max() <= 10
        sparse = generate_rhs(50, 10, seed=3, density=0.2)
        assert (sparse == 0).sum() > 20
        assert sparse.any()
