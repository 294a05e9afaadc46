import numpy as np
import pytest
from gmpy2 import mpq

import scipy.sparse as sp

from entrysolve import oracle
from entrysolve.core import PrecisionRegimeExceeded, validate_sddm
from entrysolve.cover import build_cover, default_params
from entrysolve.decay import BadEpsilon, NegativeRHS
from entrysolve.solve import (
    CoverMatrixMismatch,
    SolveOptions,
    sddm_solve,
    solve_with_cover,
)
from conftest import dominance_chain, random_sddm


class TestExamples:
    def test_scalar(self):
        L = validate_sddm([[2]], U=2)
        rep = sddm_solve(L, [2], eps=0.1, delta=0.01)
        assert rep.x.values[0] == pytest.approx(1.0, rel=1e-12)
        assert list(rep.A) == [0]

    def test_zero_rhs(self, two_by_two):
        rep = sddm_solve(two_by_two, [0, 0], eps=0.1, delta=0.01)
        assert np.all(rep.x.values == 0.0)
        assert len(rep.A) == 0

    def test_random_instance_entrywise(self):
        L = random_sddm(50, U=100, seed=42)
        b = np.random.default_rng(42).integers(0, 101, 50)
        rep = sddm_solve(L, b, eps=0.1, delta=0.01, seed=42)
        check = oracle.entrywise_check(rep.x, oracle.exact_solve(L, b), 0.1)
        assert check.passed


class TestValidation:
    def test_bad_epsilon(self, two_by_two):
        with pytest.raises(BadEpsilon):
            sddm_solve(two_by_two, [1, 0], eps=1.5, delta=0.01)

    def test_bad_delta(self, two_by_two):
        with pytest.raises(ValueError):
            sddm_solve(two_by_two, [1, 0], eps=0.1, delta=0.0)

    def test_negative_rhs(self, two_by_two):
        with pytest.raises(NegativeRHS):
            sddm_solve(two_by_two, [1, -1], eps=0.1, delta=0.01)

    def test_precision_gate(self):
        L = random_sddm(20, U=100, seed=1)
        with pytest.raises(PrecisionRegimeExceeded):
            sddm_solve(L, np.zeros(20, dtype=int), eps=1e-13, delta=0.01)


class TestSupportInvariant:
    def test_support_matches_A(self):
        L = random_sddm(30, U=10, seed=8)
        b = np.random.default_rng(8).integers(0, 11, 30)
        rep = sddm_solve(L, b, eps=0.1, delta=0.01, seed=8)
        assert np.array_equal(np.flatnonzero(rep.x.values > 0), rep.A.ids)

    def test_totals_recomputable_from_trace(self):
        L = dominance_chain(15, 40)
        b = np.zeros(15, dtype=np.int64)
        b[0] = 40
        rep = sddm_solve(L, b, eps=0.1, delta=0.01, seed=2)
        assert rep.totals["iterations"] == len(rep.trace)
        assert rep.totals["sum_H"] == sum(row.H_size for row in rep.trace)
        assert sum(row.F_size for row in rep.trace) == len(rep.A)


class TestComponents:
    def test_block_diagonal_solved_independently(self):
        L1 = random_sddm(12, U=10, seed=3)
        L2 = dominance_chain(8, 10)
        dense = sp.block_diag((L1.csr, L2.csr)).toarray()
        L = validate_sddm(dense, U=10)
        assert len(L.components()) == 2
        rng = np.random.default_rng(3)
        b = rng.integers(0, 11, 20)
        rep = sddm_solve(L, b, eps=0.1, delta=0.01, seed=3)
        # componentwise oracle comparison
        x1 = oracle.exact_solve(L1, b[:12]).values
        x2 = oracle.exact_solve(L2, b[12:]).values
        check = oracle.entrywise_check(rep.x, oracle.ExactSolution(x1 + x2, "blockdiag"), 0.1)
        assert check.passed
        assert {d["component"] for d in rep.components} == {0, 1}


class TestCoverReuse:
    def _instance(self):
        L = random_sddm(25, U=10, seed=6)
        params = default_params(L.n, L.U, 0.005, r_out_min=16)
        cover = build_cover(L, params, seed=6)
        return L, cover

    def test_reuse_across_rhs(self):
        L, cover = self._instance()
        rng = np.random.default_rng(6)
        for _ in range(4):
            b = rng.integers(0, 11, L.n)
            rep = solve_with_cover(L, b, 0.1, 0.01, cover, seed=6)
            assert oracle.entrywise_check(rep.x, oracle.exact_solve(L, b), 0.1).passed
            assert rep.cover_provenance[0]["source"] == "loaded"

    def test_hash_mismatch(self):
        L, cover = self._instance()
        other = random_sddm(25, U=10, seed=7)
        with pytest.raises(CoverMatrixMismatch):
            solve_with_cover(other, np.zeros(25, dtype=int), 0.1, 0.01, cover)

    def test_determinism_bit_identical(self):
        L, cover = self._instance()
        b = np.random.default_rng(1).integers(0, 11, L.n)
        r1 = solve_with_cover(L, b, 0.1, 0.01, cover, seed=5)
        r2 = solve_with_cover(L, b, 0.1, 0.01, cover, seed=5)
        assert np.array_equal(r1.x.values, r2.x.values)
        r3 = sddm_solve(L, b, 0.1, 0.01, seed=5)
        r4 = sddm_solve(L, b, 0.1, 0.01, seed=5)
        assert np.array_equal(r3.x.values, r4.x.values)


class TestTruncated:
    def test_truncated_T_covers_large_entries(self):
        # solution spans many orders of magnitude; T = 5 must still
        # capture everything above (nU)^-(T+1) ||b||_1
        U = 100
        L = dominance_chain(20, U)
        b = np.zeros(20, dtype=np.int64)
        b[0] = U
        T = 5
        rep = sddm_solve(L, b, eps=0.1, delta=0.01,
                         options=SolveOptions(T=T, allow_small_T=True), seed=4)
        xbar = oracle.exact_solve(L, b).values
        span = float(xbar[0]) / float(xbar[-1])
        assert span >= 1e10
        floor = mpq(oracle.norm1(list(b))) / mpq(20 * U) ** (T + 1)
        covered = set(rep.A.ids.tolist())
        must = {i for i in range(20) if xbar[i] >= floor}
        assert must <= covered
        # and the reported entries are entrywise accurate
        ok = all(
            oracle.entrywise_check([rep.x.values[i]], [xbar[i]], 0.1).passed
            for i in covered
        )
        assert ok

    def test_small_T_needs_flag(self, two_by_two):
        with pytest.raises(Exception):
            sddm_solve(two_by_two, [1, 0], 0.1, 0.01, options=SolveOptions(T=5))
