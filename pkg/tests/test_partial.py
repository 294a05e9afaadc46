import numpy as np
import pytest
from gmpy2 import mpq

from entrysolve import oracle
from entrysolve.core import IndexSet, submatrix
from entrysolve.cover import Cover, CoverPair, build_cover, default_params
from entrysolve.decay import init_decay
from entrysolve.partial import (
    CoverGapTooSmall,
    DoubleInsert,
    ExpTracker,
    RemoveAbsent,
    partial_solve,
    required_gap,
)
from entrysolve.solve import SolveOptions, sddm_solve
from conftest import random_sddm, separated_clusters


def toy_cover(n=6):
    pairs = [
        CoverPair(IndexSet([0, 1], n), IndexSet([0, 1, 2], n)),
        CoverPair(IndexSet([2, 3], n), IndexSet([1, 2, 3, 4], n)),
        CoverPair(IndexSet([4, 5], n), IndexSet([3, 4, 5], n)),
        CoverPair(IndexSet([3], n), IndexSet([2, 3, 4], n)),
    ]
    return Cover(pairs, n, r_in=64, r_out=16, alpha=4)


class TestExpTracker:
    def test_fanout_bumps_every_touching_counter(self):
        tr = ExpTracker(toy_cover())
        tr.notify_rhs_positive(3)  # inside W of pairs 1, 2, 3
        assert tr.cnt.tolist() == [0, 1, 1, 1]
        assert tr.positive == {1, 2, 3}

    def test_insert_then_remove_restores(self):
        tr = ExpTracker(toy_cover())
        base = tr.cnt.copy()
        tr.notify_rhs_positive(2)
        tr.notify_removed(2)
        assert np.array_equal(tr.cnt, base)
        assert tr.positive == set()

    def test_double_insert_raises(self):
        tr = ExpTracker(toy_cover())
        tr.notify_rhs_positive(1)
        with pytest.raises(DoubleInsert):
            tr.notify_rhs_positive(1)

    def test_remove_absent_raises(self):
        tr = ExpTracker(toy_cover())
        with pytest.raises(RemoveAbsent):
            tr.notify_removed(1)

    def test_counter_consistency_after_random_ops(self):
        rng = np.random.default_rng(17)
        C = toy_cover()
        tr = ExpTracker(C)
        members = set()
        for _ in range(300):
            u = int(rng.integers(0, 6))
            if u in members:
                tr.notify_removed(u)
                members.discard(u)
            else:
                tr.notify_rhs_positive(u)
                members.add(u)
        expect = [sum(1 for u in members if u in p.W) for p in C.pairs]
        assert tr.cnt.tolist() == expect
        assert tr.positive == {i for i, c in enumerate(expect) if c > 0}


class TestMaterialize:
    def test_empty_positive_set(self):
        tr = ExpTracker(toy_cover())
        assert len(tr.materialize_H(IndexSet.full(6))) == 0

    def test_single_ball(self):
        tr = ExpTracker(toy_cover())
        tr.notify_rhs_positive(0)  # only pair 0's W contains 0
        H = tr.materialize_H(IndexSet([0, 1, 3], 6))
        assert list(H) == [0, 1]

    def test_intersected_with_S(self):
        tr = ExpTracker(toy_cover())
        tr.notify_rhs_positive(3)
        H = tr.materialize_H(IndexSet([2, 4], 6))
        assert list(H) == [2, 4]

    def test_I_always_inside_H_during_runs(self):
        for seed in range(2):
            L = random_sddm(20, U=10, seed=seed + 400)
            b = np.random.default_rng(seed).integers(0, 11, L.n)
            rep = sddm_solve(L, b, 0.2, 0.01,
                             options=SolveOptions(record_states=True), seed=seed)
            for s in rep.states:
                S_ids = np.flatnonzero(s["S_mask"])
                bhat_pos = {int(i) for i in S_ids if s["bhat"][i] > 0}
                assert bhat_pos <= set(s["H"].tolist())


class TestPartialSolve:
    def test_gap_precondition(self):
        L = random_sddm(12, U=10, seed=1)
        C = Cover([CoverPair(IndexSet.full(12), IndexSet.full(12))], 12,
                  r_in=64, r_out=2, alpha=1, matrix_hash=L.content_hash())
        tr = ExpTracker(C)
        tr.notify_rhs_positive(0)
        with pytest.raises(CoverGapTooSmall):
            partial_solve(L, C, IndexSet.full(12), np.ones(12), 1e-9, 0.01, tr)

    def test_required_gap_monotone(self):
        assert required_gap(1e-12, 50, 10) > required_gap(1e-6, 50, 10)

    def test_full_H_equals_plain_solve(self):
        L = random_sddm(15, U=10, seed=2)
        C = Cover([CoverPair(IndexSet.full(15), IndexSet.full(15))], 15,
                  r_in=256, r_out=64, alpha=1)
        tr = ExpTracker(C)
        b = np.zeros(15)
        b[3] = 4.0
        tr.notify_rhs_positive(3)
        res = partial_solve(L, C, IndexSet.full(15), b, 1e-8, 0.01, tr)
        assert len(res.H) == 15
        exact = oracle.exact_solve(L, b).values
        diff = oracle.norm2_sq([mpq(float(v)) - e for v, e in zip(res.x.values, exact)])
        assert float(diff) ** 0.5 <= 1e-8 * float(np.linalg.norm(b))

    def test_zero_rhs(self):
        L = random_sddm(10, U=10, seed=3)
        C = Cover([CoverPair(IndexSet.full(10), IndexSet.full(10))], 10,
                  r_in=256, r_out=64, alpha=1)
        tr = ExpTracker(C)
        res = partial_solve(L, C, IndexSet.full(10), np.zeros(10), 1e-8, 0.01, tr)
        assert np.all(res.x.values == 0.0)

    def test_separated_rhs_stays_local(self):
        # b supported in cluster A: the far cluster is zero-padded and the
        # true omitted entries obey the removal bound, in exact arithmetic
        L = separated_clusters()
        n = L.n
        params = default_params(n, L.U, 0.1, mode="desk", ell=2, B=32, r_out_min=10)
        C = build_cover(L, params, seed=11)
        state = init_decay(L, np.zeros(n, dtype=np.int64), eps=0.1, T=n,
                           allow_small_T=True)
        bhat = np.zeros(n)
        bhat[0], bhat[1] = 3.0, 1.0
        tr = ExpTracker(C)
        tr.notify_rhs_positive(0)
        tr.notify_rhs_positive(1)
        eps_L = 1e-6
        res = partial_solve(L, C, IndexSet.full(n), bhat, eps_L, 0.01, tr)
        far = [v for v in range(n) if v not in res.H]
        if far:
            exact = oracle.exact_solve(L, bhat).values
            omitted_sq = oracle.norm2_sq([exact[v] for v in far])
            bound_sq = mpq(n * L.U) ** (2 * (5 - C.r_out)) * oracle.norm2_sq(list(bhat))
            assert omitted_sq <= bound_sq
            assert all(res.x.values[v] == 0.0 for v in far)
        exact = oracle.exact_solve(L, bhat).values
        diff = oracle.norm2_sq([mpq(float(v)) - e for v, e in zip(res.x.values, exact)])
        assert float(diff) ** 0.5 <= eps_L * float(np.linalg.norm(bhat))

    def test_contract_on_midrun_snapshots(self):
        L = random_sddm(30, U=10, seed=7)
        b = np.random.default_rng(7).integers(0, 11, L.n)
        rep = sddm_solve(L, b, 0.1, 0.01,
                         options=SolveOptions(record_states=True), seed=7)
        assert rep.states
        for s in rep.states[:3]:
            S_ids = np.flatnonzero(s["S_mask"])
            sub = submatrix(L, IndexSet(S_ids, L.n))
            exact = oracle.exact_solve(sub, [float(s["bhat"][i]) for i in S_ids]).values
            diff = oracle.norm2_sq([
                mpq(float(s["xhat"][g])) - e for g, e in zip(S_ids, exact)
            ])
            b_norm = oracle.norm2_sq([float(s["bhat"][i]) for i in S_ids])
            assert diff <= mpq(s["eps_L"]) ** 2 * b_norm

    def test_dwell_bound_over_runs(self):
        for seed in range(2):
            L = random_sddm(24, U=10, seed=seed + 500)
            b = np.random.default_rng(seed).integers(0, 11, L.n)
            rep = sddm_solve(L, b, 0.1, 0.01, seed=seed)
            for detail in rep.components:
                assert detail["max_dwell"] <= detail["r_in"]
                assert detail["sum_H"] <= detail["n"] * detail["r_in"]
