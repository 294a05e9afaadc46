"""Boundary-expanded partial solves and the incremental per-pair counters
that track which inner balls the active right-hand side touches."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ApproxVector, IndexSet, SddmMatrix, submatrix
from .cover import Cover
from .normwise import NormwiseResult, normwise_solve_scaled


class DoubleInsert(RuntimeError):
    pass


class RemoveAbsent(RuntimeError):
    pass


class CoverGapTooSmall(ValueError):
    """Declared r_out cannot absorb the zero-padding error at this eps_L;
    rebuild the cover with a larger gap or shrink eps_L."""


class ExpTracker:
    """Per-cover-pair counters cnt_i = |W_i ∩ I| with the positive set.

    Insertions and removals fan out through the cover's inverted index;
    materializing H unions the inner balls of positive-counter pairs.
    Single-owner per solve; the cover itself is immutable and shared.
    """

    def __init__(self, cover: Cover):
        self.cover = cover
        self.cnt = np.zeros(len(cover.pairs), dtype=np.int64)
        self.positive: set[int] = set()
        self.in_I = np.zeros(cover.n, dtype=bool)

    @property
    def I_size(self) -> int:
        return int(self.in_I.sum())

    def I_set(self) -> IndexSet:
        return IndexSet.from_mask(self.in_I)

    def __contains__(self, u: int) -> bool:
        return bool(self.in_I[u])

    def notify_rhs_positive(self, u: int) -> None:
        if self.in_I[u]:
            raise DoubleInsert(f"vertex {u} already tracked as positive")
        self.in_I[u] = True
        for pid in self.cover.index[u]:
            self.cnt[pid] += 1
            if self.cnt[pid] == 1:
                self.positive.add(pid)

    def notify_removed(self, u: int) -> None:
        if not self.in_I[u]:
            raise RemoveAbsent(f"vertex {u} was not tracked as positive")
        self.in_I[u] = False
        for pid in self.cover.index[u]:
            self.cnt[pid] -= 1
            if self.cnt[pid] == 0:
                self.positive.discard(pid)

    def materialize_H(self, S: IndexSet) -> IndexSet:
        """Union of inner balls of positive pairs, intersected with S."""
        mask = np.zeros(self.cover.n, dtype=bool)
        for pid in self.positive:
            mask |= self.cover.pairs[pid].V.mask
        mask &= S.mask
        return IndexSet.from_mask(mask)


@dataclass
class PartialSolveResult:
    x: ApproxVector
    solver: NormwiseResult
    H: IndexSet
    nnz_HH: int
    Z: float


def required_gap(eps_L: float, n: int, U: int) -> float:
    """Smallest admissible r_out: 5 + log_{nU}(2 / eps_L)."""
    base = max(n * U, 2)
    return 5.0 + math.log(2.0 / eps_L) / math.log(base)


def partial_solve(L: SddmMatrix, C: Cover, S: IndexSet, bhat: np.ndarray,
                  eps_L: float, delta_L: float,
                  tracker: ExpTracker) -> PartialSolveResult:
    """Solve L_{S,S} x = bhat to within eps_L ||bhat||_2 by restricting the
    system to the boundary-expanded set H and zero-padding the rest.

    The caller keeps the tracker's I equal to the positive support of
    bhat within S; H is materialized here. The declared cover gap must
    satisfy r_out >= 5 + log_{nU}(2/eps_L), otherwise the padding error
    cannot be charged.
    """
    n, U = L.n, L.U
    need = required_gap(eps_L, n, U)
    if C.r_out < need - 1e-9:
        raise CoverGapTooSmall(
            f"r_out = {C.r_out} below required {need:.2f} for eps_L = {eps_L:.3g}"
        )
    H = tracker.materialize_H(S)
    values = np.zeros(n, dtype=np.float64)
    if len(H) == 0:
        empty = NormwiseResult(
            ApproxVector(np.zeros(n), IndexSet.full(n)), 0, True, 0.0, 0.0,
            requested_delta=delta_L,
        )
        return PartialSolveResult(ApproxVector(values, S), empty, H, 0, 0.0)
    sub = submatrix(L, H)
    b_H = bhat[H.ids]
    res = normwise_solve_scaled(sub, b_H, eps_L / 2.0, delta_L)
    values[H.ids] = res.x.values
    return PartialSolveResult(
        ApproxVector(values, S), res, H, sub.m, float(np.abs(b_H).sum())
    )
