"""Threshold-decay outer loop: shrinking active set, power-of-two
thresholds, and incremental right-hand-side and norm maintenance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ApproxVector, IndexSet, SddmMatrix


class BadEpsilon(ValueError):
    pass


class TooFewIterations(ValueError):
    pass


class NegativeRHS(ValueError):
    pass


class NormTracker:
    """Segment tree over [n] maintaining sum and sum-of-squares of the
    per-index contribution b_i + v_i for i still active.

    All maintenance is point assignment followed by re-aggregation of the
    path to the root, so removals never subtract partial sums and no
    cancellation occurs. Relative error of the queried norms stays within
    tree-depth ulps.
    """

    def __init__(self, values: np.ndarray):
        n = len(values)
        size = 1
        while size < max(n, 1):
            size *= 2
        self.n = n
        self.size = size
        self._sum = np.zeros(2 * size, dtype=np.float64)
        self._sq = np.zeros(2 * size, dtype=np.float64)
        vals = np.asarray(values, dtype=np.float64)
        self._sum[size:size + n] = vals
        self._sq[size:size + n] = vals * vals
        for node in range(size - 1, 0, -1):
            self._sum[node] = self._sum[2 * node] + self._sum[2 * node + 1]
            self._sq[node] = self._sq[2 * node] + self._sq[2 * node + 1]

    def assign(self, i: int, value: float) -> None:
        node = self.size + i
        self._sum[node] = value
        self._sq[node] = value * value
        node //= 2
        while node:
            self._sum[node] = self._sum[2 * node] + self._sum[2 * node + 1]
            self._sq[node] = self._sq[2 * node] + self._sq[2 * node + 1]
            node //= 2

    def zero(self, i: int) -> None:
        self.assign(i, 0.0)

    def norms(self) -> tuple[float, float]:
        return float(self._sum[1]), float(math.sqrt(max(self._sq[1], 0.0)))


@dataclass
class DecayState:
    """Mutable run state of one threshold-decay loop.

    Single-owner: a state is mutated sequentially by one loop; distinct
    solves on distinct states may run in parallel.
    """

    L: SddmMatrix
    b: np.ndarray
    eps: float
    T: int
    eps_L: float
    S_mask: np.ndarray
    S_size: int
    x_tilde: np.ndarray
    solved_mask: np.ndarray
    vhat: np.ndarray
    tracker: NormTracker
    t: int = 0
    theta: float = 0.0
    update_count: int = 0
    history: list = field(default_factory=list)

    def S_set(self) -> IndexSet:
        return IndexSet.from_mask(self.S_mask)

    def bhat(self) -> np.ndarray:
        """Current right-hand side b_S + vhat, zero off the active set."""
        out = np.where(self.S_mask, self.b.astype(np.float64) + self.vhat, 0.0)
        return out

    def solution(self) -> ApproxVector:
        return ApproxVector(self.x_tilde.copy(), IndexSet.from_mask(self.solved_mask))


def init_decay(L: SddmMatrix, b, eps: float, T: int | None = None,
               allow_small_T: bool = False) -> DecayState:
    """Fresh state: S = [n], bhat = b, empty solution, norm tracker built.

    eps_L is eps / (64 T (nU)^2). T defaults to n; values below 10 are
    rejected unless allow_small_T is set (truncated-coverage runs).
    """
    if not (0 < eps < 1):
        raise BadEpsilon(f"eps must lie in (0, 1), got {eps}")
    if T is None:
        T = L.n
    if T < 10 and not allow_small_T:
        raise TooFewIterations(f"T = {T} below the minimum of 10")
    if T < 1:
        raise TooFewIterations("T must be at least 1")
    b = np.asarray(b)
    if len(b) != L.n:
        raise ValueError(f"b has length {len(b)}, matrix is {L.n}")
    if not np.all(b == np.floor(b)):
        raise ValueError("b must be integer-valued")
    b = b.astype(np.int64)
    if np.any(b < 0):
        raise NegativeRHS(f"b[{int(np.argmax(b < 0))}] is negative")
    if np.any(b > L.U):
        raise ValueError("b entries must not exceed U")
    nU = L.n * L.U
    eps_L = eps / (64.0 * T * nU * nU)
    return DecayState(
        L=L,
        b=b,
        eps=eps,
        T=int(T),
        eps_L=eps_L,
        S_mask=np.ones(L.n, dtype=bool),
        S_size=L.n,
        x_tilde=np.zeros(L.n, dtype=np.float64),
        solved_mask=np.zeros(L.n, dtype=bool),
        vhat=np.zeros(L.n, dtype=np.float64),
        tracker=NormTracker(b.astype(np.float64)),
    )


def threshold(state: DecayState) -> float:
    """Smallest power of two strictly above ||bhat||_1 / (4 (nU)^2).

    Returns 0 for a zero right-hand side, which terminates the loop.
    """
    norm1, _ = state.tracker.norms()
    operand = norm1 / (4.0 * (state.L.n * state.L.U) ** 2)
    if operand <= 0.0:
        state.theta = 0.0
        return 0.0
    _, exp = math.frexp(operand)
    state.theta = math.ldexp(1.0, exp)
    return state.theta


def extract_large(state: DecayState, xhat: ApproxVector) -> IndexSet:
    """Move entries of xhat at or above the current threshold into the
    solved vector; shrink S accordingly."""
    support = xhat.support.ids
    vals = xhat.values[support]
    picked = support[vals >= state.theta]
    F = IndexSet(picked, state.L.n)
    if len(F):
        state.S_mask[F.ids] = False
        state.S_size -= len(F)
        state.x_tilde[F.ids] = xhat.values[F.ids]
        state.solved_mask[F.ids] = True
        for i in F.ids:
            state.tracker.zero(int(i))
            state.update_count += 1
    return F


def update_rhs(state: DecayState, F: IndexSet, xhat: ApproxVector) -> np.ndarray:
    """Fold the solved entries into the right-hand side.

    vhat_j += -L_{j,f} xhat_f over edges from F into the surviving set;
    every term is a nonnegative addition. Returns the indices whose bhat
    entry transitioned from zero to positive.
    """
    if len(F) == 0:
        return np.empty(0, dtype=np.int64)
    L = state.L
    csr = L.csr
    newly_positive = []
    for f in F.ids:
        f = int(f)
        xf = float(xhat.values[f])
        lo, hi = csr.indptr[f], csr.indptr[f + 1]
        for j, v in zip(csr.indices[lo:hi], csr.data[lo:hi]):
            j = int(j)
            if j == f or not state.S_mask[j]:
                continue
            before = state.b[j] + state.vhat[j]
            state.vhat[j] += (-int(v)) * xf
            state.update_count += 1
            after = state.b[j] + state.vhat[j]
            state.tracker.assign(j, after)
            if before == 0.0 and after > 0.0:
                newly_positive.append(j)
    return np.asarray(sorted(set(newly_positive)), dtype=np.int64)


def query_norms(state: DecayState) -> tuple[float, float]:
    """Tracked (||bhat||_1, ||bhat||_2)."""
    return state.tracker.norms()
