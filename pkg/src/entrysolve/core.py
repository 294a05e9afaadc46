"""Domain types, input validation, and the probability distance."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

# Mantissa-bit budget for the default 53-bit float build: inputs with
# log2(nU/eps) above this need the extended-precision flag.
PRECISION_GATE_BITS = 45


class SddmValidationError(ValueError):
    """Input matrix fails one of the structural requirements."""


class Asymmetric(SddmValidationError):
    pass


class PositiveOffDiagonal(SddmValidationError):
    pass


class NonPositiveDiagonal(SddmValidationError):
    pass


class DominanceViolated(SddmValidationError):
    pass


class Singular(SddmValidationError):
    pass


class EntryExceedsU(SddmValidationError):
    pass


class BaseTooSmall(ValueError):
    """Probability distance needs base nU >= 2."""


class EmptySubset(ValueError):
    pass


class PrecisionRegimeExceeded(ValueError):
    """Requested accuracy is outside what 53-bit floats support."""


class IndexSet:
    """Sorted duplicate-free vertex ids over [0, n) with O(1) membership."""

    __slots__ = ("ids", "mask", "n")

    def __init__(self, ids, n: int):
        ids = np.unique(np.asarray(ids, dtype=np.int64))
        if len(ids) and (ids[0] < 0 or ids[-1] >= n):
            raise ValueError("vertex id out of range")
        self.ids = ids
        self.n = n
        mask = np.zeros(n, dtype=bool)
        mask[ids] = True
        self.mask = mask

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "IndexSet":
        out = cls.__new__(cls)
        out.mask = mask.astype(bool, copy=True)
        out.ids = np.flatnonzero(out.mask).astype(np.int64)
        out.n = len(mask)
        return out

    @classmethod
    def full(cls, n: int) -> "IndexSet":
        return cls.from_mask(np.ones(n, dtype=bool))

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, v) -> bool:
        v = int(v)
        return 0 <= v < self.n and bool(self.mask[v])

    def __iter__(self):
        return iter(self.ids.tolist())

    def __eq__(self, other) -> bool:
        return isinstance(other, IndexSet) and self.n == other.n and np.array_equal(self.ids, other.ids)

    def __repr__(self) -> str:
        return f"IndexSet({self.ids.tolist()}, n={self.n})"

    def intersection(self, other: "IndexSet") -> "IndexSet":
        return IndexSet.from_mask(self.mask & other.mask)

    def union(self, other: "IndexSet") -> "IndexSet":
        return IndexSet.from_mask(self.mask | other.mask)


class SddmMatrix:
    """Validated sparse symmetric integer matrix with entry bound U.

    Construct through :func:`validate_sddm`; instances are immutable and
    safe to share across threads.
    """

    def __init__(self, n: int, U: int, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray):
        self.n = int(n)
        self.U = int(U)
        order = np.lexsort((cols, rows))
        self.rows = rows[order].astype(np.int64)
        self.cols = cols[order].astype(np.int64)
        self.vals = vals[order].astype(np.int64)
        self._csr = sp.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n, self.n), dtype=np.int64
        )
        self._csr_float = self._csr.astype(np.float64)
        offd = self.rows != self.cols
        self._offdiag = sp.csr_matrix(
            (self.vals[offd], (self.rows[offd], self.cols[offd])),
            shape=(self.n, self.n),
            dtype=np.int64,
        )
        self.diagonal = np.zeros(self.n, dtype=np.int64)
        diag_mask = ~offd
        self.diagonal[self.rows[diag_mask]] = self.vals[diag_mask]
        # surplus_i = sum_j L_ij, the weight of the dummy edge at i
        self.surplus = np.asarray(self._csr.sum(axis=1)).ravel().astype(np.int64)
        self._csr_long = None
        self._hash = None

    @property
    def m(self) -> int:
        """Number of stored nonzero entries."""
        return len(self.vals)

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def csr_float(self) -> sp.csr_matrix:
        return self._csr_float

    @property
    def csr_longdouble(self) -> sp.csr_matrix:
        if self._csr_long is None:
            self._csr_long = self._csr.astype(np.longdouble)
        return self._csr_long

    @property
    def offdiag(self) -> sp.csr_matrix:
        """Off-diagonal part only; pattern doubles as the adjacency."""
        return self._offdiag

    def dense(self) -> np.ndarray:
        return self._csr.toarray()

    def int_rows(self) -> list[list[int]]:
        """Dense rows as Python ints, for exact-arithmetic consumers."""
        dense = self.dense()
        return [[int(x) for x in row] for row in dense]

    def graph(self) -> "AssociatedGraph":
        return AssociatedGraph(self)

    def components(self) -> list[IndexSet]:
        """Connected components of the associated graph restricted to [n]."""
        ncomp, labels = connected_components(self._offdiag, directed=False)
        return [IndexSet(np.flatnonzero(labels == c), self.n) for c in range(ncomp)]

    def content_hash(self) -> str:
        if self._hash is None:
            h = hashlib.sha256()
            h.update(f"{self.n} {self.U}\n".encode())
            for i, j, v in zip(self.rows, self.cols, self.vals):
                h.update(f"{i} {j} {v}\n".encode())
            self._hash = h.hexdigest()
        return self._hash

    def __repr__(self) -> str:
        return f"SddmMatrix(n={self.n}, m={self.m}, U={self.U})"


class AssociatedGraph:
    """Weighted graph on [n] plus dummy vertex n encoding the matrix.

    Edge weights are w(i, j) = -L_ij for i != j and w(i, dummy) equal to
    the row surplus.
    """

    def __init__(self, matrix: SddmMatrix):
        self.n = matrix.n
        self.dummy = matrix.n
        self.weights = (-matrix.offdiag).astype(np.float64).tocsr()
        self.dummy_weight = matrix.surplus.astype(np.float64)

    def neighbors(self, v: int):
        """Neighbor ids and weights of v, dummy included when surplus > 0."""
        row = self.weights.getrow(v)
        ids = row.indices.tolist()
        wts = row.data.tolist()
        if self.dummy_weight[v] > 0:
            ids.append(self.dummy)
            wts.append(float(self.dummy_weight[v]))
        return ids, wts


@dataclass(frozen=True)
class ProbDistance:
    """Distance value in the extended reals together with its base nU."""

    value: float
    n: int
    U: int

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class ApproxVector:
    """Nonnegative float vector with a declared support set."""

    values: np.ndarray
    support: IndexSet
    precision: int = 53

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if len(vals) != self.support.n:
            raise ValueError("values and support universe disagree")
        outside = vals[~self.support.mask]
        if len(outside) and np.any(outside != 0.0):
            raise ValueError("nonzero entry outside declared support")
        inside = vals[self.support.mask]
        if len(inside) and (not np.all(np.isfinite(inside)) or np.any(inside < 0.0)):
            raise ValueError("support entries must be finite and nonnegative")


def _to_coo(raw, n):
    """Normalize a dense array, scipy matrix, or (i, j, v) triples to COO."""
    if sp.issparse(raw):
        coo = raw.tocoo()
        return coo.shape[0], coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data
    arr = np.asarray(raw)
    if arr.ndim == 2 and (n is None or arr.shape == (n, n)):
        if arr.shape[0] != arr.shape[1]:
            raise SddmValidationError("matrix must be square")
        r, c = np.nonzero(arr)
        return arr.shape[0], r.astype(np.int64), c.astype(np.int64), arr[r, c]
    # iterable of (i, j, value)
    triples = list(raw)
    if n is None:
        raise ValueError("n is required for coordinate-list input")
    if not triples:
        return n, np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    arr = np.asarray(triples)
    return n, arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]


def check_precision(n: int, U: int, eps: float, extended: bool = False) -> None:
    """Reject accuracy requests outside the 53-bit float regime."""
    if extended:
        return
    if eps <= 0:
        raise PrecisionRegimeExceeded("eps must be positive")
    if math.log2(n * U / eps) > PRECISION_GATE_BITS:
        raise PrecisionRegimeExceeded(
            f"log2(nU/eps) = {math.log2(n * U / eps):.1f} exceeds the "
            f"{PRECISION_GATE_BITS}-bit gate; pass extended=True to override"
        )


def validate_sddm(raw, U: int, n: int | None = None, eps: float | None = None,
                  extended: bool = False) -> SddmMatrix:
    """Validate a raw symmetric integer matrix and wrap it as SddmMatrix.

    Accepts a dense array, a scipy sparse matrix, or an iterable of
    (i, j, value) triples with an explicit dimension n. Checks the
    L-matrix sign pattern, symmetry, row diagonal dominance, the entry
    bound U, and invertibility (every connected component must contain a
    strictly dominant row).
    """
    U = int(U)
    if U < 1:
        raise SddmValidationError("U must be a positive integer")
    n, rows, cols, vals = _to_coo(raw, n)
    if n < 1:
        raise SddmValidationError("empty matrix")
    if np.any(rows < 0) or np.any(rows >= n) or np.any(cols < 0) or np.any(cols >= n):
        raise SddmValidationError("index out of range")

    vals_arr = np.asarray(vals)
    if not np.all(vals_arr == np.floor(vals_arr)):
        raise SddmValidationError("entries must be integer-valued")
    vals_int = vals_arr.astype(np.int64)
    keep = vals_int != 0
    rows, cols, vals_int = rows[keep], cols[keep], vals_int[keep]

    key = rows * n + cols
    if len(np.unique(key)) != len(key):
        raise SddmValidationError("duplicate coordinate entry")

    if np.any(np.abs(vals_int) > U):
        bad = int(np.argmax(np.abs(vals_int) > U))
        raise EntryExceedsU(
            f"|L[{rows[bad]},{cols[bad]}]| = {abs(vals_int[bad])} exceeds U = {U}"
        )

    offd = rows != cols
    if np.any(vals_int[offd] > 0):
        bad = np.flatnonzero(offd & (vals_int > 0))[0]
        raise PositiveOffDiagonal(f"L[{rows[bad]},{cols[bad]}] = {vals_int[bad]} > 0")

    diag_vals = np.zeros(n, dtype=np.int64)
    diag_mask = ~offd
    diag_vals[rows[diag_mask]] = vals_int[diag_mask]
    if np.any(diag_vals <= 0):
        bad = int(np.argmax(diag_vals <= 0))
        raise NonPositiveDiagonal(f"L[{bad},{bad}] = {diag_vals[bad]} <= 0")

    # symmetry: (i, j) present iff (j, i) present with equal value
    fwd = {(int(i), int(j)): int(v) for i, j, v in zip(rows, cols, vals_int)}
    for (i, j), v in fwd.items():
        if i != j and fwd.get((j, i)) != v:
            raise Asymmetric(f"entry ({i},{j}) = {v} has no matching ({j},{i})")

    mat = SddmMatrix(n, U, rows, cols, vals_int)
    if np.any(mat.surplus < 0):
        bad = int(np.argmax(mat.surplus < 0))
        raise DominanceViolated(
            f"row {bad}: diagonal {mat.diagonal[bad]} below off-diagonal mass"
        )

    ncomp, labels = connected_components(mat.offdiag, directed=False)
    comp_surplus = np.zeros(ncomp, dtype=np.int64)
    np.add.at(comp_surplus, labels, mat.surplus)
    if np.any(comp_surplus == 0):
        comp = int(np.argmax(comp_surplus == 0))
        member = int(np.argmax(labels == comp))
        raise Singular(
            f"component containing vertex {member} has zero total surplus"
        )

    if eps is not None:
        check_precision(n, U, eps, extended=extended)
    return mat


def _log_value(value) -> float:
    """Natural log handling Fractions, gmpy2 rationals, ints, and floats."""
    num = getattr(value, "numerator", None)
    den = getattr(value, "denominator", None)
    if num is not None and den is not None:
        return math.log(int(num)) - math.log(int(den))
    return math.log(value)


def probability_distance(value, n: int, U: int) -> ProbDistance:
    """Distance -log_{nU}(value) + 2 derived from an inverse entry."""
    base = n * U
    if base < 2:
        raise BaseTooSmall(f"nU = {base} < 2")
    if value < 0:
        raise ValueError("inverse entries of an SDDM matrix are nonnegative")
    if value == 0:
        return ProbDistance(math.inf, n, U)
    d = 2.0 - _log_value(value) / math.log(base)
    return ProbDistance(d, n, U)


def submatrix(L: SddmMatrix, S) -> SddmMatrix:
    """Principal submatrix L[S, S], re-indexed to [0, len(S)).

    The index map back to original ids is sorted(S), i.e. ``S.ids`` when S
    is an IndexSet. The result is SDDM whenever L is: dominance is
    inherited and deleted neighbors only grow the dummy surplus.
    """
    if not isinstance(S, IndexSet):
        S = IndexSet(S, L.n)
    if len(S) == 0:
        raise EmptySubset("submatrix needs a nonempty index set")
    sub = L.csr[S.ids][:, S.ids].tocoo()
    return SddmMatrix(len(S), L.U, sub.row.astype(np.int64),
                      sub.col.astype(np.int64), sub.data.astype(np.int64))
