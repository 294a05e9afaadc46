"""Exact rational ground truth: solves, inverses, escape probabilities,
distance comparisons, and the cover verifier.

Everything here is a pure function over immutable inputs and safe to
call concurrently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from gmpy2 import divexact, mpq, mpz

from .core import IndexSet, SddmMatrix, Singular, _log_value, submatrix

ORACLE_CAP_N = 300
ORACLE_CAP_NNZ = 5000

_ZERO = mpz(0)


class CapExceeded(ValueError):
    """Instance exceeds the configured oracle size cap."""


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ExactSolution:
    """Arbitrary-precision rational solution or inverse.

    ``values`` is a list of gmpy2.mpq for vector results and a list of
    row lists for matrix results; both interoperate with
    fractions.Fraction.
    """

    values: list
    provenance: str

    @property
    def is_matrix(self) -> bool:
        return bool(self.values) and isinstance(self.values[0], list)


def _check_cap(L: SddmMatrix, cap_n: int, cap_nnz: int) -> None:
    if L.n > cap_n or L.m > cap_nnz:
        raise CapExceeded(
            f"n={L.n}, nnz={L.m} beyond oracle cap ({cap_n}, {cap_nnz})"
        )


def _bareiss_forward(tab: list[list], n: int, width: int) -> None:
    """Fraction-free forward elimination in place; tab rows are mpz lists."""
    prev = mpz(1)
    for p in range(n):
        if tab[p][p] == 0:
            for r in range(p + 1, n):
                if tab[r][p] != 0:
                    tab[p], tab[r] = tab[r], tab[p]
                    break
            else:
                raise Singular("zero pivot column in exact elimination")
        piv = tab[p][p]
        rowp = tab[p]
        for r in range(p + 1, n):
            rowr = tab[r]
            f = rowr[p]
            if f == 0:
                new = rowr[:p + 1]
                new.extend(divexact(piv * rowr[c], prev) for c in range(p + 1, width))
            else:
                new = rowr[:p]
                new.append(_ZERO)
                new.extend(
                    divexact(piv * rowr[c] - f * rowp[c], prev)
                    for c in range(p + 1, width)
                )
            tab[r] = new
        prev = piv


def _back_substitute(tab: list[list], n: int, col: int) -> list:
    """Solve the upper-triangular system for one augmented column."""
    x = [mpq(0)] * n
    for p in range(n - 1, -1, -1):
        acc = mpq(tab[p][col])
        row = tab[p]
        for c in range(p + 1, n):
            if row[c]:
                acc -= row[c] * x[c]
        x[p] = acc / row[p]
    return x


def _int_tableau(L: SddmMatrix) -> list[list]:
    return [[mpz(v) for v in row] for row in L.int_rows()]


def _as_mpq(x) -> mpq:
    if isinstance(x, np.generic):
        x = x.item()
    return mpq(x)


def _rhs_to_integer(b) -> tuple[list, int]:
    """Clear denominators: returns (integer numerators, common denominator)."""
    vals = [_as_mpq(x) for x in b]
    den = 1
    for v in vals:
        d = int(v.denominator)
        if d > den:
            den = d  # float denominators are powers of two, max is the lcm
    for v in vals:
        if den % int(v.denominator) != 0:
            # general case: fall back to true lcm
            den = den * int(v.denominator) // math.gcd(den, int(v.denominator))
    return [mpz(v * den) for v in vals], den


def exact_solve(L: SddmMatrix, b, cap_n: int = ORACLE_CAP_N,
                cap_nnz: int = ORACLE_CAP_NNZ) -> ExactSolution:
    """Solve L x = b exactly; b may hold ints, floats, or rationals."""
    _check_cap(L, cap_n, cap_nnz)
    b = list(b)
    if len(b) != L.n:
        raise DimensionMismatch(f"b has length {len(b)}, matrix is {L.n}")
    ints, den = _rhs_to_integer(b)
    tab = _int_tableau(L)
    for row, r in zip(tab, ints):
        row.append(r)
    _bareiss_forward(tab, L.n, L.n + 1)
    x = _back_substitute(tab, L.n, L.n)
    if den != 1:
        x = [v / den for v in x]
    return ExactSolution(x, f"solve(n={L.n}, hash={L.content_hash()[:12]})")


def exact_inverse(L: SddmMatrix, cap_n: int = ORACLE_CAP_N,
                  cap_nnz: int = ORACLE_CAP_NNZ) -> ExactSolution:
    """Full rational inverse via fraction-free Gauss-Jordan elimination."""
    _check_cap(L, cap_n, cap_nnz)
    n = L.n
    width = 2 * n
    tab = _int_tableau(L)
    one = mpz(1)
    for i, row in enumerate(tab):
        row.extend(one if j == i else _ZERO for j in range(n))
    prev = mpz(1)
    for p in range(n):
        piv = tab[p][p]
        if piv == 0:
            raise Singular("zero pivot in exact inverse")
        rowp = tab[p]
        for r in range(n):
            if r == p:
                continue
            rowr = tab[r]
            f = rowr[p]
            if f == 0:
                tab[r] = [divexact(piv * rowr[c], prev) for c in range(width)]
            else:
                tab[r] = [
                    divexact(piv * rowr[c] - f * rowp[c], prev)
                    for c in range(width)
                ]
        prev = piv
    inv = [
        [mpq(tab[i][n + j], tab[i][i]) for j in range(n)]
        for i in range(n)
    ]
    return ExactSolution(inv, f"inverse(n={n}, hash={L.content_hash()[:12]})")


def escape_probability(L: SddmMatrix, s: int, t: int,
                       cap_n: int = ORACLE_CAP_N,
                       cap_nnz: int = ORACLE_CAP_NNZ):
    """Probability a walk from s visits t before the dummy vertex.

    Equals inv_st / inv_tt: expected visits to t from s are P times the
    expected visits from t itself, and both scale by the same diagonal
    factor. Validated independently by simulate_escape_probability.
    """
    _check_cap(L, cap_n, cap_nnz)
    e_t = [1 if i == t else 0 for i in range(L.n)]
    col = exact_solve(L, e_t, cap_n, cap_nnz).values
    return col[s] / col[t]


def simulate_escape_probability(L: SddmMatrix, s: int, t: int,
                                walks: int = 100_000, seed: int = 0):
    """Monte-Carlo estimate of the escape probability on the associated
    graph; independent of the exact-inverse code path."""
    g = L.graph()
    rng = np.random.default_rng(seed)
    neigh = []
    for v in range(L.n):
        ids, wts = g.neighbors(v)
        w = np.asarray(wts, dtype=np.float64)
        neigh.append((np.asarray(ids), np.cumsum(w) / w.sum()))
    hits = 0
    for _ in range(walks):
        v = s
        while True:
            if v == t:
                hits += 1
                break
            if v == g.dummy:
                break
            ids, cum = neigh[v]
            v = int(ids[np.searchsorted(cum, rng.random(), side="right")])
    p = hits / walks
    sigma = math.sqrt(max(p * (1 - p), 1.0 / walks) / walks)
    return p, sigma


def dist_leq(inv_entry, r, n: int, U: int) -> bool:
    """Exact decision of D(i,j) <= r from the rational inverse entry.

    r must be integral. D = +inf (zero entry) compares above any finite r.
    """
    r = int(r)
    if inv_entry == 0:
        return False
    q = _as_mpq(inv_entry)
    base = mpz(n * U)
    # D <= r  <=>  inv >= (nU)^(2-r)
    if r >= 2:
        return q.numerator * base ** (r - 2) >= q.denominator
    return q.numerator >= q.denominator * base ** (2 - r)


def dist_gt(inv_entry, r, n: int, U: int) -> bool:
    return not dist_leq(inv_entry, r, n, U)


def distance_float(inv_entry, n: int, U: int) -> float:
    """Float rendering of the probability distance, +inf on zero entries."""
    if inv_entry == 0:
        return math.inf
    return 2.0 - _log_value(inv_entry) / math.log(n * U)


def distance_matrix_float(inv_values: list, n: int, U: int) -> np.ndarray:
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        row = inv_values[i]
        for j in range(n):
            out[i, j] = distance_float(row[j], n, U)
    return out


def norm2_sq(values) -> mpq:
    acc = mpq(0)
    for v in values:
        q = _as_mpq(v)
        acc += q * q
    return acc


def norm1(values) -> mpq:
    acc = mpq(0)
    for v in values:
        acc += abs(_as_mpq(v))
    return acc


def spectral_bound_holds(L: SddmMatrix, cap_n: int = ORACLE_CAP_N,
                         cap_nnz: int = ORACLE_CAP_NNZ) -> bool:
    """Exact check that ||L^{-1}||_2 < n^2, i.e. n^2 L - I is positive
    definite: all Bareiss pivots (leading principal minors) positive."""
    _check_cap(L, cap_n, cap_nnz)
    n = L.n
    n2 = mpz(n * n)
    tab = [[n2 * mpz(v) for v in row] for row in L.int_rows()]
    for i in range(n):
        tab[i][i] -= 1
    prev = mpz(1)
    for p in range(n):
        piv = tab[p][p]
        if piv <= 0:
            return False
        rowp = tab[p]
        for r in range(p + 1, n):
            rowr = tab[r]
            f = rowr[p]
            tab[r] = rowr[:p] + [_ZERO] + [
                divexact(piv * rowr[c] - f * rowp[c], prev)
                for c in range(p + 1, n)
            ]
        prev = piv
    return True


def far_removal_error(L: SddmMatrix, b, T: IndexSet,
                      cap_n: int = ORACLE_CAP_N,
                      cap_nnz: int = ORACLE_CAP_NNZ) -> mpq:
    """Squared 2-norm of [(L_{-T,-T})^{-1} b_{-T}; 0] - L^{-1} b, exact."""
    full = exact_solve(L, b, cap_n, cap_nnz).values
    keep = IndexSet.from_mask(~T.mask)
    sub = submatrix(L, keep)
    b = list(b)
    part = exact_solve(sub, [b[i] for i in keep.ids], cap_n, cap_nnz).values
    padded = [mpq(0)] * L.n
    for pos, i in enumerate(keep.ids):
        padded[i] = part[pos]
    return norm2_sq([padded[i] - full[i] for i in range(L.n)])


@dataclass
class PropertyResult:
    passed: bool
    witness: object = None
    measured: object = None


@dataclass
class CoverReport:
    """Per-property verdicts for the five cover requirements."""

    properties: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties.values())

    def to_json(self) -> str:
        payload = {
            name: {"pass": p.passed, "witness": p.witness, "measured": p.measured}
            for name, p in self.properties.items()
        }
        return json.dumps(payload, indent=2)


# Float prefilter margin for distance comparisons; anything closer to the
# boundary than this is re-decided exactly.
_DIST_MARGIN = 1e-6


def _leq_with_escalation(inv_entry, d_float: float, r: int, n: int, U: int) -> bool:
    if d_float < r - _DIST_MARGIN:
        return True
    if d_float > r + _DIST_MARGIN:
        return False
    return dist_leq(inv_entry, r, n, U)


def verify_cover(L: SddmMatrix, pairs, r_in, r_out, alpha,
                 inv: ExactSolution | None = None,
                 cap_n: int = ORACLE_CAP_N,
                 cap_nnz: int = ORACLE_CAP_NNZ) -> CoverReport:
    """Check the five cover properties against exact distances.

    ``pairs`` is a sequence of (V, W) with IndexSet or id-list members.
    r_in and r_out must be integral so distance comparisons stay exact.
    """
    _check_cap(L, cap_n, cap_nnz)
    n, U = L.n, L.U
    r_in, r_out = int(r_in), int(r_out)
    norm_pairs = []
    for V, W in pairs:
        if not isinstance(V, IndexSet):
            V = IndexSet(V, n)
        if not isinstance(W, IndexSet):
            W = IndexSet(W, n)
        norm_pairs.append((V, W))
    if inv is None:
        inv = exact_inverse(L, cap_n, cap_nnz)
    dist = distance_matrix_float(inv.values, n, U)
    report = CoverReport()

    # 1: V_i subset of W_i
    res = PropertyResult(True)
    for idx, (V, W) in enumerate(norm_pairs):
        stray = V.ids[~W.mask[V.ids]] if len(V) else np.empty(0, np.int64)
        if len(stray):
            res = PropertyResult(False, witness=(idx, int(stray[0])))
            break
    report.properties["inner_subset_of_outer"] = res

    # 2: every vertex inside some inner ball
    covered = np.zeros(n, dtype=bool)
    for V, _ in norm_pairs:
        covered |= V.mask
    if covered.all():
        report.properties["coverage"] = PropertyResult(True, measured=int(covered.sum()))
    else:
        report.properties["coverage"] = PropertyResult(
            False, witness=int(np.argmin(covered)), measured=int(covered.sum())
        )

    # 3: per-vertex outer-ball multiplicity
    counts = np.zeros(n, dtype=np.int64)
    for _, W in norm_pairs:
        counts += W.mask
    worst = int(counts.max()) if n else 0
    if worst <= alpha:
        report.properties["multiplicity"] = PropertyResult(True, measured=worst)
    else:
        report.properties["multiplicity"] = PropertyResult(
            False, witness=int(np.argmax(counts)), measured=worst
        )

    # 4: outer-ball diameter at most r_in
    res = PropertyResult(True, measured=0.0)
    max_in = 0.0
    for idx, (_, W) in enumerate(norm_pairs):
        ids = W.ids
        if len(ids) < 2:
            continue
        block = dist[np.ix_(ids, ids)]
        max_in = max(max_in, float(np.max(block)))
        u_pos, v_pos = np.unravel_index(np.argmax(block), block.shape)
        u, v = int(ids[u_pos]), int(ids[v_pos])
        if not _leq_with_escalation(inv.values[u][v], dist[u, v], r_in, n, U):
            res = PropertyResult(False, witness=(idx, u, v), measured=float(dist[u, v]))
            break
        # the block max passing implies the rest except near-boundary ties
        near = np.argwhere(block > r_in - _DIST_MARGIN)
        for a_pos, b_pos in near:
            a, b_ = int(ids[a_pos]), int(ids[b_pos])
            if not _leq_with_escalation(inv.values[a][b_], dist[a, b_], r_in, n, U):
                res = PropertyResult(False, witness=(idx, a, b_), measured=float(dist[a, b_]))
                break
        if not res.passed:
            break
    if res.passed:
        res.measured = max_in
    report.properties["outer_diameter"] = res

    # 5: inner ball to outside-outer gap above r_out
    res = PropertyResult(True, measured=math.inf)
    min_cross = math.inf
    for idx, (V, W) in enumerate(norm_pairs):
        outside = np.flatnonzero(~W.mask)
        if len(V) == 0 or len(outside) == 0:
            continue
        block = dist[np.ix_(V.ids, outside)]
        min_cross = min(min_cross, float(np.min(block)))
        u_pos, v_pos = np.unravel_index(np.argmin(block), block.shape)
        u, v = int(V.ids[u_pos]), int(outside[v_pos])
        if _leq_with_escalation(inv.values[u][v], dist[u, v], r_out, n, U):
            res = PropertyResult(False, witness=(idx, u, v), measured=float(dist[u, v]))
            break
        near = np.argwhere(block < r_out + _DIST_MARGIN)
        for a_pos, b_pos in near:
            a, b_ = int(V.ids[a_pos]), int(outside[b_pos])
            if _leq_with_escalation(inv.values[a][b_], dist[a, b_], r_out, n, U):
                res = PropertyResult(False, witness=(idx, a, b_), measured=float(dist[a, b_]))
                break
        if not res.passed:
            break
    if res.passed:
        res.measured = min_cross
    report.properties["inner_outer_gap"] = res
    return report


@dataclass(frozen=True)
class EntrywiseReport:
    passed: bool
    worst_ratio: float
    witness: int | None = None


def entrywise_check(approx, exact, eps: float) -> EntrywiseReport:
    """Two-sided multiplicative check: every entry within e^{+-eps}.

    Zero exact entries require zero approximations and vice versa.
    """
    vals = approx.values if hasattr(approx, "values") else np.asarray(approx)
    truth = exact.values if isinstance(exact, ExactSolution) else list(exact)
    if len(vals) != len(truth):
        raise DimensionMismatch(f"{len(vals)} approximations vs {len(truth)} exact entries")
    worst = 1.0
    witness = None
    passed = True
    for i, (a, t) in enumerate(zip(vals, truth)):
        t = _as_mpq(t)
        if t == 0 or a == 0:
            if t != 0 or a != 0:
                return EntrywiseReport(False, math.inf, i)
            continue
        ratio = mpq(float(a)) / t  # float() is exact for float64 entries
        if ratio < 0:
            return EntrywiseReport(False, math.inf, i)
        log_r = abs(_log_value(ratio))
        r_sym = math.exp(log_r)
        if r_sym > worst:
            worst = r_sym
            witness = i
        if log_r > eps * (1 + 1e-12):
            passed = False
    return EntrywiseReport(passed, worst, witness if not passed else None)
