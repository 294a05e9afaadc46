"""End-to-end entrywise solver: low-diameter cover, threshold-decay loop,
and boundary-expanded partial solves, with per-run diagnostics."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import decay
from .core import ApproxVector, IndexSet, SddmMatrix, check_precision, submatrix
from .cover import Cover, CoverPair, build_cover, default_params
from .partial import ExpTracker, partial_solve, required_gap

REPORT_SCHEMA_VERSION = 1


class CoverMatrixMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    """Knobs for sddm_solve; defaults give the desk-mode pipeline."""

    T: int | None = None
    mode: str = "desk"
    ell: int | None = None
    B: int | None = None
    record_states: bool = False
    allow_small_T: bool = False
    extended_precision: bool = False
    verify_cover: bool | None = None


@dataclass
class IterationTrace:
    component: int
    t: int
    S_size: int
    F_size: int
    I_size: int
    H_size: int
    theta: float
    bhat_norm1: float

    def to_dict(self) -> dict:
        return {
            "component": self.component, "t": self.t, "S": self.S_size,
            "F": self.F_size, "I": self.I_size, "H": self.H_size,
            "theta": self.theta, "bhat_norm1": self.bhat_norm1,
        }


@dataclass
class SolveReport:
    """Output vector plus everything needed to audit the run."""

    x: ApproxVector
    A: IndexSet
    trace: list
    totals: dict
    cover_provenance: list
    components: list
    eps: float
    delta: float
    seed: int
    flags: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "eps": self.eps,
            "delta": self.delta,
            "seed": self.seed,
            "support_size": len(self.A),
            "totals": self.totals,
            "cover": self.cover_provenance,
            "components": self.components,
            "flags": self.flags,
            "trace": [row.to_dict() for row in self.trace],
        }
        return json.dumps(payload, indent=2)


def _component_seed(seed: int, comp: int) -> int:
    return int(np.random.SeedSequence((seed, comp)).generate_state(1)[0])


def _remap_cover(C: Cover, ids: np.ndarray, n_local: int) -> Cover:
    """Restrict a whole-matrix cover to one component, re-indexing ids."""
    lookup = -np.ones(C.n, dtype=np.int64)
    lookup[ids] = np.arange(n_local)
    pairs = []
    for pair in C.pairs:
        inside = lookup[pair.W.ids]
        if np.all(inside < 0):
            continue
        if np.any(inside < 0):
            raise CoverMatrixMismatch("cover pair straddles connected components")
        pairs.append(CoverPair(
            IndexSet(lookup[pair.V.ids], n_local),
            IndexSet(inside, n_local),
        ))
    return Cover(pairs, n_local, C.r_in, C.r_out, C.alpha, params=C.params,
                 matrix_hash=C.matrix_hash, provenance=dict(C.provenance))


def _solve_component(L_c: SddmMatrix, b_c: np.ndarray, eps: float, delta: float,
                     n_global: int, cover: Cover, opts: SolveOptions,
                     comp_idx: int, global_ids: np.ndarray):
    n_c = L_c.n
    T = opts.T if opts.T is not None else n_c
    state = decay.init_decay(L_c, b_c, eps, T=T,
                             allow_small_T=opts.allow_small_T or opts.T is None)
    tracker = ExpTracker(cover)
    for u in np.flatnonzero(b_c > 0):
        tracker.notify_rhs_positive(int(u))

    dwell = np.zeros(n_c, dtype=np.int64)
    trace, states, flags = [], [], []
    sum_H = 0
    sum_nnz = 0
    solver_iterations = 0
    iterations = 0
    for t in range(T + 1):
        state.t = t
        norm1, _ = decay.query_norms(state)
        if state.S_size == 0 or norm1 <= 0.0:
            break
        theta = decay.threshold(state)
        if theta == 0.0:
            break
        iterations += 1
        S = state.S_set()
        S_size_start = state.S_size
        I_size_start = tracker.I_size
        bhat = state.bhat()
        result = partial_solve(L_c, cover, S, bhat, state.eps_L,
                               delta / (2.0 * n_global), tracker)
        H = result.H
        dwell[H.ids] += 1
        sum_H += len(H)
        sum_nnz += result.nnz_HH
        solver_iterations += result.solver.iterations
        if not result.solver.converged and result.solver.iterations > 0:
            flags.append(f"solver-floor:comp{comp_idx}:t{t}")
        F = decay.extract_large(state, result.x)
        if opts.record_states:
            states.append({
                "component": comp_idx,
                "global_ids": global_ids,
                "t": t,
                "T": T,
                "S_mask": S.mask.copy(),
                "bhat": bhat.copy(),
                "H": H.ids.copy(),
                "xhat": result.x.values.copy(),
                "theta": theta,
                "eps_L": state.eps_L,
                "norm1_tracked": norm1,
                "F": F.ids.copy(),
                "S_mask_after": state.S_mask.copy(),
                "x_tilde_after": state.x_tilde.copy(),
            })
        trace.append(IterationTrace(comp_idx, t, S_size_start, len(F),
                                    I_size_start, len(H), theta, norm1))
        if len(F) == 0:
            flags.append(f"empty-extraction:comp{comp_idx}:t{t}")
            break
        for u in F.ids:
            if int(u) in tracker:
                tracker.notify_removed(int(u))
        for j in decay.update_rhs(state, F, result.x):
            tracker.notify_rhs_positive(int(j))

    detail = {
        "component": comp_idx,
        "ids": global_ids.tolist(),
        "n": n_c,
        "m": L_c.m,
        "iterations": iterations,
        "sum_H": int(sum_H),
        "sum_nnz_LHH": int(sum_nnz),
        "bhat_updates": int(state.update_count),
        "solver_iterations": int(solver_iterations),
        "max_dwell": int(dwell.max()) if n_c else 0,
        "r_in": cover.r_in,
        "r_out": cover.r_out,
        "T": T,
    }
    return state, trace, states, flags, detail


def _assemble(L, b, eps, delta, seed, opts, per_component, cover_infos, t0):
    n = L.n
    x = np.zeros(n, dtype=np.float64)
    A_mask = np.zeros(n, dtype=bool)
    trace, states, flags, details = [], [], [], []
    totals = {
        "n": n, "m": L.m, "U": L.U,
        "iterations": 0, "sum_H": 0, "sum_nnz_LHH": 0,
        "bhat_updates": 0, "solver_iterations": 0, "max_dwell": 0,
    }
    for state, tr, st, fl, detail, ids in per_component:
        x[ids] = state.x_tilde
        A_mask[ids] = state.solved_mask
        trace.extend(tr)
        states.extend(st)
        flags.extend(fl)
        details.append(detail)
        totals["iterations"] += detail["iterations"]
        totals["sum_H"] += detail["sum_H"]
        totals["sum_nnz_LHH"] += detail["sum_nnz_LHH"]
        totals["bhat_updates"] += detail["bhat_updates"]
        totals["solver_iterations"] += detail["solver_iterations"]
        totals["max_dwell"] = max(totals["max_dwell"], detail["max_dwell"])
    totals["wall_clock_s"] = time.perf_counter() - t0
    A = IndexSet.from_mask(A_mask)
    return SolveReport(
        x=ApproxVector(x, A), A=A, trace=trace, totals=totals,
        cover_provenance=cover_infos, components=details,
        eps=eps, delta=delta, seed=seed, flags=flags, states=states,
    )


def _validate_run_inputs(L: SddmMatrix, b, eps: float, delta: float,
                         opts: SolveOptions) -> np.ndarray:
    if not (0 < eps < 1):
        raise decay.BadEpsilon(f"eps must lie in (0, 1), got {eps}")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    check_precision(L.n, L.U, eps, extended=opts.extended_precision)
    b = np.asarray(b)
    if len(b) != L.n:
        raise ValueError(f"b has length {len(b)}, matrix is {L.n}")
    if not np.all(b == np.floor(b)):
        raise ValueError("b must be integer-valued")
    b = b.astype(np.int64)
    if np.any(b < 0):
        raise decay.NegativeRHS(f"b[{int(np.argmax(b < 0))}] is negative")
    if np.any(b > L.U):
        raise ValueError("b entries must not exceed U")
    return b


def _gap_floor(n_c: int, U: int, eps: float, T: int) -> int:
    eps_L = eps / (64.0 * T * (n_c * U) ** 2)
    return math.floor(required_gap(eps_L, n_c, U)) + 1


def sddm_solve(L: SddmMatrix, b, eps: float, delta: float,
               options: SolveOptions | None = None, seed: int = 0) -> SolveReport:
    """Entrywise-approximate solve of L x = b: every output entry lands
    within a multiplicative e^{+-eps} of the exact solution (T = n), with
    exact zeros preserved.

    The matrix is decomposed into connected components; each component
    gets its own cover (failure budget delta/2) and decay loop, with
    delta/(2n) charged per partial solve. Component solves are mutually
    independent (separate covers, states, and trackers) and are run
    sequentially here.
    """
    opts = options or SolveOptions()
    b = _validate_run_inputs(L, b, eps, delta, opts)
    t0 = time.perf_counter()
    per_component, cover_infos = [], []
    for ci, comp in enumerate(L.components()):
        ids = comp.ids
        L_c = submatrix(L, comp) if len(ids) != L.n else L
        b_c = b[ids]
        T_c = opts.T if opts.T is not None else L_c.n
        params = default_params(
            L_c.n, L.U, delta / 2.0, mode=opts.mode, ell=opts.ell, B=opts.B,
            r_out_min=_gap_floor(L_c.n, L.U, eps, max(T_c, 1)),
        )
        cover = build_cover(L_c, params, seed=_component_seed(seed, ci),
                            verify=opts.verify_cover)
        cover_infos.append({
            "source": "built", "component": ci, "r_in": cover.r_in,
            "r_out": cover.r_out, "alpha": cover.alpha,
            "pairs": len(cover), "mode": params.mode, "ell": params.ell,
            "seed": seed, "provenance": cover.provenance,
        })
        out = _solve_component(L_c, b_c, eps, delta, L.n, cover, opts, ci, ids)
        per_component.append((*out, ids))
    return _assemble(L, b, eps, delta, seed, opts, per_component, cover_infos, t0)


def solve_with_cover(L: SddmMatrix, b, eps: float, delta: float, C: Cover,
                     options: SolveOptions | None = None, seed: int = 0) -> SolveReport:
    """Identical contract to sddm_solve but reusing a prebuilt cover.

    The cover must have been built for this exact matrix (hash-checked).
    """
    opts = options or SolveOptions()
    if C.matrix_hash != L.content_hash():
        raise CoverMatrixMismatch(
            "cover was built for a different matrix "
            f"({C.matrix_hash[:12]} vs {L.content_hash()[:12]})"
        )
    b = _validate_run_inputs(L, b, eps, delta, opts)
    t0 = time.perf_counter()
    comps = L.components()
    per_component, cover_infos = [], []
    for ci, comp in enumerate(comps):
        ids = comp.ids
        if len(ids) == L.n:
            L_c, cover = L, C
        else:
            L_c = submatrix(L, comp)
            cover = _remap_cover(C, ids, L_c.n)
        b_c = b[ids]
        cover_infos.append({
            "source": "loaded", "component": ci, "r_in": cover.r_in,
            "r_out": cover.r_out, "alpha": cover.alpha, "pairs": len(cover),
            "seed": seed,
        })
        out = _solve_component(L_c, b_c, eps, delta, L.n, cover, opts, ci, ids)
        per_component.append((*out, ids))
    return _assemble(L, b, eps, delta, seed, opts, per_component, cover_infos, t0)
