"""Oracle-backed invariant checks for threshold-decay runs.

Shared by the `verify --what decay-invariants` command and the
acceptance suite: every per-iteration guarantee of the decay loop is
replayed against the exact rational solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from gmpy2 import mpq

from . import oracle
from .core import SddmMatrix, _log_value, submatrix
from .solve import SolveOptions, SolveReport, sddm_solve

# Tracker norms carry relative error (eps/(nU))^c with c=1; comparisons
# against tracked values get this much slack plus float fuzz.
_FUZZ = 1e-9


@dataclass
class InvariantReport:
    checks: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, ok, detail))
        if not ok:
            self.failures.append(f"{name}: {detail}")

    def lines(self) -> list:
        return [
            f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else "")
            for name, ok, detail in self.checks
        ]


def _ratio_within(value: float, exact, bound: float) -> bool:
    """|log(value / exact)| <= bound with zero entries matched exactly."""
    exact = mpq(exact) if not isinstance(exact, mpq) else exact
    if exact == 0 or value == 0:
        return exact == 0 and value == 0
    return abs(_log_value(mpq(value) / exact)) <= bound * (1 + 1e-12) + 1e-15


def check_decay_invariants(L: SddmMatrix, b, eps: float, delta: float = 0.01,
                           seed: int = 0, options: SolveOptions | None = None,
                           report: SolveReport | None = None) -> tuple[SolveReport, InvariantReport]:
    """Run (or reuse) a recorded solve and verify per-iteration guarantees.

    Checked per component: geometric decay of ||bhat||_1, entrywise
    accuracy e^{eps t / (4T)} of the partial solution, smallness of
    surviving exact entries, the partition property of the extracted
    sets, and the efficiency counters.
    """
    if report is None:
        opts = options or SolveOptions()
        if not opts.record_states:
            opts = SolveOptions(**{**opts.__dict__, "record_states": True})
        report = sddm_solve(L, b, eps, delta, options=opts, seed=seed)
    inv = InvariantReport()
    b = np.asarray(b, dtype=np.int64)

    slack = eps / (L.n * L.U)
    for detail in report.components:
        ci = detail["component"]
        ids = np.asarray(detail["ids"], dtype=np.int64)
        L_c = submatrix(L, ids) if len(ids) != L.n else L
        n_c, U = L_c.n, L.U
        nU = n_c * U
        xbar = oracle.exact_solve(L_c, b[ids]).values
        rows = [s for s in report.states if s["component"] == ci]

        # geometric decay of the tracked 1-norm
        prev = None
        ok = True
        note = ""
        for s in rows:
            cur = s["norm1_tracked"]
            if prev is not None and cur > prev / nU * (1 + 2 * slack + _FUZZ):
                ok = False
                note = f"t={s['t']}: {cur:.3g} vs {prev:.3g}/{nU}"
                break
            prev = cur
        inv.record(f"comp{ci}/geometric-decay", ok, note)

        # partial correctness: solved entries within e^{eps t/(4T)}
        ok = True
        note = ""
        for s in rows:
            budget = eps * (s["t"] + 1) / (4.0 * s["T"])
            solved = np.flatnonzero(~s["S_mask_after"])
            for i in solved:
                if not _ratio_within(float(s["x_tilde_after"][i]), xbar[i], budget):
                    ok = False
                    note = f"t={s['t']}, i={i}"
                    break
            if not ok:
                break
        inv.record(f"comp{ci}/partial-correctness", ok, note)

        # residual smallness: survivors have exact entries below (nU)^-2 ||bhat||_1
        ok = True
        note = ""
        for s in rows:
            ceiling = s["norm1_tracked"] * (1 + slack + _FUZZ) / (nU * nU)
            for i in np.flatnonzero(s["S_mask_after"]):
                if not float(xbar[i]) < ceiling:
                    ok = False
                    note = f"t={s['t']}, i={i}: {float(xbar[i]):.3g} vs {ceiling:.3g}"
                    break
            if not ok:
                break
        inv.record(f"comp{ci}/residual-smallness", ok, note)

        # extracted sets partition the solved region, one entry each
        seen = np.zeros(n_c, dtype=np.int64)
        for s in rows:
            seen[s["F"]] += 1
        final_solved = (~rows[-1]["S_mask_after"]) if rows else np.zeros(n_c, dtype=bool)
        ok = bool(np.all(seen[final_solved] == 1) and np.all(seen[~final_solved] == 0))
        inv.record(f"comp{ci}/extraction-partition", ok)

        # efficiency counters
        r_in = detail["r_in"]
        inv.record(
            f"comp{ci}/dwell-bound",
            detail["max_dwell"] <= r_in,
            f"max dwell {detail['max_dwell']} vs r_in {r_in}",
        )
        inv.record(
            f"comp{ci}/sum-H-bound",
            detail["sum_H"] <= n_c * r_in,
            f"sum |H| {detail['sum_H']} vs n r_in {n_c * r_in}",
        )
        inv.record(
            f"comp{ci}/update-bound",
            detail["bhat_updates"] <= 2 * L_c.m + n_c,
            f"{detail['bhat_updates']} updates vs 2m+n = {2 * L_c.m + n_c}",
        )

    # end-to-end entrywise check at full T
    if all(d["T"] >= d["n"] for d in report.components):
        full = oracle.exact_solve(L, b) if len(report.components) == 1 else None
        if full is None:
            vals = [mpq(0)] * L.n
            for detail in report.components:
                ids = np.asarray(detail["ids"], dtype=np.int64)
                L_c = submatrix(L, ids) if len(ids) != L.n else L
                sol = oracle.exact_solve(L_c, b[ids]).values
                for pos, i in enumerate(ids):
                    vals[i] = sol[pos]
            full = oracle.ExactSolution(vals, "componentwise")
        check = oracle.entrywise_check(report.x, full, eps)
        inv.record("entrywise-final", check.passed,
                   f"worst ratio {check.worst_ratio:.6f}")
    return report, inv
