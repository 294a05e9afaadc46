"""Quickstart: generate a random SDDM instance, solve it entrywise, and
check the result against the exact rational oracle."""

from entrysolve import sddm_solve
from entrysolve.generate import InstanceSpec, generate_matrix, generate_rhs
from entrysolve import oracle

# a random connected instance with integer entries bounded by U
spec = InstanceSpec(family="random-graph", n=60, U=100, density=0.2, seed=7)
L = generate_matrix(spec)
b = generate_rhs(L.n, L.U, seed=7)
print(f"instance: {L}")

# entrywise solve: every output entry within e^{+-eps} of the true value
report = sddm_solve(L, b, eps=0.1, delta=0.01, seed=7)
print(f"solved in {report.totals['iterations']} decay iterations, "
      f"{report.totals['solver_iterations']} CG iterations, "
      f"{report.totals['wall_clock_s']:.3f}s")

# the oracle solves the same system in exact rational arithmetic
exact = oracle.exact_solve(L, b)
check = oracle.entrywise_check(report.x, exact, eps=0.1)
print(f"entrywise check: {'PASS' if check.passed else 'FAIL'} "
      f"(worst ratio {check.worst_ratio:.12f})")

smallest = min(v for v in report.x.values if v > 0)
largest = report.x.values.max()
print(f"solution spans [{smallest:.3e}, {largest:.3e}]")
