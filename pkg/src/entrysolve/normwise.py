"""Normwise-error solver backend: preconditioned conjugate gradient with
refined residuals, meeting the Euclidean contract ||x - L^{-1}b||_2 <= eps ||b||_2.

Solves are re-entrant: matrices are immutable and all run state is local,
so concurrent solves are safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ApproxVector, IndexSet, SddmMatrix


class NonFiniteEncountered(ValueError):
    pass


@dataclass(frozen=True)
class NormwiseConfig:
    """Target relative Euclidean error, iteration cap, preconditioner."""

    eps: float
    max_iterations: int | None = None
    preconditioner: str = "diagonal"

    def __post_init__(self):
        if not (self.eps > 0):
            raise ValueError("eps must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("iteration cap must be at least 1")
        if self.preconditioner not in ("diagonal", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class NormwiseResult:
    """Solve outcome; ``converged`` is False when the iteration cap or a
    numerical floor was hit, in which case ``x`` is the best iterate."""

    x: ApproxVector
    iterations: int
    converged: bool
    residual_norm: float
    target_norm: float
    requested_delta: float | None = None
    cg_residual_norms: list = field(default_factory=list)
    # true residual of the accepted iterate after each refinement round;
    # non-increasing because only improving iterates are kept (raw CG
    # 2-norm residuals oscillate and carry no monotonicity promise)
    refined_residual_norms: list = field(default_factory=list)


def default_iteration_cap(L: SddmMatrix, eps: float) -> int:
    """Cap 10 sqrt(kappa_bound) ln(2 n^2 / eps) with kappa_bound = n^2 max L_ii."""
    kappa = L.n ** 2 * int(L.diagonal.max())
    return max(1, math.ceil(10.0 * math.sqrt(kappa) * math.log(2.0 * L.n ** 2 / eps)))


def _pcg(A, b: np.ndarray, inv_diag, rel_tol: float, max_it: int):
    """Plain preconditioned CG; returns (x, iterations, residual norms)."""
    x = np.zeros_like(b)
    r = b.copy()
    norm0 = float(np.linalg.norm(r))
    history = [norm0]
    if norm0 == 0.0 or max_it < 1:
        return x, 0, history
    z = r * inv_diag if inv_diag is not None else r.copy()
    p = z.copy()
    rz = float(r @ z)
    it = 0
    for it in range(1, max_it + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if not math.isfinite(pAp):
            raise NonFiniteEncountered("CG direction produced a non-finite value")
        if pAp <= 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if not math.isfinite(rn):
            raise NonFiniteEncountered("CG residual became non-finite")
        if rn <= rel_tol * norm0:
            break
        z = r * inv_diag if inv_diag is not None else r
        rz_new = float(r @ z)
        if rz_new <= 0.0:
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, it, history


def _true_residual(L: SddmMatrix, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Residual b - L x accumulated in 80-bit floats; the refinement loop
    relies on this staying far below the float64 rounding of x itself."""
    r = b.astype(np.longdouble) - L.csr_longdouble @ x.astype(np.longdouble)
    return r.astype(np.float64)


def normwise_solve(L: SddmMatrix, b, cfg: NormwiseConfig) -> NormwiseResult:
    """Solve L x = b with ||x - L^{-1}b||_2 <= eps ||b||_2.

    Terminates once the (refined) residual satisfies ||r||_2 <= eps ||b||_2 / n^2,
    which implies the error bound because ||L^{-1}||_2 < n^2. Negative
    iterate entries are clamped to zero on output; for nonnegative b this
    never increases the error. On cap or stall the best iterate is
    returned with ``converged=False``.
    """
    b = np.asarray(b, dtype=np.float64)
    if len(b) != L.n:
        raise ValueError(f"b has length {len(b)}, matrix is {L.n}")
    if not np.all(np.isfinite(b)):
        raise NonFiniteEncountered("b contains non-finite entries")
    if np.any(b < 0):
        raise ValueError("b must be nonnegative")

    full = IndexSet.full(L.n)
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return NormwiseResult(ApproxVector(np.zeros(L.n), full), 0, True, 0.0, 0.0)

    target = cfg.eps * norm_b / (L.n ** 2)
    cap = cfg.max_iterations if cfg.max_iterations is not None else default_iteration_cap(L, cfg.eps)
    inv_diag = None
    if cfg.preconditioner == "diagonal":
        inv_diag = 1.0 / L.diagonal.astype(np.float64)

    A = L.csr_float
    x = np.zeros(L.n)
    r = b.copy()
    total_it = 0
    best_x, best_norm = x, norm_b
    stalls = 0
    cg_histories = []
    accepted = []
    while total_it < cap:
        rn = float(np.linalg.norm(r))
        if rn <= target:
            break
        # ask the inner CG for enough reduction to finish, with headroom
        rel = max(min(0.25, 0.5 * target / rn), 1e-15)
        d, used, hist = _pcg(A, r, inv_diag, rel, cap - total_it)
        cg_histories.append(hist)
        total_it += max(used, 1)
        x = x + d
        r = _true_residual(L, b, x)
        rn_new = float(np.linalg.norm(r))
        if rn_new < best_norm:
            best_x, best_norm = x, rn_new
        accepted.append(best_norm)
        if rn_new > 0.5 * rn:
            stalls += 1
            if stalls >= 3:
                break
        else:
            stalls = 0

    x = best_x
    converged = best_norm <= target
    np.maximum(x, 0.0, out=x)
    return NormwiseResult(
        ApproxVector(x, full),
        iterations=total_it,
        converged=converged,
        residual_norm=best_norm,
        target_norm=target,
        cg_residual_norms=cg_histories,
        refined_residual_norms=accepted,
    )


def normwise_solve_scaled(L: SddmMatrix, b, eps: float, delta: float,
                          max_iterations: int | None = None) -> NormwiseResult:
    """Normalize by Z = ||b||_1, solve, rescale by Z.

    delta is accepted for interface parity with randomized backends and
    recorded in the result; the deterministic CG has no failure probability.
    """
    b = np.asarray(b, dtype=np.float64)
    z = float(np.abs(b).sum())
    if z == 0.0:
        return NormwiseResult(
            ApproxVector(np.zeros(L.n), IndexSet.full(L.n)), 0, True, 0.0, 0.0,
            requested_delta=delta,
        )
    res = normwise_solve(L, b / z, NormwiseConfig(eps=eps, max_iterations=max_iterations))
    return NormwiseResult(
        ApproxVector(res.x.values * z, res.x.support),
        iterations=res.iterations,
        converged=res.converged,
        residual_norm=res.residual_norm * z,
        target_norm=res.target_norm * z,
        requested_delta=delta,
        cg_residual_norms=res.cg_residual_norms,
    )
