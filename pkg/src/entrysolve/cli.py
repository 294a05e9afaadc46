"""Command-line front end: generate, cover, solve, verify, bench.

Exit codes are part of the contract: 0 success, 1 verification failed,
2 parse error, 3 validation error, 4 solve/cover error, 5 oracle cap.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

from . import decay, mmio, oracle
from .core import BaseTooSmall, PrecisionRegimeExceeded, SddmValidationError
from .cover import Cover, CoverConstructionError, build_cover, default_params
from .generate import FAMILIES, SURPLUS_MODES, InstanceSpec, generate_matrix, generate_rhs
from .invariants import check_decay_invariants
from .normwise import NonFiniteEncountered
from .partial import CoverGapTooSmall
from .solve import CoverMatrixMismatch, SolveOptions, sddm_solve, solve_with_cover

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVE = 4
EXIT_CAP = 5


def _load_cover(path) -> Cover:
    try:
        with open(path) as fh:
            return Cover.from_json(fh.read())
    except OSError as exc:
        raise mmio.ParseError(f"cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise mmio.ParseError(f"{path}: bad cover file: {exc}") from exc


def _solve_options(args) -> SolveOptions:
    return SolveOptions(
        T=args.T,
        mode=args.mode,
        ell=args.ell,
        B=args.B,
        allow_small_T=args.T is not None and args.allow_small_T,
        extended_precision=getattr(args, "extended_precision", False),
    )


def cmd_solve(args) -> int:
    L = mmio.read_matrix(args.matrix, U=args.U)
    b = mmio.read_vector(args.rhs)
    opts = _solve_options(args)
    if args.cover:
        cover = _load_cover(args.cover)
        report = solve_with_cover(L, b, args.eps, args.delta, cover,
                                  options=opts, seed=args.seed)
    else:
        report = sddm_solve(L, b, args.eps, args.delta, options=opts, seed=args.seed)
    mmio.write_vector(args.output, report.x.values)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report.to_json())
    if args.trace:
        with open(args.trace, "w") as fh:
            for row in report.trace:
                fh.write(json.dumps(row.to_dict()) + "\n")
    print(f"solved n={L.n} m={L.m} support={len(report.A)} "
          f"iterations={report.totals['iterations']} "
          f"wall={report.totals['wall_clock_s']:.3f}s -> {args.output}")
    return EXIT_OK


def cmd_cover(args) -> int:
    L = mmio.read_matrix(args.matrix, U=args.U)
    params = default_params(L.n, L.U, args.delta, mode=args.mode,
                            ell=args.ell, B=args.B, r_out_min=args.r_out_min)
    cover = build_cover(L, params, seed=args.seed)
    with open(args.output, "w") as fh:
        fh.write(cover.to_json())
    sizes = sorted(len(p.W) for p in cover.pairs)
    hist = {}
    for s in sizes:
        bucket = 1 << max(0, (s - 1).bit_length())
        hist[bucket] = hist.get(bucket, 0) + 1
    print(f"cover: {len(cover)} pairs, max multiplicity {cover.max_multiplicity()}, "
          f"r_in={cover.r_in} r_out={cover.r_out}")
    print("outer-ball size histogram (bucket<=size): "
          + ", ".join(f"{k}:{v}" for k, v in sorted(hist.items())))
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_verify(args) -> int:
    L = mmio.read_matrix(args.matrix, U=args.U)
    if args.what == "cover":
        cover = _load_cover(args.cover)
        if cover.matrix_hash and cover.matrix_hash != L.content_hash():
            raise CoverMatrixMismatch("cover file was built for a different matrix")
        report = oracle.verify_cover(
            L, [(p.V, p.W) for p in cover.pairs],
            cover.r_in, cover.r_out, cover.alpha,
        )
        print(report.to_json())
        return EXIT_OK if report.passed else EXIT_FAILED
    if args.what == "solution":
        x = mmio.read_vector(args.solution)
        b = mmio.read_vector(args.rhs)
        if any(v != int(v) for v in b):
            raise ValueError("right-hand side must be integer-valued")
        exact = oracle.exact_solve(L, [int(v) for v in b])
        check = oracle.entrywise_check(x, exact, args.eps)
        verdict = "PASS" if check.passed else f"FAIL at index {check.witness}"
        print(f"entrywise check ({args.eps}): {verdict}, worst ratio {check.worst_ratio:.9f}")
        return EXIT_OK if check.passed else EXIT_FAILED
    # decay-invariants
    b = mmio.read_vector(args.rhs)
    if L.n > oracle.ORACLE_CAP_N or L.m > oracle.ORACLE_CAP_NNZ:
        raise oracle.CapExceeded(f"n={L.n} beyond the oracle cap")
    _, inv = check_decay_invariants(L, b, args.eps, args.delta, seed=args.seed)
    for line in inv.lines():
        print(line)
    return EXIT_OK if inv.passed else EXIT_FAILED


def cmd_generate(args) -> int:
    spec = InstanceSpec(family=args.family, n=args.n, U=args.U,
                        density=args.density, surplus=args.surplus, seed=args.seed)
    L = generate_matrix(spec)
    mmio.write_matrix(args.output, L)
    print(f"wrote {args.output} (n={L.n}, m={L.m}, U={L.U})")
    if args.rhs:
        b = generate_rhs(L.n, L.U, seed=args.seed, density=args.rhs_density)
        mmio.write_vector(args.rhs, b)
        print(f"wrote {args.rhs}")
    return EXIT_OK


_BENCH_COLUMNS = ["family", "seed", "n", "m", "U", "eps", "wall_clock_s",
                  "sum_H", "sum_nnz_LHH", "bhat_updates", "solver_iterations"]


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()] if args.sizes else []
    families = [f for f in args.families.split(",") if f.strip()] if args.families else []
    rows = []
    for family in families:
        for n in sizes:
            spec = InstanceSpec(family=family, n=n, U=args.U, density=args.density,
                                surplus=args.surplus, seed=args.seed)
            L = generate_matrix(spec)
            b = generate_rhs(L.n, L.U, seed=args.seed)
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                report = sddm_solve(L, b, args.eps, args.delta,
                                    options=SolveOptions(mode=args.mode, ell=args.ell),
                                    seed=args.seed)
                wall = time.perf_counter() - t0
                rows.append([family, args.seed, L.n, L.m, L.U, args.eps,
                             f"{wall:.6f}", report.totals["sum_H"],
                             report.totals["sum_nnz_LHH"],
                             report.totals["bhat_updates"],
                             report.totals["solver_iterations"]])
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_BENCH_COLUMNS)
        writer.writerows(rows)
    print(f"wrote {args.output} ({len(rows)} rows)")
    return EXIT_OK


def _add_common_solver_flags(p) -> None:
    p.add_argument("--eps", type=float, default=0.1, help="entrywise accuracy target")
    p.add_argument("--delta", type=float, default=0.01, help="failure budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("desk", "paper"), default="desk")
    p.add_argument("--ell", type=int, default=None, help="cover level override (desk mode)")
    p.add_argument("--B", type=int, default=None, help="cover repetition override")
    p.add_argument("--U", type=int, default=None, help="override the declared entry bound")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="entrysolve",
        description="Entrywise-accurate solver for SDDM linear systems.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve L x = b with entrywise guarantees")
    p.add_argument("matrix")
    p.add_argument("rhs")
    _add_common_solver_flags(p)
    p.add_argument("-T", type=int, default=None, dest="T", help="iteration budget (default n)")
    p.add_argument("--allow-small-T", action="store_true", dest="allow_small_T")
    p.add_argument("--extended-precision", action="store_true", dest="extended_precision")
    p.add_argument("--cover", default=None, help="reuse a cover JSON built for this matrix")
    p.add_argument("--trace", default=None, help="write per-iteration JSONL here")
    p.add_argument("--report", default=None, help="write the run report JSON here")
    p.add_argument("-o", "--output", default="x_tilde.txt")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("cover", help="build and store a low-diameter cover")
    p.add_argument("matrix")
    _add_common_solver_flags(p)
    p.add_argument("--r-out-min", type=int, default=0, dest="r_out_min")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_cover)

    p = sub.add_parser("verify", help="oracle-backed verification")
    p.add_argument("matrix")
    p.add_argument("--what", choices=("cover", "solution", "decay-invariants"),
                   required=True)
    p.add_argument("--cover", default=None)
    p.add_argument("--solution", default=None)
    p.add_argument("--rhs", default=None)
    _add_common_solver_flags(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("generate", help="emit a validated instance")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--U", type=int, required=True)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--surplus", choices=SURPLUS_MODES, default="scattered")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--rhs", default=None, help="also write a random right-hand side here")
    p.add_argument("--rhs-density", type=float, default=1.0, dest="rhs_density")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("bench", help="grid of solves, CSV of measured quantities")
    p.add_argument("--sizes", default="", help="comma-separated n values")
    p.add_argument("--families", default="", help="comma-separated family names")
    _add_common_solver_flags(p)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--surplus", choices=SURPLUS_MODES, default="scattered")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except mmio.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except oracle.CapExceeded as exc:
        print(f"oracle cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (SddmValidationError, decay.BadEpsilon, decay.TooFewIterations,
            decay.NegativeRHS, PrecisionRegimeExceeded, BaseTooSmall) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CoverGapTooSmall, CoverConstructionError, CoverMatrixMismatch,
            NonFiniteEncountered) as exc:
        print(f"solve error: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
