"""Command line interface.

Subcommands: ``gen``, ``invariants``, ``homotopy``, ``approximate``,
``bench`` and ``selftest``.  Exit status is 0 on success, 2 when a
mathematical precondition fails and 1 on any other error.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

from . import io as acu_io
from .errors import AcuError, PreconditionError
from .gap_opening import approximate
from .generators import KINDS, InstanceSpec, make_instance
from .homotopy import build_homotopy
from .invariants import BEST_EFFORT, DEFAULT_C1, MODES, invariant_report
from .lin_oracle import COMMUTE_TOL
from .selftest import SUITES, run_selftest


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        print(text)
    else:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _load_pair(path: str):
    return acu_io.pair_from_json(acu_io.read_json(path))


def cmd_gen(args) -> int:
    size = args.m if args.m is not None else args.n
    if size is None:
        raise AcuError("gen needs --m (clock/shift kinds) or --n (perturbed_commuting)")
    spec = InstanceSpec(args.kind, size, args.scale, args.seed)
    u, v, meta = make_instance(spec)
    _emit(acu_io.dumps(acu_io.pair_to_json(u, v, meta)), args.out)
    return 0


def cmd_invariants(args) -> int:
    u, v = _load_pair(args.input)
    rep = invariant_report(u, v, mode=args.mode, c1=args.c1)
    doc = {"schema_version": acu_io.SCHEMA_VERSION, **rep.to_dict()}
    _emit(acu_io.dumps(doc), args.out)
    return 0


def cmd_homotopy(args) -> int:
    u, v = _load_pair(args.input)
    path, cert = build_homotopy(u, v, args.n, sample_density=args.samples, mode=args.mode, c1=args.c1)
    _emit(acu_io.dumps(acu_io.path_to_json(path, cert.to_dict())), args.out)
    return 0


def cmd_approximate(args) -> int:
    u, v = _load_pair(args.input)
    path = acu_io.path_from_json(acu_io.read_json(args.path)) if args.path else None
    _, _, rep = approximate(u, v, path=path, eps=args.eps, N=args.n, mode=args.mode, commute_tol=args.tol_commute)
    _emit(acu_io.dumps(rep.to_dict()), args.out)
    return 0


def bench_row(spec: InstanceSpec, mode: str = BEST_EFFORT, eps: Optional[float] = None) -> acu_io.BenchRow:
    """Run the full pipeline and both invariants on one instance."""
    u, v, meta = make_instance(spec)
    t0 = time.perf_counter()
    _, _, rep = approximate(u, v, eps=eps, mode=mode)
    runtime = (time.perf_counter() - t0) * 1000.0
    inv = invariant_report(u, v)
    return acu_io.BenchRow(
        instance=meta["label"],
        n_total=rep.n_total,
        delta=rep.delta,
        eps=rep.eps,
        N=rep.N,
        d=rep.d,
        distance_u=rep.distance_u,
        distance_v=rep.distance_v,
        commutator_residual=rep.commutator_residual,
        winding=inv.winding,
        isospec=inv.isospec,
        mode=rep.mode,
        runtime_ms=runtime,
    )


def cmd_bench(args) -> int:
    sizes = args.m or args.n or [8, 16, 32]
    specs = [InstanceSpec(args.kind, s, args.scale, args.seed) for s in sizes]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(bench_row, specs, [args.mode] * len(specs), [args.eps] * len(specs)))
    else:
        rows = [bench_row(s, args.mode, args.eps) for s in specs]
    if args.format == "json" or (args.out and args.out.endswith(".json")):
        text = acu_io.dumps({"schema_version": acu_io.SCHEMA_VERSION, "rows": [r.to_dict() for r in rows]})
    else:
        text = acu_io.bench_csv(rows)
    _emit(text, args.out)
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest(trials=args.samples, seed=args.seed, only=args.suite)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        extra = f"  {'; '.join(r.notes)}" if r.notes else ""
        print(f"{status}  {r.name:<11} worst measured/bound {r.worst_ratio:.3g}  ({r.seconds:.2f} s){extra}")
    if args.out:
        _emit(acu_io.dumps([r.to_dict() for r in results]), args.out)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acu", description="Commuting approximants for almost commuting unitaries.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, mode=True):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=0)
        if mode:
            p.add_argument("--mode", choices=MODES, default=BEST_EFFORT)

    p = sub.add_parser("gen", help="write a test pair as JSON")
    common(p, mode=False)
    p.add_argument("--kind", choices=KINDS[:-1], default="voiculescu")
    p.add_argument("--m", type=int, help="clock/shift size")
    p.add_argument("--n", type=int, help="matrix size for perturbed_commuting")
    p.add_argument("--scale", type=float, default=1e-3, help="perturbation strength")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("invariants", help="winding number and isospectral invariant of a pair")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--c1", type=float, default=DEFAULT_C1)
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("homotopy", help="path from v to 1 almost commuting with u")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--n", type=int, help="number of arc pairs N")
    p.add_argument("--samples", type=int, default=32, help="samples per segment for the certificate")
    p.add_argument("--c1", type=float, default=DEFAULT_C1)
    p.set_defaults(func=cmd_homotopy)

    p = sub.add_parser("approximate", help="exactly commuting unitaries near the input pair")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--path", help="path JSON from v to 1 (built when omitted)")
    p.add_argument("--eps", type=float)
    p.add_argument("--n", type=int, help="number of arc pairs for the homotopy")
    p.add_argument("--tol-commute", type=float, default=COMMUTE_TOL, dest="tol_commute")
    p.set_defaults(func=cmd_approximate)

    p = sub.add_parser("bench", help="pipeline over a sweep of instances, CSV or JSON")
    common(p)
    p.add_argument("--kind", choices=KINDS[:-1], default="doubled")
    p.add_argument("--m", type=int, nargs="+")
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--scale", type=float, default=1e-3)
    p.add_argument("--eps", type=float)
    p.add_argument("--jobs", type=int, default=1, help="instances run in parallel")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="quick randomized check of every construction")
    common(p, mode=False)
    p.add_argument("--samples", type=int, default=20, help="trials per suite")
    p.add_argument("--suite", action="append", choices=sorted(SUITES), help="run only this suite (repeatable)")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 2
    except (AcuError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
