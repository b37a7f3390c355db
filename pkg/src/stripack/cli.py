"""``stripack`` command line.

Exit codes: 0 success, 1 a check failed (invalid packing, failed
extraction or rearrangement), 2 bad input, 3 a solver limit was hit.
"""
from __future__ import annotations

import argparse
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import io as sio
from .bench import random_instances, rows_to_csv, run_bench
from .core import Instance, StripPackError, packing_from_rects, placed_rects, validate_packing
from .reduction import (
    ExtractionError,
    InvalidInput,
    build_instance,
    canonical_packing,
    extract_partition,
    make_params,
    random_no_instance,
    random_yes_instance,
)
from .solvers import LimitExceeded, SolverConfig, TooLarge, solve

OK, FAILED, BAD_INPUT, LIMIT = 0, 1, 2, 3
DEFAULT_SEED = 20161
ALGO_CHOICES = ("exact", "nfdh", "ffdh", "bl")


def _config(args, algo="exact") -> SolverConfig:
    algo = {"bl": "bottom_left"}.get(algo, algo)
    return SolverConfig(algo, args.node_limit, args.time_limit_ms)


def cmd_reduce(args) -> int:
    tp = sio.read_three_partition(args.inp)
    instance, params = build_instance(tp)
    sio.write_instance(instance, args.out)
    if args.params:
        sio.write_params(params, args.params)
    if args.cover:
        pk = canonical_packing(instance, params, sio.read_cover(args.cover))
        sio.write_packing(pk, args.packing or Path(args.out).with_suffix(".packing.json"))
    print(f"{len(instance.items)} items, W={instance.W}, a={params.a}, b={params.b}")
    return OK


def cmd_gen3p(args) -> int:
    rng = random.Random(args.seed)
    if args.no_instance:
        tp = random_no_instance(args.n, args.range, rng)
    else:
        tp, cover = random_yes_instance(args.n, args.range, rng)
        if args.cover:
            sio.write_cover(cover, args.cover)
    sio.write_three_partition(tp, args.out)
    return OK


def cmd_solve(args) -> int:
    instance = sio.read_instance(args.instance)
    try:
        pk = solve(instance, _config(args, args.algo))
    except LimitExceeded as exc:
        if exc.incumbent is not None:
            sio.write_packing(exc.incumbent, args.out)
        print(f"limit reached ({exc}); wrote the best packing found, height {exc.incumbent.height}",
              file=sys.stderr)
        return LIMIT
    sio.write_packing(pk, args.out)
    print(f"height {pk.height}")
    return OK


def cmd_validate(args) -> int:
    instance = sio.read_instance(args.instance)
    report = validate_packing(instance, sio.read_packing(args.packing))
    print(report)
    return OK if report.ok else FAILED


def cmd_extract(args) -> int:
    instance = sio.read_instance(args.instance)
    if args.params:
        params = sio.read_params(args.params)
    elif args.tp:
        params = make_params(sio.read_three_partition(args.tp))
    else:
        raise sio.BadInput("extract needs --params or --tp")
    cover = extract_partition(instance, params, sio.read_packing(args.packing))
    sio.write_cover(cover, args.out)
    print(" ".join("(" + ",".join(map(str, t)) + ")" for t in cover.triples))
    return OK


def cmd_repack(args) -> int:
    from .repack import build_level2
    from .structure import prepare_reference

    instance = sio.read_instance(args.instance)
    if args.reference:
        reference = sio.read_packing(args.reference)
        report = validate_packing(instance, reference)
        if not report.ok:
            print(f"reference packing is invalid:\n{report}", file=sys.stderr)
            return FAILED
    else:
        try:
            reference = solve(instance, _config(args))
        except LimitExceeded as exc:
            print(f"exact reference not proven ({exc}); pass --reference", file=sys.stderr)
            return LIMIT
    if (args.delta is None) != (args.mu is None):
        raise sio.BadInput("--delta and --mu go together")
    eps = Fraction(args.epsilon)
    delta = Fraction(args.delta) if args.delta is not None else None
    mu = Fraction(args.mu) if args.mu is not None else None
    prep = prepare_reference(instance, eps, reference, delta, mu)
    partition, packing, rep = build_level2(prep.instance, prep.classification, prep.params, prep.packing)
    # The rounded heights only grew, so the same positions pack the original items.
    final = packing_from_rects(placed_rects(instance, packing))
    sio.write_packing(final, args.out)
    if args.partition:
        sio.write_partition(partition, args.partition)
    if args.classes:
        sio.write_classification(prep.classification, args.classes)
    p = prep.params
    print(f"opt={p.opt} delta={p.delta} mu={p.mu} boxes={len(partition.boxes)} "
          f"height={final.height} ratio={float(Fraction(final.height, reference.height)):.4f}")
    return OK


def cmd_render(args) -> int:
    from .render import write_svg

    instance = sio.read_instance(args.instance)
    classes = sio.read_classification(args.classes) if args.classes else None
    write_svg(instance, sio.read_packing(args.packing), args.out, classes)
    return OK


def cmd_bench(args) -> int:
    instances: list[tuple[str, Instance]] = []
    if args.dir:
        for path in sorted(Path(args.dir).glob("*.json")):
            instances.append((path.stem, sio.read_instance(path)))
    if args.gen:
        instances += random_instances(args.gen, args.seed, W=args.width, max_items=args.items)
    if not instances:
        raise sio.BadInput("bench needs --dir with instance files or --gen N")
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGO_CHOICES]
    if bad:
        raise sio.BadInput(f"unknown algorithm(s) {bad}; choose from {', '.join(ALGO_CHOICES)}")
    rows = run_bench(instances, algos, _config(args), timing=not args.no_timing)
    text = rows_to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.plot:
        from .render import plot_bench

        plot_bench(rows, args.plot)
    return OK if all(r.valid for r in rows) else FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stripack", description="Strip packing toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def limits(p):
        p.add_argument("--node-limit", type=int, default=0,
                       help="exact-solver node cap (default: $STRIPACK_NODE_LIMIT or 2000000)")
        p.add_argument("--time-limit-ms", type=int, default=60_000)

    p = sub.add_parser("reduce", help="3-Partition file -> strip packing instance")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", help="also write the gadget parameters here")
    p.add_argument("--cover", help="triple cover; writes the canonical height-11 packing")
    p.add_argument("--packing", help="where the canonical packing goes (with --cover)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("gen3p", help="random 3-Partition instance with zero-sum triples")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--range", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--no-instance", action="store_true", help="generate an instance with no cover")
    p.add_argument("--out", required=True)
    p.add_argument("--cover", help="write the planted cover here (yes-instances only)")
    p.set_defaults(func=cmd_gen3p)

    p = sub.add_parser("solve", help="pack an instance")
    p.add_argument("--algo", choices=ALGO_CHOICES, default="exact")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    limits(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check a packing against its instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--packing", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("extract", help="read a 3-Partition cover off a height-11 packing")
    p.add_argument("--instance", required=True)
    p.add_argument("--packing", required=True)
    p.add_argument("--params")
    p.add_argument("--tp", help="3-Partition file to derive the parameters from")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("repack", help="rebuild a reference packing around the two-level box partition")
    p.add_argument("--instance", required=True)
    p.add_argument("--reference", help="reference packing (default: exact solver)")
    p.add_argument("--epsilon", required=True)
    p.add_argument("--delta")
    p.add_argument("--mu")
    p.add_argument("--out", required=True)
    p.add_argument("--partition", help="write the level-2 box partition here")
    p.add_argument("--classes", help="write the item classification here")
    limits(p)
    p.set_defaults(func=cmd_repack)

    p = sub.add_parser("render", help="draw a packing as SVG")
    p.add_argument("--instance", required=True)
    p.add_argument("--packing", required=True)
    p.add_argument("--classes", help="classification file from repack; colors items by class")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="run algorithms over instances, write CSV")
    p.add_argument("--dir", help="directory of instance JSON files")
    p.add_argument("--gen", type=int, default=0, help="also generate N random instances")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--width", type=int, default=20)
    p.add_argument("--items", type=int, default=8)
    p.add_argument("--algos", default="nfdh,ffdh,bl,exact")
    p.add_argument("--csv", help="output file (default: stdout)")
    p.add_argument("--plot", help="also draw a ratio chart (PNG) here")
    p.add_argument("--no-timing", action="store_true", help="write ms=0 so output is reproducible")
    limits(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LimitExceeded, TooLarge) as exc:
        print(f"limit: {exc}", file=sys.stderr)
        return LIMIT
    except ExtractionError as exc:
        print(f"extraction failed: {exc}", file=sys.stderr)
        return FAILED
    except (sio.BadInput, InvalidInput, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except StripPackError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED

if __name__ == "__main__":
    sys.exit(main())
