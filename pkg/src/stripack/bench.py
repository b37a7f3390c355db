"""Benchmark harness: run algorithms over named instances and emit CSV rows."""
from __future__ import annotations

import csv
import io
import random
import time
from dataclasses import dataclass
from fractions import Fraction

from .core import Instance, Item, area_lower_bound, validate_packing
from .solvers import LimitExceeded, SolverConfig, solve

CSV_HEADER = ("instance", "algo", "height", "lb", "ratio", "ms", "valid")
ALGO_ALIASES = {"bl": "bottom_left"}


@dataclass(frozen=True)
class BenchRow:
    instance: str
    algo: str
    height: int
    lb: int
    ratio: float
    ms: int
    valid: bool

    def cells(self) -> list[str]:
        return [self.instance, self.algo, str(self.height), str(self.lb), f"{self.ratio:.4f}",
                str(self.ms), "true" if self.valid else "false"]


def random_instances(count: int, seed: int, *, W: int = 20, max_items: int = 8,
                     max_side: int = 12) -> list[tuple[str, Instance]]:
    rng = random.Random(seed)
    out = []
    for k in range(count):
        n = rng.randint(2, max_items)
        items = tuple(Item(i + 1, rng.randint(1, min(W, max_side)), rng.randint(1, max_side)) for i in range(n))
        out.append((f"rand{k:03d}", Instance(W, items)))
    return out


def run_bench(instances, algos, config: SolverConfig | None = None, *, timing: bool = True) -> list[BenchRow]:
    """One row per (instance, algorithm), sorted by instance name then algorithm.

    An exact run that hits its limit reports its incumbent, marked not
    proven by a trailing ``*`` on the algorithm name.
    """
    base = config or SolverConfig()
    rows = []
    for name, inst in instances:
        lb = area_lower_bound(inst)
        for algo in algos:
            real = ALGO_ALIASES.get(algo, algo)
            cfg = SolverConfig(real, base.node_limit, base.time_limit_ms, base.item_cap)
            label = algo
            t0 = time.perf_counter()
            try:
                pk = solve(inst, cfg)
            except LimitExceeded as exc:
                pk, label = exc.incumbent, algo + "*"
            ms = round((time.perf_counter() - t0) * 1000) if timing else 0
            ok = validate_packing(inst, pk).ok
            ratio = float(Fraction(pk.height, lb)) if lb else 1.0
            rows.append(BenchRow(name, label, pk.height, lb, ratio, ms, ok))
    rows.sort(key=lambda r: (r.instance, r.algo))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()
