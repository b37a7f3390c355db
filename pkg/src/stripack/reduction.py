"""3-Partition -> strip packing gadget.

A yes-instance of 3-Partition (3n integers summing to zero, to be split into n
zero-sum triples) becomes a strip packing instance whose optimum is exactly 11;
a no-instance needs height at least 12. This module builds the instance, lays
out the height-11 packing for a known triple cover, and reads a cover back out
of any height-11 packing.

Item ids are fixed by role so a packing can be interpreted without extra
metadata: ids ``1..3n`` are the solution rectangles (id ``i`` encodes
``s_i``), followed by the ``2n`` middle ``a x 2`` rectangles, the ``n`` middle
``b x 3`` rectangles, ``2n`` side ``(a+b) x 4``, ``2n-1`` side ``(a+b) x 5``,
one side ``a x 5`` and one side ``b x 5``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .core import (
    Instance,
    Item,
    Packing,
    Placement,
    StripPackError,
    checked,
    validate_packing,
)

STRIP_HEIGHT = 11


class InvalidInput(StripPackError, ValueError):
    pass


class InvalidCover(StripPackError, ValueError):
    pass


class ExtractionError(StripPackError):
    """The packing handed to :func:`extract_partition` is not a genuine height-11 packing."""


class NotTightlyPacked(ExtractionError):
    pass


class BadRun(ExtractionError):
    pass


@dataclass(frozen=True)
class ThreePartitionInstance:
    s: tuple[int, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(self.s))
        if self.n < 1 or len(self.s) != 3 * self.n:
            raise InvalidInput(f"expected 3n={3 * self.n} integers, got {len(self.s)}")
        if sum(self.s) != 0:
            raise InvalidInput(f"integers must sum to 0, got {sum(self.s)}")

    @property
    def M(self) -> int:
        return 1 + sum(abs(v) for v in self.s)


@dataclass(frozen=True)
class ReductionParams:
    n: int
    M: int
    a: int
    b: int
    W: int

    def __post_init__(self):
        if not (self.a > 3 * self.M and self.b > 3 * self.M and self.b % 3 == 0):
            raise InvalidInput("a, b must exceed 3M and b must be divisible by 3")
        if self.W != 2 * (self.a + self.b) * self.n:
            raise InvalidInput("W must equal 2(a+b)n")


@dataclass(frozen=True)
class TripleCover:
    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(tuple(t) for t in self.triples))

    def canonical(self) -> frozenset:
        """Order-insensitive form: a multiset of triples, each a sorted tuple."""
        counts: dict[tuple, int] = {}
        for t in self.triples:
            key = tuple(sorted(t))
            counts[key] = counts.get(key, 0) + 1
        return frozenset(counts.items())

    def same_as(self, other: "TripleCover") -> bool:
        return self.canonical() == other.canonical()

    def is_valid_for(self, tp: ThreePartitionInstance) -> bool:
        flat = sorted(i for t in self.triples for i in t)
        if flat != list(range(1, 3 * tp.n + 1)) or any(len(t) != 3 for t in self.triples):
            return False
        return all(sum(tp.s[i - 1] for i in t) == 0 for t in self.triples)


def pick_ab(n: int, M: int) -> tuple[int, int]:
    """Pick ``(a, b)`` with ``b = max(9n, 3M) + 3`` and ``a = b**2``.

    For ``|x|, |y|, |z| < b`` the equation ``a*x + b*y + z = 0`` then forces
    ``z = 0`` (mod b), ``y = 0`` (mod b^2) and finally ``x = 0``.
    """
    if n < 1 or M < 1:
        raise InvalidInput("n and M must be positive")
    b = checked(max(9 * n, 3 * M) + 3)
    a = checked(b * b)
    return a, b


def make_params(tp: ThreePartitionInstance) -> ReductionParams:
    a, b = pick_ab(tp.n, tp.M)
    return ReductionParams(n=tp.n, M=tp.M, a=a, b=b, W=checked(2 * (a + b) * tp.n))


# role name -> (width, height) given params; order defines the id layout
def _role_blocks(params: ReductionParams):
    n, a, b = params.n, params.a, params.b
    return [
        ("mid_a", 2 * n, a, 2),
        ("mid_b", n, b, 3),
        ("side4", 2 * n, a + b, 4),
        ("side5", 2 * n - 1, a + b, 5),
        ("side_a", 1, a, 5),
        ("side_b", 1, b, 5),
    ]


def item_roles(params: ReductionParams) -> dict[int, str]:
    roles = {i: "solution" for i in range(1, 3 * params.n + 1)}
    next_id = 3 * params.n + 1
    for role, count, _, _ in _role_blocks(params):
        for _ in range(count):
            roles[next_id] = role
            next_id += 1
    return roles


def is_side(role: str) -> bool:
    return role.startswith("side")


def build_instance(tp: ThreePartitionInstance) -> tuple[Instance, ReductionParams]:
    params = make_params(tp)
    third = params.b // 3
    items = [Item(i + 1, third + s, 1) for i, s in enumerate(tp.s)]
    next_id = 3 * tp.n + 1
    for _, count, w, h in _role_blocks(params):
        for _ in range(count):
            items.append(Item(next_id, w, h))
            next_id += 1
    return Instance(params.W, tuple(items)), params


def _ids_by_role(params: ReductionParams) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for iid, role in sorted(item_roles(params).items()):
        out.setdefault(role, []).append(iid)
    return out


def canonical_packing(instance: Instance, params: ReductionParams, cover: TripleCover) -> Packing:
    """Lay out the height-11 packing for a valid triple cover.

    Bottom row: side rectangles of heights 5, 4, 5, 4, ... from x=0. Top row:
    ``b x 5``, then 4, 5, 4, ..., and ``a x 5`` last. Middle row, per period
    ``2(a+b)``: the three solution rectangles of one triple, ``a x 2``,
    ``b x 3``, ``a x 2``.
    """
    n, a, b = params.n, params.a, params.b
    widths = {it.id: it.w for it in instance.items}
    flat = sorted(i for t in cover.triples for i in t)
    if len(cover.triples) != n or flat != list(range(1, 3 * n + 1)):
        raise InvalidCover("cover must split the indices 1..3n into n triples")
    for t in cover.triples:
        if len(t) != 3 or sum(widths[i] for i in t) != b:
            raise InvalidCover(f"triple {t} does not have total width b={b}")

    ids = _ids_by_role(params)
    side4, side5 = iter(ids["side4"]), iter(ids["side5"])
    mid_a, mid_b = iter(ids["mid_a"]), iter(ids["mid_b"])
    period = 2 * (a + b)
    out: list[Placement] = []

    for k in range(n):
        out.append(Placement(next(side5), k * period, 0))
        out.append(Placement(next(side4), k * period + a + b, 0))

    out.append(Placement(ids["side_b"][0], 0, 6))
    for j in range(2 * n - 1):
        x = b + j * (a + b)
        out.append(Placement(next(side4), x, 7) if j % 2 == 0 else Placement(next(side5), x, 6))
    out.append(Placement(ids["side_a"][0], params.W - a, 6))

    for k, triple in enumerate(cover.triples):
        x = k * period
        for i in triple:
            out.append(Placement(i, x, 5))
            x += widths[i]
        out.append(Placement(next(mid_a), x, 5))
        out.append(Placement(next(mid_b), x + a, 4))
        out.append(Placement(next(mid_a), x + a + b, 4))

    return Packing(tuple(sorted(out, key=lambda p: p.item_id)), STRIP_HEIGHT)


def _rects_with_roles(instance, params, packing):
    roles = item_roles(params)
    items = instance.by_id()
    rects = []
    for p in packing.placements:
        it = items[p.item_id]
        rects.append((p.x, p.x + it.w, p.y, it, roles[it.id]))
    return rects


def extract_partition(instance: Instance, params: ReductionParams, packing: Packing) -> TripleCover:
    """Read a triple cover off a height-11 packing.

    Every vertical line in general position must cross two side rectangles and
    one middle rectangle; the middle rectangles then form a single left-to-right
    sequence in which each maximal run of solution rectangles is a zero-sum
    triple. Ties between several valid covers resolve to the left-to-right one.
    """
    if packing.height > STRIP_HEIGHT:
        raise NotTightlyPacked(f"height {packing.height} exceeds {STRIP_HEIGHT}")
    report = validate_packing(instance, packing)
    if not report.ok:
        raise NotTightlyPacked(f"packing is not valid: {report}")

    rects = _rects_with_roles(instance, params, packing)
    # coverage is constant between consecutive rectangle sides, so one probe
    # column per elementary interval stands for every unit column inside it
    xs = sorted({0, params.W} | {r[0] for r in rects} | {r[1] for r in rects})
    for lo, hi in zip(xs, xs[1:]):
        if lo >= params.W:
            break
        covering = [r for r in rects if r[0] <= lo < r[1]]
        sides = sum(1 for r in covering if is_side(r[4]))
        if len(covering) != 3 or sides != 2:
            raise NotTightlyPacked(
                f"line at x={lo}+1/2 meets {sides} side and {len(covering) - sides} middle rectangles"
            )

    middle = sorted((r for r in rects if not is_side(r[4])), key=lambda r: r[0])
    pos = 0
    for r in middle:
        if r[0] != pos:
            raise NotTightlyPacked(f"middle rectangles leave a gap or overlap at x={pos}")
        pos = r[1]
    if pos != params.W:
        raise NotTightlyPacked("middle rectangles do not reach the right side of the strip")

    triples = []
    run: list = []
    for r in middle + [None]:
        if r is not None and r[4] == "solution":
            run.append(r)
            continue
        if run:
            width = sum(x[1] - x[0] for x in run)
            if len(run) != 3 or width != params.b:
                raise BadRun(f"run of {len(run)} solution rectangles with width {width} (b={params.b})")
            triples.append(tuple(x[3].id for x in run))
            run = []
    return TripleCover(tuple(triples))


@dataclass
class XReport:
    violations: list[tuple[int, int]]  # (x, item id)
    decompositions: dict[int, tuple[int, int]]
    mirrored: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations


def decompose_x(x: int, params: ReductionParams) -> tuple[int, int] | None:
    """Write ``x = a*n_a + b*n_b`` with ``n_b - n_a`` in {0, 1} and both in [0, 2n]."""
    a, b = params.a, params.b
    for d in (0, 1):
        rest = x - d * b
        if rest >= 0 and rest % (a + b) == 0:
            n_a = rest // (a + b)
            if n_a + d <= 2 * params.n:
                return n_a, n_a + d
    return None


def check_x_coordinates(instance: Instance, params: ReductionParams, packing: Packing) -> XReport:
    """Check every side-rectangle boundary against the ``a*n_a + b*n_b`` form.

    The packing is mirrored first when the ``a x 5`` rectangle sits left of the
    ``b x 5`` one, so the ``n_b - n_a`` offset is always 0 or 1.
    """
    rects = _rects_with_roles(instance, params, packing)
    where = {r[4]: r[0] for r in rects if r[4] in ("side_a", "side_b")}
    mirrored = where.get("side_b", 0) > where.get("side_a", params.W)
    report = XReport([], {}, mirrored)
    for lo, hi, _, it, role in rects:
        if not is_side(role):
            continue
        if mirrored:
            lo, hi = params.W - hi, params.W - lo
        for x in (lo, hi):
            dec = decompose_x(x, params)
            if dec is None:
                report.violations.append((x, it.id))
            else:
                report.decompositions[x] = dec
    report.violations.sort()
    return report


def random_yes_instance(n: int, r: int, rng: random.Random) -> tuple[ThreePartitionInstance, TripleCover]:
    """n zero-sum triples with entries in [-r, r], shuffled; returns the hidden cover too."""
    values = []
    for _ in range(n):
        while True:
            x, y = rng.randint(-r, r), rng.randint(-r, r)
            if -r <= -(x + y) <= r:
                values.append((x, y, -(x + y)))
                break
    flat = [(v, k) for k, t in enumerate(values) for v in t]
    order = list(range(3 * n))
    rng.shuffle(order)
    s = [flat[j][0] for j in order]
    triples: dict[int, list[int]] = {}
    for pos, j in enumerate(order):
        triples.setdefault(flat[j][1], []).append(pos + 1)
    cover = TripleCover(tuple(tuple(triples[k]) for k in range(n)))
    return ThreePartitionInstance(tuple(s), n), cover


def random_no_instance(n: int, r: int, rng: random.Random, attempts: int = 1000) -> ThreePartitionInstance:
    """Perturb a yes-instance across two triples until brute force finds no cover."""
    from .solvers import brute_force_3partition

    if n < 2:
        raise InvalidInput("every n=1 instance summing to zero is a yes-instance")
    for _ in range(attempts):
        tp, cover = random_yes_instance(n, r, rng)
        s = list(tp.s)
        t1, t2 = rng.sample(range(n), 2)
        i, j = rng.choice(cover.triples[t1]), rng.choice(cover.triples[t2])
        s[i - 1] += 1
        s[j - 1] -= 1
        cand = ThreePartitionInstance(tuple(s), n)
        if brute_force_3partition(cand) is None:
            return cand
    raise InvalidInput(f"no no-instance found in {attempts} attempts")
