"""Preprocessing for the 4/3-type repacking: OPT guesses, the (delta, mu)
choice, item classes, height rounding and the first-level box partition.

All thresholds are exact fractions; they are compared against integer item
dimensions without any floating point.
"""
from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    Box,
    Instance,
    Item,
    Packing,
    Rect,
    StripPackError,
    area_lower_bound,
    find_overlaps,
    packing_from_rects,
    placed_rects,
)

CLASSES = ("L", "T", "V", "H", "S", "M")
LADDER_EXPONENT = 3


class NoFeasiblePair(StripPackError):
    pass


class DegenerateGrid(StripPackError):
    pass


class GridViolation(StripPackError):
    pass


class CapacityExceeded(StripPackError):
    pass


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def _floor(q: Fraction) -> int:
    return q.numerator // q.denominator


@dataclass(frozen=True)
class PartitionParams:
    epsilon: Fraction
    delta: Fraction
    mu: Fraction
    opt: int

    def __post_init__(self):
        for name in ("epsilon", "delta", "mu"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if not 0 < self.epsilon <= Fraction(1, 3):
            raise ValueError("epsilon must lie in (0, 1/3]")
        if not 1 >= self.delta > self.mu > 0:
            raise ValueError("need 1 >= delta > mu > 0")
        if self.mu > self.epsilon * self.delta / (2 * self.K):
            raise ValueError("mu too large: need mu <= epsilon*delta/(2K)")
        if self.opt < 0:
            raise ValueError("opt must be non-negative")

    @property
    def K(self) -> Fraction:
        """Box-count bound of the first-level partition, 5/(eps*delta)^2."""
        return 5 / (self.epsilon * self.delta) ** 2

    @property
    def grid(self) -> Fraction:
        return self.epsilon * self.delta * self.opt

    @property
    def grid_y(self) -> int:
        return _floor(self.grid)

    def grid_x(self, W: int) -> int:
        return _floor(self.epsilon * self.delta * W)


def opt_candidates(instance: Instance, epsilon) -> list[int]:
    """Geometric ladder of height guesses ``ceil(lb*(1+eps)^k)`` on ``[lb, 2 lb]``.

    ``2 lb`` is always included: Steinberg's algorithm packs any instance into
    height ``2 * max(area/W, h_max)``, so OPT lies in the scanned range and
    some guess is within a ``(1+eps)`` factor above it.
    """
    eps = as_fraction(epsilon)
    # pure arithmetic, so any step size in (0, 1) is fine here
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    lb = area_lower_bound(instance)
    if lb == 0:
        return [0]
    out = set()
    value = Fraction(lb)
    while _ceil(value) < 2 * lb:
        out.add(_ceil(value))
        value *= 1 + eps
    out.add(2 * lb)
    return sorted(out)


def delta_ladder(epsilon) -> Iterator[tuple[Fraction, Fraction]]:
    """Candidate ``(delta_j, mu_j)`` with ``delta_0 = eps`` and
    ``delta_{j+1} = mu_j = (eps * delta_j)^3 / 10``, for ``j = 0..ceil(2/eps)``.

    ``(eps*delta)^3/10`` equals ``eps*delta/(2K)``, the largest mu the
    relocation of crossed vertical items tolerates.

    Lazy on purpose: the numerator and denominator sizes triple with every
    rung, so the deep rungs are only computed if a caller really asks.
    """
    eps = as_fraction(epsilon)
    delta = eps
    for _ in range(_ceil(2 / eps) + 1):
        mu = (eps * delta) ** LADDER_EXPONENT / 10
        yield delta, mu
        delta = mu


def medium_band_area(instance: Instance, delta, mu, opt: int) -> int:
    """Area of items with width in [mu W, delta W) or height in [mu opt, delta opt)."""
    W = instance.W
    total = 0
    for it in instance.items:
        if mu * W <= it.w < delta * W or mu * opt <= it.h < delta * opt:
            total += it.area
    return total


def choose_delta_mu(instance: Instance, epsilon, opt: int) -> PartitionParams:
    """First rung of the ladder whose medium band has area at most ``eps * W * opt``.

    The bands of different rungs are disjoint, so the pigeonhole principle
    guarantees a light rung among the first ``ceil(1/eps) + 1`` once the total
    area is at most ``W * opt``.
    """
    eps = as_fraction(epsilon)
    if opt < area_lower_bound(instance):
        raise ValueError("opt is below the area lower bound")
    budget = eps * instance.W * opt
    for delta, mu in delta_ladder(eps):
        if medium_band_area(instance, delta, mu, opt) <= budget:
            return PartitionParams(eps, delta, mu, opt)
    raise NoFeasiblePair(f"no (delta, mu) keeps the medium area below eps*W*opt for opt={opt}")


def classify_items(instance: Instance, p: PartitionParams) -> dict[int, str]:
    W, opt = instance.W, p.opt
    dW, dH = p.delta * W, p.delta * opt
    mW, mH = p.mu * W, p.mu * opt
    third = Fraction(opt, 3)
    out = {}
    for it in instance.items:
        if it.w >= dW and it.h >= dH:
            cls = "L"
        elif it.w < dW and it.h > third:
            cls = "T"
        elif it.w < mW and dH <= it.h <= third:
            cls = "V"
        elif it.w >= dW and it.h < mH:
            cls = "H"
        elif it.w < mW and it.h < mH:
            cls = "S"
        else:
            cls = "M"
        out[it.id] = cls
    return out


def by_class(classification: dict[int, str]) -> dict[str, set[int]]:
    out: dict[str, set[int]] = {c: set() for c in CLASSES}
    for iid, cls in classification.items():
        out[cls].add(iid)
    return out


GRIDDED = ("L", "T", "V")


def round_heights(instance: Instance, classification: dict[int, str], p: PartitionParams) -> tuple[Instance, int]:
    """Round L, T and V heights up to the next multiple of ``floor(eps*delta*opt)``."""
    g = p.grid_y
    if g < 1:
        raise DegenerateGrid(f"eps*delta*opt = {p.grid} rounds to a zero grid")
    items = []
    for it in instance.items:
        if classification[it.id] in GRIDDED and it.h % g:
            it = Item(it.id, it.w, it.h + g - it.h % g)
        items.append(it)
    return Instance(instance.W, tuple(items)), g


def snap_reference(instance: Instance, classification: dict[int, str], g: int, packing: Packing) -> Packing:
    """Re-place a packing so every L/T/V item sits on the y-grid.

    Items keep their x and are dropped, in order of their old y, onto the
    skyline of the items already placed over their columns; gridded items are
    lifted to the next grid line. For an unchanged valid packing this never
    raises any item.
    """
    items = instance.by_id()
    order = sorted(packing.placements, key=lambda pl: (pl.y, pl.x, pl.item_id))
    placed: list[Rect] = []
    for pl in order:
        it = items[pl.item_id]
        y = max((r.top for r in placed if r.x < pl.x + it.w and pl.x < r.right), default=0)
        if classification[it.id] in GRIDDED and y % g:
            y += g - y % g
        placed.append(Rect(it.id, pl.x, y, it.w, it.h))
    return packing_from_rects(placed)


@dataclass
class PreparedReference:
    instance: Instance
    params: PartitionParams
    classification: dict[int, str]
    packing: Packing


def prepare_reference(instance: Instance, epsilon, packing: Packing, delta=None, mu=None,
                      max_rounds: int = 50) -> PreparedReference:
    """Classify, round and grid-snap a reference packing at a self-consistent opt.

    Starts from the reference height and raises the guess to the snapped
    height until the snapped packing fits under it.
    """
    eps = as_fraction(epsilon)
    opt = max(packing.height, area_lower_bound(instance))
    for _ in range(max_rounds):
        if delta is None:
            params = choose_delta_mu(instance, eps, opt)
        else:
            params = PartitionParams(eps, as_fraction(delta), as_fraction(mu), opt)
        cls = classify_items(instance, params)
        rounded, g = round_heights(instance, cls, params)
        snapped = snap_reference(rounded, cls, g, packing)
        if snapped.height <= opt:
            return PreparedReference(rounded, params, cls, snapped)
        opt = snapped.height
    raise GridViolation(f"snapping did not settle after {max_rounds} rounds")


@dataclass
class BoxPartition:
    area: tuple[int, int]
    boxes: list[Box]
    assignment: dict[int, int] = field(default_factory=dict)
    bound: Fraction | None = None

    def tiles(self) -> bool:
        W, H = self.area
        if sum(b.area for b in self.boxes) != W * H:
            return False
        if any(b.x < 0 or b.y < 0 or b.right > W or b.top > H for b in self.boxes):
            return False
        return not find_overlaps([b.as_rect(k) for k, b in enumerate(self.boxes)])

    def count(self, tag: str | None = None) -> int:
        return sum(1 for b in self.boxes if tag is None or b.tag == tag)


@dataclass
class Crossing:
    horizontal: set[int]
    vertical: set[int]
    tall: set[int]


def _subtract(lo: int, hi: int, cuts: list[tuple[int, int]]) -> list[tuple[int, int]]:
    pieces = [(lo, hi)]
    for a, b in cuts:
        nxt = []
        for p, q in pieces:
            if b <= p or q <= a:
                nxt.append((p, q))
                continue
            if p < a:
                nxt.append((p, a))
            if b < q:
                nxt.append((b, q))
        pieces = nxt
    return pieces


def _column_boxes(rows: list[tuple[int, int] | None], ys: list[int]) -> list[Box]:
    """Cut a vertical rectilinear piece (one x-interval per row) into rectangles.

    Every vertical edge of the piece is extended up and down through the
    interior until it meets the boundary; the faces that remain are rectangles.
    """
    xs = sorted({v for iv in rows if iv for v in iv})
    if not xs:
        return []
    nslab, nrow = len(xs) - 1, len(rows)
    inside = [[bool(rows[r]) and rows[r][0] <= xs[s] and xs[s + 1] <= rows[r][1] for r in range(nrow)]
              for s in range(nslab)]
    cut = {}
    for k, x in enumerate(xs):
        col = [False] * nrow
        for r, iv in enumerate(rows):
            if iv and x in iv:
                col[r] = True
        seeds = [r for r in range(nrow) if col[r]]
        for r in seeds:
            for step in (1, -1):
                q = r + step
                while 0 <= q < nrow and rows[q] and rows[q][0] < x < rows[q][1] and not col[q]:
                    col[q] = True
                    q += step
        cut[k] = col

    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        parent[find(a)] = find(b)

    for s in range(nslab):
        for r in range(nrow):
            if inside[s][r]:
                parent[(s, r)] = (s, r)
    for s in range(nslab):
        for r in range(nrow):
            if not inside[s][r]:
                continue
            if r + 1 < nrow and inside[s][r + 1]:
                union((s, r), (s, r + 1))
            if s + 1 < nslab and inside[s + 1][r] and not cut[s + 1][r]:
                union((s, r), (s + 1, r))
    faces: dict = {}
    for cell in parent:
        faces.setdefault(find(cell), []).append(cell)
    out = []
    for cells in faces.values():
        s0, s1 = min(c[0] for c in cells), max(c[0] for c in cells)
        r0, r1 = min(c[1] for c in cells), max(c[1] for c in cells)
        if len(cells) != (s1 - s0 + 1) * (r1 - r0 + 1):
            raise GridViolation("vertical piece did not split into rectangles")
        out.append(Box(xs[s0], ys[r0], xs[s1 + 1] - xs[s0], ys[r1 + 1] - ys[r0], "vertical"))
    return out


def build_level1_partition(instance: Instance, classification: dict[int, str], p: PartitionParams,
                           reference: Packing) -> tuple[BoxPartition, Crossing]:
    """Partition ``W x opt`` into large, horizontal and vertical boxes around a reference packing.

    Cells are ``grid_x`` wide and ``grid_y`` high. Each large item gets its own
    box; the rest of every cell becomes horizontal (no tall/vertical item in
    it), vertical (no horizontal item), or is split at the outermost
    tall/vertical edges into a vertical fragment flanked by horizontal ones.
    Horizontal parts merge along their row; vertical parts merge within their
    column and are then cut into rectangles.
    """
    W, opt = instance.W, p.opt
    gy, gx = p.grid_y, p.grid_x(W)
    if gy < 1 or gx < 1:
        raise DegenerateGrid(f"cell size {gx}x{gy} is degenerate")
    if reference.height > opt:
        raise ValueError(f"reference height {reference.height} exceeds opt={opt}")
    rects = placed_rects(instance, reference)
    for r in rects:
        if classification[r.id] in GRIDDED and (r.y % gy or r.h % gy):
            raise GridViolation(f"item {r.id} ({classification[r.id]}) is off the {gy}-grid")

    large = [r for r in rects if classification[r.id] == "L"]
    tallvert = [r for r in rects if classification[r.id] in ("T", "V")]
    horiz = [r for r in rects if classification[r.id] == "H"]

    xs = list(range(0, W, gx)) + [W]
    ys = list(range(0, opt, gy)) + [opt] if opt else [0]
    boxes: list[Box] = []
    assignment = {}
    for r in sorted(large, key=lambda r: r.id):
        assignment[r.id] = len(boxes)
        boxes.append(Box(r.x, r.y, r.w, r.h, "large"))

    n_rows, n_cols = len(ys) - 1, len(xs) - 1
    hrow: list[list[tuple[int, int]]] = [[] for _ in range(n_rows)]
    vcol: list[list[tuple[int, int] | None]] = [[None] * n_rows for _ in range(n_cols)]
    for ri in range(n_rows):
        y0, y1 = ys[ri], ys[ri + 1]
        row_large = [(r.x, r.right) for r in large if r.y < y1 and y0 < r.top]
        for ci in range(n_cols):
            free = _subtract(xs[ci], xs[ci + 1], row_large)
            if not free:
                continue
            if len(free) > 1:
                raise GridViolation("a large item sits strictly inside a cell")
            lo, hi = free[0]
            probe = Box(lo, y0, hi - lo, y1 - y0)
            tv = [r for r in tallvert if r.overlaps(probe)]
            hz = [r for r in horiz if r.overlaps(probe)]
            if not tv:
                hrow[ri].append((lo, hi))
            elif not hz:
                vcol[ci][ri] = (lo, hi)
            else:
                vl = max(lo, min(r.x for r in tv))
                vr = min(hi, max(r.right for r in tv))
                if lo < vl:
                    hrow[ri].append((lo, vl))
                if vr < hi:
                    hrow[ri].append((vr, hi))
                vcol[ci][ri] = (vl, vr)

    for ri, pieces in enumerate(hrow):
        merged: list[list[int]] = []
        for lo, hi in sorted(pieces):
            if merged and merged[-1][1] == lo:
                merged[-1][1] = hi
            else:
                merged.append([lo, hi])
        for lo, hi in merged:
            boxes.append(Box(lo, ys[ri], hi - lo, ys[ri + 1] - ys[ri], "horizontal"))
    for ci in range(n_cols):
        boxes.extend(_column_boxes(vcol[ci], ys))

    partition = BoxPartition((W, opt), boxes, assignment, p.K)
    crossing = Crossing(set(), set(), set())
    target = {"H": crossing.horizontal, "V": crossing.vertical, "T": crossing.tall}
    for r in horiz + tallvert:
        if not any(r.inside(b) for b in boxes if r.overlaps(b)):
            target[classification[r.id]].add(r.id)
    return partition, crossing


def crossing_rule_violations(partition: BoxPartition, rects: list[Rect], classification: dict[int, str]) -> list[int]:
    """Items of T, V or H cut by a box side parallel to their shorter edge."""
    bad = []
    for r in rects:
        cls = classification[r.id]
        if cls not in ("T", "V", "H"):
            continue
        for b in partition.boxes:
            if not r.overlaps(b):
                continue
            if cls == "H" and (r.x < b.x or r.right > b.right):
                bad.append(r.id)
                break
            if cls != "H" and (r.y < b.y or r.top > b.top):
                bad.append(r.id)
                break
    return bad


@dataclass
class Relocated:
    """Boxes in local coordinates (origin at the lower-left corner of the layer)."""

    horizontal_box: Box | None
    horizontal_items: list[Rect]
    vertical_boxes: list[Box]
    vertical_items: list[Rect]

    @property
    def vertical_width(self) -> int:
        return sum(b.w for b in self.vertical_boxes)


def relocate_crossing(h_items: list[Rect], v_items: list[Rect], p: PartitionParams, W: int) -> Relocated:
    """Move crossed horizontal items into one ``W x eps*opt`` box and crossed
    vertical items into equal-height boxes of total width at most ``eps*W/3``.
    """
    cap_h = _floor(p.epsilon * p.opt)
    hbox, hrects = None, []
    if h_items:
        y = 0
        for r in sorted(h_items, key=lambda r: (-r.w, r.id)):
            hrects.append(Rect(r.id, 0, y, r.w, r.h))
            y += r.h
        if y > cap_h:
            raise CapacityExceeded(f"crossed horizontal items need height {y} > eps*opt={cap_h}")
        hbox = Box(0, 0, W, cap_h, "horizontal")

    groups: dict[int, list[Rect]] = {}
    for r in v_items:
        groups.setdefault(r.h, []).append(r)
    vboxes, vrects = [], []
    x = 0
    for h in sorted(groups, reverse=True):
        start = x
        for r in sorted(groups[h], key=lambda r: r.id):
            vrects.append(Rect(r.id, x, 0, r.w, h))
            x += r.w
        vboxes.append(Box(start, 0, x - start, h, "vertical"))
    if x > p.epsilon * W / 3:
        raise CapacityExceeded(f"crossed vertical items need width {x} > eps*W/3")
    return Relocated(hbox, hrects, vboxes, vrects)
