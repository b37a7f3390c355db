"""Rearranging tall and vertical items inside vertical boxes, and the level-2 partition.

Every rearrangement here ends with an overlap sweep over its own output
(``core.find_overlaps``), so a wrong case split shows up as
:class:`InvariantBroken` instead of a silently broken packing.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .core import Box, Rect, StripPackError, find_overlaps


class InvariantBroken(StripPackError):
    pass


class TooManyDistinctHeights(StripPackError):
    pass


class StripOverflow(StripPackError):
    pass


class GapDeficit(StripPackError):
    pass


class SmallItemOverflow(StripPackError):
    pass


@dataclass
class Group:
    box: Box
    h: int
    members: list[Rect]


@dataclass
class GroupedBoxes:
    groups: list[Group] = field(default_factory=list)
    # Crossing items that stay where they are; they get their own boxes one level up.
    fixed: list[Rect] = field(default_factory=list)

    def rects(self) -> list[Rect]:
        return [r for g in self.groups for r in g.members] + list(self.fixed)

    def __len__(self) -> int:
        return len(self.groups)

    def extend(self, other: "GroupedBoxes") -> None:
        self.groups.extend(other.groups)
        seen = {r.id for r in self.fixed}
        self.fixed.extend(r for r in other.fixed if r.id not in seen)

    def check(self) -> None:
        for g in self.groups:
            if g.box.h != g.h:
                raise InvariantBroken(f"group box height {g.box.h} != item height {g.h}")
            for r in g.members:
                if r.h != g.h or not r.inside(g.box):
                    raise InvariantBroken(f"item {r.id} does not sit flat in its {g.h}-high group box")
            if sum(r.w for r in g.members) > g.box.w:
                raise InvariantBroken("group members are wider than their box")


@dataclass
class VerticalBoxScene:
    box: Box
    top: list[Rect]
    bottom: list[Rect]
    crossing: frozenset = frozenset()
    verticals: list[Rect] = field(default_factory=list)

    @property
    def tall(self) -> list[Rect]:
        return list(self.top) + list(self.bottom)

    def check(self) -> None:
        ids = {r.id for r in self.tall}
        if not set(self.crossing) <= ids:
            raise InvariantBroken("crossing ids must name tall items of the scene")
        for r in self.tall:
            inside = self.box.x <= r.x and r.right <= self.box.right
            if inside != (r.id not in self.crossing):
                raise InvariantBroken(f"tall item {r.id}: crossing flag disagrees with its position")
            if r.y < self.box.y or r.top > self.box.top:
                raise InvariantBroken(f"tall item {r.id} leaves the box vertically")
        for v in self.verticals:
            if v.w != 1 or not v.inside(self.box):
                raise InvariantBroken(f"vertical slice {v.id} must be unit width and inside the box")
        for x in range(self.box.x, self.box.right):
            if sum(1 for r in self.tall if r.x <= x < r.right) > 2:
                raise InvariantBroken(f"column {x} meets more than two tall items")
        hits = find_overlaps(self.tall + list(self.verticals))
        if hits:
            raise InvariantBroken(f"scene overlaps: {hits[:3]}")


def split_top_bottom(box: Box, tall: list[Rect]) -> tuple[list[Rect], list[Rect]]:
    """Top items have another tall item below them in some column, bottom items one above.

    An item sharing no column with another tall item goes to the side it is
    closer to.
    """
    top, bottom = [], []
    for r in tall:
        above = below = False
        for o in tall:
            if o is r or not (o.x < r.right and r.x < o.right):
                continue
            if o.y >= r.top:
                above = True
            elif o.top <= r.y:
                below = True
        if above and below:
            raise InvariantBroken(f"item {r.id} is sandwiched between two tall items")
        if below or (not above and r.y - box.y > box.top - r.top):
            top.append(r)
        else:
            bottom.append(r)
    return top, bottom


def scene_from_items(box: Box, tall: list[Rect], verticals: list[Rect] = ()) -> VerticalBoxScene:
    top, bottom = split_top_bottom(box, tall)
    crossing = frozenset(r.id for r in tall if r.x < box.x or r.right > box.right)
    return VerticalBoxScene(box, top, bottom, crossing, list(verticals))


def slice_unit(r: Rect) -> list[Rect]:
    return [Rect(r.id, r.x + k, r.y, 1, r.h) for k in range(r.w)]


# ---------------------------------------------------------------- unit stacks

def _group_columns(columns: list[list[Rect]], x0: int) -> list[Group]:
    """Maximal runs of adjacent columns holding an item with the same (y, h)."""
    groups: list[Group] = []
    open_runs: dict[tuple[int, int], Group] = {}
    for k, col in enumerate(columns):
        nxt = {}
        for r in col:
            key = (r.y, r.h)
            g = open_runs.get(key)
            if g is not None and g.box.right == x0 + k:
                g.members.append(r)
                g.box = Box(g.box.x, g.box.y, g.box.w + 1, g.h, "vertical")
            else:
                g = Group(Box(x0 + k, r.y, 1, r.h, "vertical"), r.h, [r])
                groups.append(g)
            nxt[key] = g
        open_runs = nxt
    return groups


def stack_unit_verticals(items: list[Rect], region: Box, *, max_heights=None,
                         max_per_strip=None) -> GroupedBoxes:
    """Restack unit-width items in ``region`` so equal heights line up.

    Each unit strip is stacked tallest first from the region bottom, then the
    strips are reordered so the strip with the most items of the largest
    height comes first, ties broken on the next height, and so on.
    """
    if not items:
        return GroupedBoxes()
    if any(r.w != 1 for r in items):
        raise InvariantBroken("stack_unit_verticals takes unit-width items only")
    heights = sorted({r.h for r in items}, reverse=True)
    if max_heights is not None and len(heights) > max_heights:
        raise TooManyDistinctHeights(f"{len(heights)} distinct heights, at most {max_heights} allowed")
    strips: dict[int, list[Rect]] = {}
    for r in items:
        strips.setdefault(r.x, []).append(r)
    if len(strips) > region.w:
        raise StripOverflow(f"{len(strips)} strips do not fit a region {region.w} wide")
    order = []
    for x, col in strips.items():
        col.sort(key=lambda r: (-r.h, r.id))
        if max_per_strip is not None and len(col) > max_per_strip:
            raise StripOverflow(f"strip {x} holds {len(col)} items, at most {max_per_strip} allowed")
        if sum(r.h for r in col) > region.h:
            raise StripOverflow(f"strip {x} is {sum(r.h for r in col)} high, region only {region.h}")
        count = Counter(r.h for r in col)
        order.append((tuple(-count[h] for h in heights), x, col))
    order.sort(key=lambda t: (t[0], t[1]))
    columns = []
    for k, (_, _, col) in enumerate(order):
        y = region.y
        placed = []
        for r in col:
            placed.append(Rect(r.id, region.x + k, y, 1, r.h))
            y += r.h
        columns.append(placed)
    return GroupedBoxes(_group_columns(columns, region.x))


# ------------------------------------------------------------ crossing split

def split_for_crossing(scene: VerticalBoxScene) -> list[VerticalBoxScene]:
    """Cut the box at the inner edges of crossing top items.

    Below each such item the cut leaves a face in which every crossing item
    is a bottom item; verticals above it get a face of their own.
    """
    box = scene.box
    cross_top = [r for r in scene.top if r.id in scene.crossing]
    if not cross_top:
        return [scene]
    cuts = {box.x, box.right}
    for r in cross_top:
        cuts.update(v for v in (r.x, r.right) if box.x < v < box.right)
    xs = sorted(cuts)
    out = []
    for lo, hi in zip(xs, xs[1:]):
        roof = next((r for r in cross_top if r.x <= lo and hi <= r.right), None)
        faces = [(box.y, box.top)] if roof is None else [(box.y, roof.y), (roof.top, box.top)]
        for y0, y1 in faces:
            if y1 <= y0:
                continue
            sub = Box(lo, y0, hi - lo, y1 - y0, "vertical")
            tall = [r for r in scene.tall if r is not roof and r.overlaps(sub)]
            verts = [v for v in scene.verticals if v.inside(sub)]
            if roof is not None and y0 == roof.top and not verts:
                continue
            bottom = [r for r in tall if r in scene.bottom or r.id in scene.crossing or r.x < lo or r.right > hi]
            top = [r for r in tall if r not in bottom]
            crossing = frozenset(r.id for r in tall if r.x < lo or r.right > hi)
            out.append(VerticalBoxScene(sub, top, bottom, crossing, verts))
    return out


# ------------------------------------------------------------ tall rearrange

class _Piece:
    """A movable (or pinned) item along the x-axis of one box.

    ``h`` is the extent measured from the side the piece is anchored to, so
    for a pinned bottom item it is the distance from its top to the box floor.
    """

    __slots__ = ("id", "x", "w", "h", "side", "rect")

    def __init__(self, rect: Rect, side: str, h: int):
        self.id, self.x, self.w, self.h, self.side, self.rect = rect.id, rect.x, rect.w, h, side, rect

    @property
    def right(self) -> int:
        return self.x + self.w


def _crossing(pieces, line):
    return next((p for p in pieces if p.x < line < p.right), None)


def _pack(pieces, lo: int, hi: int, increasing: bool) -> None:
    if not pieces:
        return
    width = sum(p.w for p in pieces)
    if width > hi - lo:
        raise InvariantBroken(f"segment [{lo},{hi}) cannot hold width {width}")
    if increasing:
        pieces = sorted(pieces, key=lambda p: (p.h, p.id))
        x = hi - width
    else:
        pieces = sorted(pieces, key=lambda p: (-p.h, p.id))
        x = lo
    for p in pieces:
        p.x = x
        x += p.w


def _assign(pieces, segments):
    """Drop each piece into the segment containing it; ``segments`` are (lo, hi, increasing)."""
    bins = [[] for _ in segments]
    for p in pieces:
        for k, (lo, hi, _) in enumerate(segments):
            if lo <= p.x and p.right <= hi:
                bins[k].append(p)
                break
        else:
            raise InvariantBroken(f"item {p.id} falls into no segment")
    for (lo, hi, inc), members in zip(segments, bins):
        _pack(members, lo, hi, inc)


class _TallSolver:
    def __init__(self, H: int, max_steps: int):
        self.H = H
        self.steps = 0
        self.max_steps = max_steps

    def solve(self, x0, x1, tops, bots, left, right):
        if left is not None and left is right:
            if bots:
                raise InvariantBroken("bottom items under an item spanning the whole box")
            _pack(tops, x0, x1, False)
            return
        if right is not None and (left is None or right.h > left.h):
            everything = tops + bots + [right] + ([left] if left else [])
            for p in everything:
                p.x = x0 + x1 - p.right
            self.solve(x0, x1, tops, bots, right, left)
            for p in everything:
                p.x = x0 + x1 - p.right
            return
        if left is None:
            _pack(tops, x0, x1, False)
            _pack(bots, x0, x1, True)
            return
        self.steps += 1
        if self.steps > self.max_steps:
            raise InvariantBroken("tall rearrangement did not terminate")
        hits = [t for t in tops if t.h + left.h > self.H]
        if hits:
            self._with_roof(x0, x1, tops, bots, left, right, min(hits, key=lambda t: t.x))
        else:
            self._without_roof(x0, x1, tops, bots, left, right)

    @staticmethod
    def _top_segments(tops, b0, x0, x1, left_is_b0):
        t1 = None if left_is_b0 else _crossing(tops, b0.x)
        t2 = _crossing(tops, b0.right)
        c1, c2 = max(b0.x, x0), min(b0.right, x1)
        if t1 is not None and t1 is t2:
            segs = [(x0, t1.x, False), (t1.right, x1, True)]
        else:
            segs = [
                (x0, t1.x if t1 else c1, False),
                (t1.right if t1 else c1, t2.x if t2 else c2, False),
                (t2.right if t2 else c2, x1, True),
            ]
        return [t for t in tops if t is not t1 and t is not t2], segs

    def _with_roof(self, x0, x1, tops, bots, left, right, tt):
        vl, vr = tt.x, tt.right
        b1 = _crossing(bots, vl)
        b2 = _crossing(bots + ([right] if right else []), vr)
        lim = b1.x if b1 else vl
        cands = [left] + [b for b in bots if b.x >= left.right and b.right <= lim]
        b0 = max(cands, key=lambda b: (b.h, b is left, -b.x))
        tops_l = [t for t in tops if t.right <= vl]
        movable, segs = self._top_segments(tops_l, b0, x0, vl, b0 is left)
        _assign(movable, segs)
        pivots = {id(b0), id(b1), id(b2)}
        bsegs = []
        if b0 is not left:
            bsegs.append((left.right, b0.x, True))
        bsegs.append((b0.right, b1.x if b1 else vl, False))
        if b1 is None or b1 is not b2:
            bsegs.append((b1.right if b1 else vl, b2.x if b2 else vr, False))
        _assign([b for b in bots if b.right <= vr and id(b) not in pivots], bsegs)
        if vr < x1:
            rest_t = [t for t in tops if t.x >= vr]
            rest_b = [b for b in bots if b.x >= vr]
            self.solve(vr, x1, rest_t, rest_b, b2, right)

    def _without_roof(self, x0, x1, tops, bots, left, right):
        b0 = max([left] + bots, key=lambda b: (b.h, b is left, -b.x))
        movable, segs = self._top_segments(tops, b0, x0, x1, b0 is left)
        _assign(movable, segs)
        bsegs = []
        if b0 is not left:
            bsegs.append((left.right, b0.x, True))
        bsegs.append((b0.right, right.x if right else x1, False))
        _assign([b for b in bots if b is not b0], bsegs)


def _group_rows(rects: list[Rect], sides: dict[int, str]) -> list[Group]:
    """Maximal runs of touching items with equal height, side, row and kind."""
    groups: list[Group] = []
    for r in sorted(rects, key=lambda r: (sides[id(r)], r.y, r.x)):
        g = groups[-1] if groups else None
        if (g is not None and g.h == r.h and g.box.y == r.y and g.box.right == r.x
                and sides[id(g.members[-1])] == sides[id(r)] and (g.members[-1].id < 0) == (r.id < 0)):
            g.members.append(r)
            g.box = Box(g.box.x, g.box.y, g.box.w + r.w, g.h, "vertical")
        else:
            groups.append(Group(Box(r.x, r.y, r.w, r.h, "vertical"), r.h, [r]))
    return groups


def rearrange_tall(scene: VerticalBoxScene) -> GroupedBoxes:
    """Shift top items up and bottom items down, then sort them into equal-height runs.

    Crossing items must all be bottom items (see :func:`split_for_crossing`);
    they keep their coordinates. Negative ids mark glued pseudo-items, which
    are never grouped with real items.
    """
    box = scene.box
    cross = [r for r in scene.bottom if r.id in scene.crossing]
    if any(r.id in scene.crossing for r in scene.top) or len(cross) > 2:
        raise InvariantBroken("crossing items must be at most two bottom items")
    tops = [_Piece(r, "t", r.h) for r in scene.top]
    bots = [_Piece(r, "b", r.h) for r in scene.bottom if r.id not in scene.crossing]
    pinned = {r.id: _Piece(r, "b", r.top - box.y) for r in cross}
    left = next((p for p in pinned.values() if p.x < box.x), None)
    right = next((p for p in pinned.values() if p.right > box.right), None)
    if len(pinned) == 2 and (left is None or right is None or left is right):
        raise InvariantBroken("two crossing items must cross different box edges")
    _TallSolver(box.h, len(tops) + len(bots) + 2).solve(box.x, box.right, tops, bots, left, right)

    out, sides = [], {}
    for p in tops + bots:
        y = box.top - p.rect.h if p.side == "t" else box.y
        r = Rect(p.id, p.x, y, p.rect.w, p.rect.h)
        sides[id(r)] = p.side
        out.append(r)
    fixed = [p.rect for p in pinned.values()]
    hits = find_overlaps(out + fixed)
    if hits:
        raise InvariantBroken(f"rearranged items overlap: {hits[:3]}")
    return GroupedBoxes(_group_rows(out, sides), fixed)


def tall_group_bound(epsilon, delta) -> Fraction:
    e, d = Fraction(epsilon), Fraction(delta)
    return 14 / (e * e * d * d)


def unit_group_bound(epsilon, delta) -> Fraction:
    e, d = Fraction(epsilon), Fraction(delta)
    return 15 / (e**4 * d**5)


# ------------------------------------------------------------ unit verticals

@dataclass
class UnitResult:
    bprime: Box
    prime: GroupedBoxes
    bsecond: Box | None
    second: GroupedBoxes
    gap_area: int = 0
    h0: int = 0

    def group_count(self) -> int:
        return len(self.prime) + len(self.second)


class _Glue:
    """Per-column bookkeeping of one sub-scene before the tall rearrangement."""

    def __init__(self, sub: VerticalBoxScene, next_id):
        self.pseudo_top: list[Rect] = []
        self.pseudo_bottom: list[Rect] = []
        self.members: dict[int, list[Rect]] = {}
        self.below: dict[int, list[Rect]] = {}
        self.between: list[list[Rect]] = []
        box = sub.box
        cols: dict[int, list[Rect]] = {}
        for v in sub.verticals:
            cols.setdefault(v.x, []).append(v)
        for x, verts in sorted(cols.items()):
            verts.sort(key=lambda v: v.y)
            here = [r for r in sub.tall if r.x <= x < r.right]
            pinned = next((r for r in here if r.id in sub.crossing), None)
            has_top = any(r in sub.top for r in here)
            has_bottom = any(r in sub.bottom for r in here)
            if pinned is not None:
                under = [v for v in verts if v.top <= pinned.y]
                if under:
                    self.below.setdefault(pinned.id, []).extend(under)
                verts = [v for v in verts if v.top > pinned.y]
            if not verts:
                continue
            if has_top and has_bottom:
                self.between.append(verts)
                continue
            pid = next_id()
            height = sum(v.h for v in verts)
            self.members[pid] = verts
            if has_bottom:
                self.pseudo_top.append(Rect(pid, x, box.top - height, 1, height))
            else:
                self.pseudo_bottom.append(Rect(pid, x, box.y, 1, height))


def _unglue(groups: GroupedBoxes, members: dict[int, list[Rect]]) -> GroupedBoxes:
    """Replace groups of pseudo-items by equal-height boxes of their slices."""
    out = GroupedBoxes(fixed=list(groups.fixed))
    for g in groups.groups:
        if g.members[0].id >= 0:
            out.groups.append(g)
            continue
        slices = [v.moved(x=p.x) for p in g.members for v in members[p.id]]
        out.extend(stack_unit_verticals(slices, g.box))
    return out


def _free_runs(occupied: list[Rect], region: Box, h0: int) -> list[tuple[int, int, int]]:
    """Runs ``(x, y, width)`` of adjacent columns sharing a free ``h0``-high window.

    Each column offers its longest free interval; a run grows while the
    intersection of those intervals stays at least ``h0`` high.
    """
    best = []
    for x in range(region.x, region.right):
        ivs = sorted((r.y, r.top) for r in occupied if r.x <= x < r.right)
        lo, gaps = region.y, []
        for a, b in ivs:
            if a > lo:
                gaps.append((lo, a))
            lo = max(lo, b)
        if lo < region.top:
            gaps.append((lo, region.top))
        best.append(max(gaps, key=lambda g: (g[1] - g[0], -g[0]), default=None))
    runs = []
    start = None
    lo = hi = 0
    for k, gap in enumerate(best + [None]):
        if start is not None and gap is not None and max(lo, gap[0]) + h0 <= min(hi, gap[1]):
            lo, hi = max(lo, gap[0]), min(hi, gap[1])
            continue
        if start is not None:
            runs.append((region.x + start, lo, k - start))
            start = None
        if gap is not None and gap[1] - gap[0] >= h0:
            start, (lo, hi) = k, gap
    return runs


def _gap_area(occupied: list[Rect], region: Box) -> int:
    total = 0
    for x in range(region.x, region.right):
        used = sum(r.h for r in occupied if r.x <= x < r.right and r.y >= region.y and r.top <= region.top)
        total += region.h - used
    return total


def rearrange_unit(scene: VerticalBoxScene, epsilon, *, delta=None, expand: bool = True,
                   base_height: int | None = None) -> UnitResult:
    """Regroup tall items and unit-width verticals of one box into equal-height boxes.

    With ``expand`` the box is first raised to ``floor((1 + 2 eps) h)``;
    without it the caller has already stretched the layout and passes the
    pre-stretch height as ``base_height``. Verticals caught between a top and
    a bottom item in their column leave the box: the ``ceil(eps w)`` shortest
    columns of them go into free windows of B', the rest into B'' on top.
    """
    eps = Fraction(epsilon)
    box = scene.box
    base_h = base_height if base_height is not None else box.h
    if expand:
        bp = Box(box.x, box.y, box.w, math.floor((1 + 2 * eps) * box.h), box.tag)
    else:
        bp = box
    work = VerticalBoxScene(bp, scene.top, scene.bottom, scene.crossing, scene.verticals)
    counter = [0]

    def next_id():
        counter[0] -= 1
        return counter[0]

    prime = GroupedBoxes(fixed=[r for r in scene.top if r.id in scene.crossing])
    between: list[list[Rect]] = []
    for sub in split_for_crossing(work):
        if not sub.tall:
            prime.extend(stack_unit_verticals(sub.verticals, sub.box))
            continue
        glue = _Glue(sub, next_id)
        between.extend(glue.between)
        staged = VerticalBoxScene(sub.box, sub.top + glue.pseudo_top, sub.bottom + glue.pseudo_bottom,
                                  sub.crossing)
        prime.extend(_unglue(rearrange_tall(staged), glue.members))
        for pid, under in glue.below.items():
            c = next(r for r in sub.bottom if r.id == pid)
            lo, hi = max(c.x, sub.box.x), min(c.right, sub.box.right)
            prime.extend(stack_unit_verticals(under, Box(lo, sub.box.y, hi - lo, c.y - sub.box.y, "vertical")))

    cols = sorted(between, key=lambda vs: (sum(v.h for v in vs), vs[0].x))
    k = min(len(cols), math.ceil(eps * box.w))
    short, rest = cols[:k], cols[k:]
    h0 = max((sum(v.h for v in vs) for vs in short), default=0)
    occupied = prime.rects()
    gap_area = _gap_area(occupied, bp)
    if short:
        runs = _free_runs(occupied, bp, h0)
        queue = list(short)
        for x, y, width in runs:
            take, queue = queue[:width], queue[width:]
            if not take:
                break
            slices = [v.moved(x=x + j) for j, vs in enumerate(take) for v in vs]
            prime.extend(stack_unit_verticals(slices, Box(x, y, len(take), h0, "vertical")))
        rest = queue + rest

    bsecond, second = None, GroupedBoxes()
    if rest:
        width_cap = math.floor((1 - eps) * box.w)
        if len(rest) > width_cap:
            raise GapDeficit(
                f"{len(rest)} leftover vertical columns exceed (1-eps)w={width_cap}; "
                f"free area in B' was {gap_area}, needed {(1 + eps) * box.w * h0}"
            )
        h2 = base_h // 3
        tallest = max(sum(v.h for v in vs) for vs in rest)
        if tallest > h2:
            raise InvariantBroken(f"verticals between tall items stand {tallest} > h(B)/3 = {h2}")
        bsecond = Box(bp.x, bp.top, len(rest), h2, "vertical")
        slices = [v.moved(x=bp.x + j) for j, vs in enumerate(rest) for v in vs]
        second = stack_unit_verticals(slices, bsecond)

    placed = prime.rects()
    if any(not (r.inside(bp) or r in prime.fixed) for r in placed):
        raise InvariantBroken("an item left B'")
    hits = find_overlaps(placed) + find_overlaps(second.rects())
    if hits:
        raise InvariantBroken(f"unit rearrangement overlaps: {hits[:3]}")
    prime.check()
    second.check()
    result = UnitResult(bp, prime, bsecond, second, gap_area, h0)
    if delta is not None and result.group_count() > unit_group_bound(eps, delta):
        raise InvariantBroken(f"{result.group_count()} groups exceed 15/(eps^4 delta^5)")
    return result


def restore_verticals(groups: GroupedBoxes, originals) -> tuple[GroupedBoxes, list]:
    """Put whole vertical items back, first fit, into group boxes of their height.

    ``originals`` are items (anything with ``id``, ``w``, ``h``) in the order
    they should be tried. Returns the filled groups and the items that found
    no room.
    """
    free = [[g, g.box.x + 0] for g in groups.groups]
    filled = {id(g): [] for g in groups.groups}
    leftovers = []
    for it in originals:
        for slot in free:
            g, x = slot
            if g.h == it.h and g.box.right - x >= it.w:
                filled[id(g)].append(Rect(it.id, x, g.box.y, it.w, it.h))
                slot[1] = x + it.w
                break
        else:
            leftovers.append(it)
    out = GroupedBoxes([Group(g.box, g.h, filled[id(g)]) for g in groups.groups if filled[id(g)]],
                       list(groups.fixed))
    return out, leftovers


def _translate(groups: GroupedBoxes, dx: int, dy: int) -> GroupedBoxes:
    def mv(r):
        return Rect(r.id, r.x + dx, r.y + dy, r.w, r.h)

    return GroupedBoxes(
        [Group(Box(g.box.x + dx, g.box.y + dy, g.box.w, g.box.h, g.box.tag), g.h, [mv(r) for r in g.members])
         for g in groups.groups],
        [mv(r) for r in groups.fixed],
    )


# ------------------------------------------------------------ level 2

@dataclass
class Level2Report:
    """Bookkeeping of one :func:`build_level2` run, kept for tests and the CLI."""

    stretched_height: int
    layer_heights: dict[str, int]
    group_count: int
    leftover_verticals: list[int]
    problems: list[str] = field(default_factory=list)


def level2_bound(epsilon, delta) -> Fraction:
    e, d = Fraction(epsilon), Fraction(delta)
    return 225 / (e**6 * d**7) + 4 / (e * d)


def check_level2(instance, classification: dict[int, str], partition, packing) -> list[str]:
    """Structural checks on a level-2 result; an empty list means all hold."""
    from .core import placed_rects, validate_packing

    problems = []
    report = validate_packing(instance, packing)
    if not report.ok:
        problems.append(str(report))
    boxes = partition.boxes
    hits = find_overlaps([b.as_rect(k) for k, b in enumerate(boxes)])
    if hits:
        problems.append(f"partition boxes overlap: {hits[:3]}")
    rects = placed_rects(instance, packing)
    for r in rects:
        cls = classification[r.id]
        home = [b for b in boxes if r.inside(b)]
        if cls in ("T", "V") and not any(b.tag == "vertical" and b.h == r.h for b in home):
            problems.append(f"{cls} item {r.id} has no vertical box of height {r.h}")
        elif cls == "H" and not any(b.tag == "horizontal" for b in home):
            problems.append(f"H item {r.id} has no horizontal box")
        elif cls == "L":
            k = partition.assignment.get(r.id)
            if k is None or not r.inside(boxes[k]):
                problems.append(f"L item {r.id} has no box of its own")
            elif any(o.id != r.id and o.overlaps(boxes[k]) for o in rects):
                problems.append(f"L item {r.id} shares its box")
    if partition.bound is not None and len(boxes) > partition.bound:
        problems.append(f"{len(boxes)} boxes exceed the bound {partition.bound}")
    return problems


def _nfdh_into(items, region: Box) -> list[Rect] | None:
    """NFDH inside ``region``; None when the items do not fit."""
    out = []
    y = region.y
    shelf = x = 0
    for it in sorted(items, key=lambda it: (-it.h, -it.w, it.id)):
        if it.w > region.w:
            return None
        if x + it.w > region.w:
            y += shelf
            shelf = x = 0
        if shelf == 0:
            shelf = it.h
        if y + it.h > region.top:
            return None
        out.append(Rect(it.id, region.x + x, y, it.w, it.h))
        x += it.w
    return out


class _Shelf:
    """Left-to-right rows of boxes stacked upward from ``y``."""

    def __init__(self, W: int, y: int):
        self.W, self.y, self.x, self.row = W, y, 0, 0

    def place(self, w: int, h: int) -> tuple[int, int]:
        if self.x + w > self.W:
            self.y += self.row
            self.x = self.row = 0
        at = (self.x, self.y)
        self.x += w
        self.row = max(self.row, h)
        return at


def build_level2(instance, classification: dict[int, str], p, reference):
    """Second-level box partition and a packing that follows it.

    The reference is stretched by ``y -> y + floor(2 eps y)``, which gives
    every vertical box the extra height the unit-vertical rearrangement
    needs. Above the stretched area, bottom to top: the box of crossed
    horizontal items, one NFDH layer of medium items, then a shelf holding
    the B'' boxes, the crossed and leftover vertical items and the small
    items. Returns ``(partition, packing, report)``.
    """
    from .core import packing_from_rects, placed_rects
    from .structure import BoxPartition, _floor, build_level1_partition, relocate_crossing

    W, opt, eps = instance.W, p.opt, p.epsilon
    part1, crossing = build_level1_partition(instance, classification, p, reference)
    items = instance.by_id()
    original = {r.id: r for r in placed_rects(instance, reference)}

    def lift(y: int) -> int:
        return y + _floor(2 * eps * y)

    def stretched(r: Rect) -> Rect:
        return r.moved(y=lift(r.y))

    def stretched_box(b: Box) -> Box:
        return Box(b.x, lift(b.y), b.w, lift(b.top) - lift(b.y), b.tag)

    final: dict[int, Rect] = {}
    boxes: list[Box] = []
    assignment: dict[int, int] = {}

    for iid in sorted(i for i, c in classification.items() if c == "L"):
        final[iid] = stretched(original[iid])
        assignment[iid] = len(boxes)
        boxes.append(Box(final[iid].x, final[iid].y, final[iid].w, final[iid].h, "large"))

    hboxes = [stretched_box(b) for b in part1.boxes if b.tag == "horizontal"]
    boxes.extend(hboxes)
    h_moved = set(crossing.horizontal)
    for iid, c in classification.items():
        if c == "H" and iid not in h_moved:
            r = stretched(original[iid])
            if any(r.inside(b) for b in hboxes):
                final[iid] = r
            else:
                h_moved.add(iid)
    v_moved = set(crossing.vertical)

    slice_groups = GroupedBoxes()
    seconds: list[tuple[Box, GroupedBoxes]] = []
    fixed: dict[int, Rect] = {}
    tall_ids = {i for i, c in classification.items() if c == "T"}
    vert_ids = {i for i, c in classification.items() if c == "V"} - v_moved
    for b in (b for b in part1.boxes if b.tag == "vertical"):
        tall = [stretched(original[i]) for i in sorted(tall_ids) if original[i].overlaps(b)]
        verts = [s for i in sorted(vert_ids) if original[i].inside(b) for s in slice_unit(stretched(original[i]))]
        if not tall and not verts:
            continue
        scene = scene_from_items(stretched_box(b), tall, verts)
        scene.check()
        res = rearrange_unit(scene, eps, expand=False, base_height=b.h)
        for g in res.prime.groups:
            if classification[g.members[0].id] == "V":
                slice_groups.groups.append(g)
            else:
                for r in g.members:
                    final[r.id] = r
                boxes.append(g.box)
        for r in res.prime.fixed:
            fixed[r.id] = r
        if res.bsecond is not None:
            seconds.append((res.bsecond, res.second))
    for iid, r in sorted(fixed.items()):
        final[iid] = r
        boxes.append(Box(r.x, r.y, r.w, r.h, "vertical"))

    layers: dict[str, int] = {}
    y = lift(opt)
    reloc = relocate_crossing([original[i] for i in sorted(h_moved)], [original[i] for i in sorted(v_moved)], p, W)
    if reloc.horizontal_box is not None:
        boxes.append(Box(0, y, W, reloc.horizontal_box.h, "horizontal"))
        for r in reloc.horizontal_items:
            final[r.id] = r.moved(y=r.y + y)
        layers["crossed_horizontal"] = reloc.horizontal_box.h
        y += reloc.horizontal_box.h

    medium = [items[i] for i in sorted(i for i, c in classification.items() if c == "M")]
    if medium:
        top = 0
        for r in _nfdh_into(medium, Box(0, y, W, max(it.h for it in medium) * len(medium), "spare")):
            final[r.id] = r
            top = max(top, r.top)
        boxes.append(Box(0, y, W, top - y, "spare"))
        layers["medium"] = top - y
        y = top

    shelf = _Shelf(W, y)
    for vb in reloc.vertical_boxes:
        x0, y0 = shelf.place(vb.w, vb.h)
        boxes.append(Box(x0, y0, vb.w, vb.h, "vertical"))
        for r in reloc.vertical_items:
            if vb.x <= r.x < vb.right:
                final[r.id] = Rect(r.id, r.x - vb.x + x0, y0, r.w, r.h)
    for bsec, groups in seconds:
        x0, y0 = shelf.place(bsec.w, bsec.h)
        moved = _translate(groups, x0 - bsec.x, y0 - bsec.y)
        slice_groups.groups.extend(moved.groups)

    originals = [items[i] for i in sorted(vert_ids)]
    restored, leftovers = restore_verticals(slice_groups, originals)
    for g in restored.groups:
        boxes.append(g.box)
        for r in g.members:
            final[r.id] = r
    by_height: dict[int, list] = {}
    for it in leftovers:
        by_height.setdefault(it.h, []).append(it)
    for h in sorted(by_height, reverse=True):
        width = sum(it.w for it in by_height[h])
        x0, y0 = shelf.place(width, h)
        boxes.append(Box(x0, y0, width, h, "vertical"))
        for it in by_height[h]:
            final[it.id] = Rect(it.id, x0, y0, it.w, it.h)
            x0 += it.w

    small = [items[i] for i in sorted(i for i, c in classification.items() if c == "S")]
    if small:
        spare_h = max(opt // 3, shelf.row)
        if shelf.x >= W:
            shelf.y += shelf.row
            shelf.x = shelf.row = 0
        spare = Box(shelf.x, shelf.y, W - shelf.x, spare_h, "spare")
        placed = _nfdh_into(small, spare)
        if placed is None:
            raise SmallItemOverflow(f"{len(small)} small items do not fit the {spare.w}x{spare.h} spare box")
        boxes.append(spare)
        for r in placed:
            final[r.id] = r
        shelf.row = max(shelf.row, spare_h)
    layers["shelf"] = shelf.y + shelf.row - y

    missing = set(items) - set(final)
    if missing:
        raise InvariantBroken(f"items {sorted(missing)} were not placed")
    packing = packing_from_rects(final.values())
    height = max(packing.height, max((b.top for b in boxes), default=0))
    partition = BoxPartition((W, height), boxes, assignment, level2_bound(eps, p.delta))
    report = Level2Report(lift(opt), layers, len(boxes), [it.id for it in leftovers])
    report.problems = check_level2(instance, classification, partition, packing)
    if report.problems:
        raise InvariantBroken("; ".join(report.problems[:3]))
    return partition, packing, report
