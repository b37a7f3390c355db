"""Integer rectangle geometry, the instance/packing data model and the validator.

Every other module trusts :func:`validate_packing`; it enumerates all
violations instead of stopping at the first one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

INT64_MAX = 2**63 - 1

BOX_TAGS = ("large", "horizontal", "vertical", "spare")


class StripPackError(Exception):
    """Base class for all errors raised by this package."""


class IntegerOverflow(StripPackError, OverflowError):
    pass


class UnknownItemId(StripPackError, KeyError):
    pass


class MissingItem(StripPackError, KeyError):
    pass


def checked(value: int) -> int:
    """Return ``value`` unchanged, or raise if it leaves the signed 64-bit range."""
    if not -INT64_MAX - 1 <= value <= INT64_MAX:
        raise IntegerOverflow(f"{value} does not fit in 64 bits")
    return value


@dataclass(frozen=True)
class Item:
    id: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"item {self.id}: dimensions must be positive, got {self.w}x{self.h}")
        checked(self.w)
        checked(self.h)

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class Instance:
    W: int
    items: tuple[Item, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.W < 1:
            raise ValueError("strip width must be positive")
        checked(self.W)
        seen = set()
        for it in self.items:
            if it.id in seen:
                raise ValueError(f"duplicate item id {it.id}")
            seen.add(it.id)
            if it.w > self.W:
                raise ValueError(f"item {it.id} is wider ({it.w}) than the strip ({self.W})")

    def by_id(self) -> dict[int, Item]:
        return {it.id: it for it in self.items}


@dataclass(frozen=True)
class Placement:
    item_id: int
    x: int
    y: int


@dataclass(frozen=True)
class Packing:
    placements: tuple[Placement, ...]
    height: int

    def __post_init__(self):
        object.__setattr__(self, "placements", tuple(self.placements))

    def positions(self) -> dict[int, tuple[int, int]]:
        return {p.item_id: (p.x, p.y) for p in self.placements}


@dataclass(frozen=True)
class Rect:
    """An item (or piece of one) at a concrete position."""

    id: int
    x: int
    y: int
    w: int
    h: int

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def top(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def moved(self, x: int | None = None, y: int | None = None) -> "Rect":
        return Rect(self.id, self.x if x is None else x, self.y if y is None else y, self.w, self.h)

    def overlaps(self, other: "Rect | Box") -> bool:
        """Open-interior intersection; shared boundaries do not count."""
        return (
            self.x < other.x + other.w
            and other.x < self.x + self.w
            and self.y < other.y + other.h
            and other.y < self.y + self.h
        )

    def inside(self, other: "Rect | Box") -> bool:
        return (
            other.x <= self.x
            and self.x + self.w <= other.x + other.w
            and other.y <= self.y
            and self.y + self.h <= other.y + other.h
        )


@dataclass(frozen=True)
class Box:
    x: int
    y: int
    w: int
    h: int
    tag: str = "spare"

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box dimensions must be positive, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError("box coordinates must be non-negative")
        if self.tag not in BOX_TAGS:
            raise ValueError(f"unknown box tag {self.tag!r}")

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def top(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def as_rect(self, id: int = -1) -> Rect:
        return Rect(id, self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class Violation:
    kind: str
    ids: tuple[int, ...]
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    height: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            return f"valid packing, height {self.height}"
        lines = [f"{len(self.violations)} violation(s):"]
        lines += [f"  {v.kind} {list(v.ids)} {v.detail}".rstrip() for v in self.violations]
        return "\n".join(lines)


def find_overlaps(rects: Sequence[Rect]) -> list[tuple[int, int]]:
    """All pairs of rects whose open interiors intersect.

    Plane sweep along x: a rect enters the active list at its left edge and is
    dropped once the sweep passes its right edge. Pairs are returned as id
    pairs, smaller id first, sorted.
    """
    order = sorted(range(len(rects)), key=lambda k: (rects[k].x, rects[k].id))
    active: list[int] = []
    hits = []
    for k in order:
        r = rects[k]
        active = [a for a in active if rects[a].right > r.x]
        for a in active:
            o = rects[a]
            if o.y < r.top and r.y < o.top and o.w > 0 and r.w > 0:
                hits.append(tuple(sorted((o.id, r.id))))
        active.append(k)
    return sorted(hits)


def placed_rects(instance: Instance, packing: Packing) -> list[Rect]:
    items = instance.by_id()
    return [Rect(p.item_id, p.x, p.y, items[p.item_id].w, items[p.item_id].h) for p in packing.placements]


def validate_packing(instance: Instance, packing: Packing) -> ValidationReport:
    items = instance.by_id()
    for p in packing.placements:
        if p.item_id not in items:
            raise UnknownItemId(p.item_id)
    placed = {p.item_id for p in packing.placements}
    missing = sorted(set(items) - placed)
    if missing:
        raise MissingItem(missing[0])

    report = ValidationReport(height=packing.height)
    counts: dict[int, int] = {}
    for p in packing.placements:
        counts[p.item_id] = counts.get(p.item_id, 0) + 1
    for iid, c in sorted(counts.items()):
        if c > 1:
            report.violations.append(Violation("duplicate", (iid,), f"placed {c} times"))

    rects = placed_rects(instance, packing)
    for r in rects:
        if r.x < 0 or r.y < 0:
            report.violations.append(Violation("negative_coordinate", (r.id,), f"at ({r.x},{r.y})"))
        if r.right > instance.W:
            report.violations.append(Violation("outside_strip", (r.id,), f"right edge {r.right} > W={instance.W}"))
    for a, b in find_overlaps(rects):
        report.violations.append(Violation("overlap", (a, b)))
    actual = max((r.top for r in rects), default=0)
    if actual != packing.height:
        report.violations.append(
            Violation("height_mismatch", (), f"declared {packing.height}, actual {actual}")
        )
    return report


def total_area(instance: Instance) -> int:
    return checked(sum(it.area for it in instance.items))


def area_lower_bound(instance: Instance) -> int:
    area = total_area(instance)
    return max(-(-area // instance.W), max((it.h for it in instance.items), default=0))


def packing_from_rects(rects: Iterable[Rect]) -> Packing:
    rects = list(rects)
    return Packing(
        tuple(Placement(r.id, r.x, r.y) for r in sorted(rects, key=lambda r: r.id)),
        max((r.top for r in rects), default=0),
    )
