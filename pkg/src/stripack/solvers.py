"""Baseline heuristics and an exact small-instance solver.

The exact solver doubles as the source of reference packings and of the
"OPT" value used throughout the structural code, so it must be provably
optimal whenever it returns normally.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass

from .core import (
    Instance,
    Packing,
    Rect,
    StripPackError,
    area_lower_bound,
    packing_from_rects,
)

DEFAULT_NODE_LIMIT = 2_000_000
DEFAULT_ITEM_CAP = 10
ALGORITHMS = ("exact", "nfdh", "ffdh", "bottom_left")


class LimitExceeded(StripPackError):
    """Search stopped early; ``incumbent`` is the best packing found, not proven optimal."""

    def __init__(self, message: str, incumbent: Packing | None):
        super().__init__(message)
        self.incumbent = incumbent
        self.proven_optimal = False


class TooLarge(StripPackError, ValueError):
    pass


def _env_node_limit() -> int:
    raw = os.environ.get("STRIPACK_NODE_LIMIT")
    return int(raw) if raw else DEFAULT_NODE_LIMIT


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "exact"
    node_limit: int = 0  # 0 means: take STRIPACK_NODE_LIMIT or the default
    time_limit_ms: int = 60_000
    item_cap: int = DEFAULT_ITEM_CAP

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.node_limit < 0 or self.time_limit_ms <= 0 or self.item_cap <= 0:
            raise ValueError("solver limits must be positive")

    @property
    def nodes(self) -> int:
        return self.node_limit or _env_node_limit()


def _by_height(instance: Instance):
    return sorted(instance.items, key=lambda it: (-it.h, -it.w, it.id))


def solve_nfdh(instance: Instance) -> Packing:
    rects = []
    shelf_y = shelf_h = x = 0
    for it in _by_height(instance):
        if x + it.w > instance.W:
            shelf_y += shelf_h
            shelf_h = x = 0
        if shelf_h == 0:
            shelf_h = it.h
        rects.append(Rect(it.id, x, shelf_y, it.w, it.h))
        x += it.w
    return packing_from_rects(rects)


def solve_ffdh(instance: Instance) -> Packing:
    shelves: list[list[int]] = []  # [y, height, used width]
    rects = []
    top = 0
    for it in _by_height(instance):
        for shelf in shelves:
            if shelf[2] + it.w <= instance.W:
                break
        else:
            shelf = [top, it.h, 0]
            shelves.append(shelf)
            top += it.h
        rects.append(Rect(it.id, shelf[2], shelf[0], it.w, it.h))
        shelf[2] += it.w
    return packing_from_rects(rects)


def solve_bottom_left(instance: Instance) -> Packing:
    """Each item, in input order, at the lowest and then leftmost free position.

    The lowest feasible y is always 0 or the top of a placed item, and the
    leftmost x at that height is 0 or the right side of a placed item.
    """
    placed: list[Rect] = []
    for it in instance.items:
        ys = sorted({0} | {r.top for r in placed})
        xs = sorted({0} | {r.right for r in placed if r.right + it.w <= instance.W})
        spot = None
        for y in ys:
            for x in xs:
                cand = Rect(it.id, x, y, it.w, it.h)
                if x + it.w <= instance.W and not any(cand.overlaps(r) for r in placed):
                    spot = cand
                    break
            if spot:
                break
        placed.append(spot)
    return packing_from_rects(placed)


def _subset_sums(values: list[int], limit: int) -> list[int]:
    reach = 1
    mask = (1 << (limit + 1)) - 1
    for v in values:
        reach |= (reach << v) & mask
    return [s for s in range(limit + 1) if reach >> s & 1]


class _Search:
    """Decision search: do all items fit into ``W x H``?

    Positions are restricted to normal patterns. Any packing can be pushed left
    and down until every item touches the strip side or another item on its
    left and the bottom or another item below; after that each x is a sum of
    widths of items to its left and each y a sum of heights of items below.
    So restricting candidates to those subset sums keeps at least one optimal
    packing reachable.
    """

    def __init__(self, instance: Instance, H: int, budget: list[int], deadline: float):
        self.W = instance.W
        self.H = H
        self.budget = budget
        self.deadline = deadline
        self.items = sorted(instance.items, key=lambda it: (-it.area, -it.h, -it.w, it.id))
        W = self.W
        self.cands = []
        self.masks = []
        for k, it in enumerate(self.items):
            others = self.items[:k] + self.items[k + 1:]
            xs = _subset_sums([o.w for o in others], W - it.w)
            ys = _subset_sums([o.h for o in others], H - it.h) if H >= it.h else []
            self.cands.append([(y, x) for y in ys for x in xs])
            row = (1 << it.w) - 1
            self.masks.append(sum(row << (r * W) for r in range(it.h)))
        self.same_as_prev = [
            k > 0 and (self.items[k].w, self.items[k].h) == (self.items[k - 1].w, self.items[k - 1].h)
            for k in range(len(self.items))
        ]
        self.remaining_area = [sum(it.area for it in self.items[k:]) for k in range(len(self.items))]
        self.pos: list[tuple[int, int]] = []

    def run(self) -> list[Rect] | None:
        if any(not c for c in self.cands):
            return None
        if self._dfs(0, 0):
            return [Rect(it.id, x, y, it.w, it.h) for it, (y, x) in zip(self.items, self.pos)]
        return None

    def _coverable(self, k: int, grid: int) -> bool:
        """Forward check for items ``k..``: each needs a free spot, and the free
        cells they could cover at all must hold their combined area."""
        W = self.W
        reach = 0
        for j in range(k, len(self.items)):
            if j > k and self.same_as_prev[j]:
                continue
            mask = self.masks[j]
            own = 0
            for y, x in self.cands[j]:
                m = mask << (y * W + x)
                if not grid & m:
                    own |= m
            if not own:
                return False
            reach |= own
        return reach.bit_count() >= self.remaining_area[k]

    def _dfs(self, k: int, grid: int) -> bool:
        if k == len(self.items):
            return True
        self.budget[0] -= 1
        if self.budget[0] < 0:
            raise LimitExceeded("node limit reached", None)
        if (self.budget[0] & 1023) == 0 and time.monotonic() > self.deadline:
            raise LimitExceeded("time limit reached", None)
        if k + 1 < len(self.items) and not self._coverable(k, grid):
            return False
        floor = self.pos[k - 1] if self.same_as_prev[k] else None
        mask = self.masks[k]
        W = self.W
        for y, x in self.cands[k]:
            if floor is not None and (y, x) <= floor:
                continue
            m = mask << (y * W + x)
            if grid & m:
                continue
            self.pos.append((y, x))
            if self._dfs(k + 1, grid | m):
                return True
            self.pos.pop()
        return False


def stacking_lower_bound(instance: Instance) -> int:
    """Width-threshold bound.

    For a threshold ``alpha <= W/2``, items wider than ``W - alpha`` can share
    no row with an item of width ``alpha`` or more, and items wider than W/2
    share no row with each other. So those heights add up, and the narrower
    items of width ``>= alpha`` must fit into the remaining rows by area.
    """
    W = instance.W
    # items wider than W/2 never share a row, whatever alpha is
    best = sum(it.h for it in instance.items if 2 * it.w > W)
    for alpha in {it.w for it in instance.items if 2 * it.w <= W}:
        h1 = sum(it.h for it in instance.items if it.w > W - alpha)
        mid = [it for it in instance.items if 2 * it.w > W and it.w <= W - alpha]
        narrow = [it for it in instance.items if alpha <= it.w and 2 * it.w <= W]
        area = sum(it.area for it in mid) + sum(it.area for it in narrow)
        best = max(best, h1 + max(sum(it.h for it in mid), -(-area // W)))
    return best


def solve_exact(instance: Instance, config: SolverConfig | None = None) -> Packing:
    """Minimum-height packing; raises :class:`LimitExceeded` when limits stop the search.

    Heights are tried upward from the area/tallest-item bound; the first height
    admitting a packing is optimal. The best heuristic packing is the starting
    incumbent and is returned when no smaller height works.
    """
    config = config or SolverConfig()
    if len(instance.items) > config.item_cap:
        raise TooLarge(f"{len(instance.items)} items exceed the exact-solver cap of {config.item_cap}")
    if not instance.items:
        return Packing((), 0)
    incumbent = min(
        (solve_ffdh(instance), solve_bottom_left(instance), solve_nfdh(instance)),
        key=lambda p: p.height,
    )
    # Full-width items can always be moved to the bottom of any packing, so
    # they are stacked first and only the rest is searched.
    full = [it for it in instance.items if it.w == instance.W]
    rest = Instance(instance.W, [it for it in instance.items if it.w < instance.W])
    base = []
    y = 0
    for it in full:
        base.append(Rect(it.id, 0, y, it.w, it.h))
        y += it.h
    budget = [config.nodes]
    deadline = time.monotonic() + config.time_limit_ms / 1000
    lb = max(area_lower_bound(rest), stacking_lower_bound(rest)) if rest.items else 0
    for H in range(lb, incumbent.height - y):
        try:
            rects = _Search(rest, H, budget, deadline).run()
        except LimitExceeded as exc:
            raise LimitExceeded(str(exc), incumbent) from None
        if rects is not None:
            return packing_from_rects(base + [r.moved(y=r.y + y) for r in rects])
    return incumbent


def solve(instance: Instance, config: SolverConfig) -> Packing:
    if config.algorithm == "exact":
        return solve_exact(instance, config)
    return {"nfdh": solve_nfdh, "ffdh": solve_ffdh, "bottom_left": solve_bottom_left}[config.algorithm](instance)


def brute_force_3partition(tp) -> "TripleCover | None":
    """Exhaustive zero-sum triple cover search (exponential; meant for n <= 6)."""
    from .reduction import TripleCover

    s = tp.s
    used = [False] * len(s)
    triples: list[tuple[int, int, int]] = []

    def rec() -> bool:
        try:
            i = used.index(False)
        except ValueError:
            return True
        used[i] = True
        for j in range(i + 1, len(s)):
            if used[j]:
                continue
            used[j] = True
            for k in range(j + 1, len(s)):
                if not used[k] and s[i] + s[j] + s[k] == 0:
                    used[k] = True
                    triples.append((i + 1, j + 1, k + 1))
                    if rec():
                        return True
                    triples.pop()
                    used[k] = False
            used[j] = False
        used[i] = False
        return False

    return TripleCover(tuple(triples)) if rec() else None
