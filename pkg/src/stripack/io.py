"""JSON readers and writers for every file the CLI touches.

Readers are strict: missing keys, unknown keys and non-integer numbers all
raise :class:`BadInput`, which the CLI maps to exit code 2.
"""
from __future__ import annotations

import json
from pathlib import Path

from .core import Box, Instance, Item, Packing, Placement, StripPackError
from .reduction import ReductionParams, ThreePartitionInstance, TripleCover


class BadInput(StripPackError, ValueError):
    pass


def _load(path) -> object:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise BadInput(f"{path}: cannot read ({exc})") from None
    except json.JSONDecodeError as exc:
        raise BadInput(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def _fields(obj, required: set[str], what: str, optional: set[str] = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise BadInput(f"{what}: expected an object")
    missing = required - obj.keys()
    extra = obj.keys() - required - optional
    if missing:
        raise BadInput(f"{what}: missing field(s) {sorted(missing)}")
    if extra:
        raise BadInput(f"{what}: unknown field(s) {sorted(extra)}")
    return obj


def _int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadInput(f"{what}: expected an integer, got {value!r}")
    return value


def _list(value, what: str) -> list:
    if not isinstance(value, list):
        raise BadInput(f"{what}: expected a list")
    return value


# instances and packings

def instance_from_json(obj) -> Instance:
    obj = _fields(obj, {"W", "items"}, "instance")
    items = []
    for k, raw in enumerate(_list(obj["items"], "instance.items")):
        raw = _fields(raw, {"id", "w", "h"}, f"item #{k}")
        items.append(Item(_int(raw["id"], "item id"), _int(raw["w"], "item w"), _int(raw["h"], "item h")))
    try:
        return Instance(_int(obj["W"], "W"), tuple(items))
    except ValueError as exc:
        raise BadInput(str(exc)) from None


def instance_to_json(instance: Instance) -> dict:
    return {"W": instance.W, "items": [{"id": it.id, "w": it.w, "h": it.h} for it in instance.items]}


def packing_from_json(obj) -> Packing:
    obj = _fields(obj, {"height", "placements"}, "packing")
    pls = []
    for k, raw in enumerate(_list(obj["placements"], "packing.placements")):
        raw = _fields(raw, {"id", "x", "y"}, f"placement #{k}")
        pls.append(Placement(_int(raw["id"], "placement id"), _int(raw["x"], "x"), _int(raw["y"], "y")))
    return Packing(tuple(pls), _int(obj["height"], "height"))


def packing_to_json(packing: Packing) -> dict:
    return {
        "height": packing.height,
        "placements": [{"id": p.item_id, "x": p.x, "y": p.y} for p in packing.placements],
    }


def read_instance(path) -> Instance:
    return instance_from_json(_load(path))


def write_instance(instance: Instance, path) -> None:
    _dump(instance_to_json(instance), path)


def read_packing(path) -> Packing:
    return packing_from_json(_load(path))


def write_packing(packing: Packing, path) -> None:
    _dump(packing_to_json(packing), path)


# reduction files

def read_three_partition(path) -> ThreePartitionInstance:
    obj = _fields(_load(path), {"n", "s"}, "3-partition")
    s = tuple(_int(v, "s entry") for v in _list(obj["s"], "s"))
    try:
        return ThreePartitionInstance(s, _int(obj["n"], "n"))
    except ValueError as exc:
        raise BadInput(str(exc)) from None


def write_three_partition(tp: ThreePartitionInstance, path) -> None:
    _dump({"n": tp.n, "s": list(tp.s)}, path)


def read_cover(path) -> TripleCover:
    obj = _fields(_load(path), {"triples"}, "cover")
    triples = []
    for t in _list(obj["triples"], "triples"):
        t = _list(t, "triple")
        if len(t) != 3:
            raise BadInput("each triple needs exactly three indices")
        triples.append(tuple(_int(i, "triple index") for i in t))
    return TripleCover(tuple(triples))


def write_cover(cover: TripleCover, path) -> None:
    _dump({"triples": [list(t) for t in cover.triples]}, path)


PARAM_FIELDS = ("n", "M", "a", "b", "W")


def read_params(path) -> ReductionParams:
    obj = _fields(_load(path), set(PARAM_FIELDS), "params")
    try:
        return ReductionParams(*(_int(obj[k], k) for k in PARAM_FIELDS))
    except ValueError as exc:
        raise BadInput(str(exc)) from None


def write_params(params: ReductionParams, path) -> None:
    _dump({k: getattr(params, k) for k in PARAM_FIELDS}, path)


# partitions and classifications

def partition_to_json(partition) -> dict:
    return {
        "area": list(partition.area),
        "boxes": [{"x": b.x, "y": b.y, "w": b.w, "h": b.h, "tag": b.tag} for b in partition.boxes],
    }


def read_partition_boxes(path) -> tuple[tuple[int, int], list[Box]]:
    obj = _fields(_load(path), {"area", "boxes"}, "partition")
    area = _list(obj["area"], "area")
    if len(area) != 2:
        raise BadInput("area must be [width, height]")
    boxes = []
    for k, raw in enumerate(_list(obj["boxes"], "boxes")):
        raw = _fields(raw, {"x", "y", "w", "h", "tag"}, f"box #{k}")
        try:
            boxes.append(Box(*(_int(raw[c], c) for c in "xywh"), raw["tag"]))
        except ValueError as exc:
            raise BadInput(str(exc)) from None
    return (_int(area[0], "area width"), _int(area[1], "area height")), boxes


def write_partition(partition, path) -> None:
    _dump(partition_to_json(partition), path)


def read_classification(path) -> dict[int, str]:
    """``{"classes": {"<id>": "L", ...}}`` as written by ``repack``."""
    obj = _fields(_load(path), {"classes"}, "classification")
    raw = obj["classes"]
    if not isinstance(raw, dict):
        raise BadInput("classes must be an object")
    try:
        return {int(k): str(v) for k, v in raw.items()}
    except ValueError:
        raise BadInput("classification keys must be item ids") from None


def write_classification(classification: dict[int, str], path) -> None:
    _dump({"classes": {str(k): v for k, v in sorted(classification.items())}}, path)
