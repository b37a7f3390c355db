import json
from pathlib import Path

import pytest

from stripack import io as sio
from stripack.bench import CSV_HEADER, random_instances, rows_to_csv, run_bench
from stripack.cli import DEFAULT_SEED, main
from stripack.core import Instance, Item, Packing, Placement
from stripack.reduction import ThreePartitionInstance, TripleCover, build_instance, canonical_packing
from stripack.render import packing_svg

GOLDEN = Path(__file__).parent / "golden"
EXAMPLE_TP = {"n": 1, "s": [-1, 0, 1]}


def write(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


@pytest.fixture
def reduced(tmp_path):
    tp = write(tmp_path / "tp.json", EXAMPLE_TP)
    cover = write(tmp_path / "cover.json", {"triples": [[1, 2, 3]]})
    inst, params, pk = (str(tmp_path / n) for n in ("inst.json", "params.json", "pk.json"))
    assert main(["reduce", "--in", tp, "--out", inst, "--params", params, "--cover", cover, "--packing", pk]) == 0
    return tmp_path, tp, inst, params, pk


def test_round_trips(tmp_path):
    inst = Instance(7, (Item(3, 2, 5), Item(1, 7, 1)))
    sio.write_instance(inst, tmp_path / "i.json")
    assert sio.read_instance(tmp_path / "i.json") == inst
    pk = Packing((Placement(3, 0, 1), Placement(1, 0, 0)), 6)
    sio.write_packing(pk, tmp_path / "p.json")
    assert sio.read_packing(tmp_path / "p.json") == pk
    tp = ThreePartitionInstance((-1, 0, 1), 1)
    sio.write_three_partition(tp, tmp_path / "t.json")
    assert sio.read_three_partition(tmp_path / "t.json") == tp
    cover = TripleCover(((1, 2, 3),))
    sio.write_cover(cover, tmp_path / "c.json")
    assert sio.read_cover(tmp_path / "c.json") == cover
    _, params = build_instance(tp)
    sio.write_params(params, tmp_path / "m.json")
    assert sio.read_params(tmp_path / "m.json") == params
    sio.write_classification({2: "T", 1: "L"}, tmp_path / "k.json")
    assert sio.read_classification(tmp_path / "k.json") == {1: "L", 2: "T"}


@pytest.mark.parametrize(
    "obj",
    [
        {"W": 3, "items": [{"id": 1, "w": 1, "h": 1, "color": "red"}]},
        {"W": 3},
        {"W": 3, "items": [{"id": 1, "w": 1.5, "h": 1}]},
        {"W": 3, "items": [{"id": 1, "w": True, "h": 1}]},
        {"W": 3, "items": [{"id": 1, "w": 4, "h": 1}]},
        [],
    ],
)
def test_strict_instance_reader(obj):
    with pytest.raises(sio.BadInput):
        sio.instance_from_json(obj)


def test_reduce_writes_the_example(reduced):
    _, _, inst, params, pk = reduced
    instance = sio.read_instance(inst)
    assert len(instance.items) == 11 and instance.W == 312
    assert sio.read_params(params).a == 144
    assert sio.read_packing(pk).height == 11


def test_reduce_bad_inputs(tmp_path, capsys):
    bad_sum = write(tmp_path / "bad.json", {"n": 1, "s": [1, 0, 0]})
    assert main(["reduce", "--in", bad_sum, "--out", str(tmp_path / "o.json")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    assert main(["reduce", "--in", str(broken), "--out", str(tmp_path / "o.json")]) == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_validate_extract_and_render(reduced, capsys):
    tmp, tp, inst, params, pk = reduced
    assert main(["validate", "--instance", inst, "--packing", pk]) == 0
    out = str(tmp / "cover_out.json")
    assert main(["extract", "--instance", inst, "--packing", pk, "--params", params, "--out", out]) == 0
    assert sio.read_cover(out).same_as(TripleCover(((1, 2, 3),)))
    assert main(["extract", "--instance", inst, "--packing", pk, "--tp", tp, "--out", out]) == 0
    svg = tmp / "pk.svg"
    assert main(["render", "--instance", inst, "--packing", pk, "--out", str(svg)]) == 0
    text = svg.read_text(encoding="utf-8")
    assert text.count("<rect ") == 11
    assert 'viewBox="0 0 312 11"' in text


def test_validate_reports_failure(reduced):
    tmp, _, inst, _, pk = reduced
    packing = sio.read_packing(pk)
    moved = Packing(tuple(Placement(p.item_id, 0, 0) for p in packing.placements), 11)
    sio.write_packing(moved, tmp / "bad.json")
    assert main(["validate", "--instance", inst, "--packing", str(tmp / "bad.json")]) == 1


def test_extract_failure_exit_code(reduced):
    tmp, _, inst, params, pk = reduced
    packing = sio.read_packing(pk)
    lifted = Packing(tuple(Placement(p.item_id, p.x, 11) if p.item_id == 1 else p for p in packing.placements), 12)
    sio.write_packing(lifted, tmp / "tall.json")
    args = ["extract", "--instance", inst, "--packing", str(tmp / "tall.json"), "--params", params,
            "--out", str(tmp / "c.json")]
    assert main(args) == 1


def test_gen3p_and_solve(tmp_path):
    tp, cover = str(tmp_path / "tp.json"), str(tmp_path / "cover.json")
    assert main(["gen3p", "--n", "3", "--range", "5", "--seed", "7", "--out", tp, "--cover", cover]) == 0
    assert sio.read_cover(cover).is_valid_for(sio.read_three_partition(tp))
    inst = write(tmp_path / "i.json", {"W": 4, "items": [{"id": 1, "w": 3, "h": 2}, {"id": 2, "w": 2, "h": 2},
                                                          {"id": 3, "w": 2, "h": 1}, {"id": 4, "w": 1, "h": 1}]})
    out = str(tmp_path / "p.json")
    for algo in ("exact", "nfdh", "ffdh", "bl"):
        assert main(["solve", "--algo", algo, "--instance", inst, "--out", out]) == 0
    assert sio.read_packing(out).height >= 4


def test_solve_limit_exit_code(tmp_path, monkeypatch):
    dims = [(7, 5), (6, 9), (5, 7), (9, 3), (3, 8), (11, 2), (4, 6), (8, 4)]
    inst = write(tmp_path / "i.json", {"W": 20, "items": [{"id": k + 1, "w": w, "h": h} for k, (w, h) in enumerate(dims)]})
    monkeypatch.setenv("STRIPACK_NODE_LIMIT", "1")
    out = tmp_path / "p.json"
    assert main(["solve", "--instance", inst, "--out", str(out)]) == 3
    assert out.exists()


def test_solve_refuses_reduction_instance(reduced):
    tmp, _, inst, _, _ = reduced
    assert main(["solve", "--instance", inst, "--out", str(tmp / "x.json")]) == 3


def test_repack_cli(tmp_path, capsys):
    dims = [(8, 20), (6, 16), (9, 12), (4, 24), (3, 24), (10, 8)]
    inst = write(tmp_path / "i.json", {"W": 24, "items": [{"id": k + 1, "w": w, "h": h} for k, (w, h) in enumerate(dims)]})
    out, part, classes = (str(tmp_path / n) for n in ("o.json", "part.json", "cls.json"))
    args = ["repack", "--instance", inst, "--epsilon", "1/4", "--out", out, "--partition", part, "--classes", classes]
    assert main(args) == 0
    assert "ratio=" in capsys.readouterr().out
    assert main(["validate", "--instance", inst, "--packing", out]) == 0
    area, boxes = sio.read_partition_boxes(part)
    assert area[0] == 24 and boxes
    assert set(sio.read_classification(classes).values()) <= set("LTVHSM")
    assert main(["repack", "--instance", inst, "--epsilon", "1/4", "--delta", "1/4", "--out", out]) == 2


def test_bench_row_count(tmp_path):
    d = tmp_path / "insts"
    d.mkdir()
    for k in range(3):
        write(d / f"i{k}.json", {"W": 6, "items": [{"id": 1, "w": 2 + k, "h": 3}, {"id": 2, "w": 3, "h": 1 + k}]})
    csv_path = tmp_path / "b.csv"
    assert main(["bench", "--dir", str(d), "--algos", "nfdh,exact", "--csv", str(csv_path), "--no-timing"]) == 0
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 6
    assert main(["bench", "--dir", str(d), "--algos", "simplex"]) == 2
    assert main(["bench"]) == 2


def test_bench_rows_have_ratio_at_least_one():
    rows = run_bench(random_instances(5, 3), ["nfdh", "ffdh", "bl"], timing=False)
    assert all(r.valid and r.ratio >= 1 for r in rows)


def golden_bench_csv() -> str:
    rows = run_bench(random_instances(4, DEFAULT_SEED, max_items=6), ["nfdh", "ffdh", "bl", "exact"], timing=False)
    return rows_to_csv(rows)


def golden_svg() -> str:
    inst, params = build_instance(ThreePartitionInstance((-1, 0, 1), 1))
    pk = canonical_packing(inst, params, TripleCover(((1, 2, 3),)))
    return packing_svg(inst, pk)


def test_bench_csv_matches_golden(tmp_path):
    path = tmp_path / "b.csv"
    args = ["bench", "--gen", "4", "--items", "6", "--algos", "nfdh,ffdh,bl,exact", "--no-timing", "--csv", str(path)]
    assert main(args) == 0
    golden = (GOLDEN / "bench_seed20161.csv").read_text(encoding="utf-8")
    assert path.read_text(encoding="utf-8") == golden == golden_bench_csv()


def test_render_svg_matches_golden(reduced):
    tmp, _, inst, _, pk = reduced
    svg = tmp / "r.svg"
    assert main(["render", "--instance", inst, "--packing", pk, "--out", str(svg)]) == 0
    golden = (GOLDEN / "canonical_n1.svg").read_text(encoding="utf-8")
    assert svg.read_text(encoding="utf-8") == golden == golden_svg()


def test_bench_plot(tmp_path):
    png = tmp_path / "b.png"
    args = ["bench", "--gen", "2", "--algos", "nfdh,ffdh", "--no-timing", "--csv", str(tmp_path / "b.csv"),
            "--plot", str(png)]
    assert main(args) == 0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
