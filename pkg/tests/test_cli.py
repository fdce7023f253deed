import csv
import json
import xml.etree.ElementTree as ET

import pytest

from charlink.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, run
from charlink.scenes import load_detections

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run(["gen", "--scenes", "30", "--seed", "7", "--out", str(d / "s.jsonl")]) == EXIT_OK
    assert run(["simulate", "--scenes", str(d / "s.jsonl"), "--seed", "1", "--spurious", "0.1",
                "--out", str(d / "d.jsonl")]) == EXIT_OK
    assert run(["train", "--scenes", str(d / "s.jsonl"), "--detections", str(d / "d.jsonl"),
                "--epochs", "2", "--quiet", "--checkpoint", str(d / "c.json"),
                "--report", str(d / "r.json"), "--curves", str(d / "curves.png")]) == EXIT_OK
    return d


def args(d, *extra):
    return ["--scenes", str(d / "s.jsonl"), "--detections", str(d / "d.jsonl"), *extra]


def test_gen_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for p in (a, b):
        assert run(["gen", "--scenes", "100", "--seed", "7", "--out", str(p)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    echoed = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert echoed["command"] == "gen" and echoed["config"]["seed"] == 7


def test_eval_matches_train_report(data, tmp_path):
    out = tmp_path / "e.json"
    assert run(["eval", *args(data, "--checkpoint", str(data / "c.json"), "--out", str(out),
                             "--csv", str(tmp_path / "e.csv"))]) == EXIT_OK
    report = json.loads((data / "r.json").read_text())
    assert json.loads(out.read_text()) == report["final"]
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert len(rows) == 3 and rows[0]["scene_id"].startswith("scene_")
    assert (data / "curves.png").stat().st_size > 0


def test_render_has_one_polygon_per_box(data, tmp_path):
    out = tmp_path / "r.svg"
    assert run(["render", *args(data, "--checkpoint", str(data / "c.json"), "--index", "4",
                                "--out", str(out))]) == EXIT_OK
    root = ET.parse(out).getroot()
    assert root.tag == f"{SVG}svg" and root.get("version") == "1.1"
    n_boxes = len(load_detections(data / "d.jsonl")[4])
    assert len(root.findall(f".//{SVG}polygon")) == n_boxes
    assert root.find(f".//{SVG}g[@id='words']") is not None


def test_render_by_scene_id_without_model(data, tmp_path):
    out = tmp_path / "r.svg"
    assert run(["render", *args(data, "--scene-id", "scene_000002", "--out", str(out))]) == EXIT_OK
    ET.parse(out)
    assert run(["render", *args(data, "--scene-id", "nope", "--out", str(out))]) == EXIT_DATA


def test_predict_writes_words(data, tmp_path):
    out = tmp_path / "p.json"
    assert run(["predict", *args(data, "--checkpoint", str(data / "c.json"), "--out", str(out))]) == EXIT_OK
    doc = json.loads(out.read_text())
    dets = load_detections(data / "d.jsonl")
    assert len(doc["scenes"]) == len(dets)
    for scene, det in zip(doc["scenes"], dets):
        members = sorted(i for w in scene["words"] for i in w["members"])
        assert members == list(range(len(det)))
        for w in scene["words"]:
            assert len(w["rect"]["corners"]) == 4


def test_heatmap_writes_pgm(data, tmp_path):
    out = tmp_path / "h.pgm"
    assert run(["heatmap", "--scenes", str(data / "s.jsonl"), "--index", "1", "--out", str(out)]) == EXIT_OK
    assert out.read_bytes().startswith(b"P5\n512 512\n255\n")


def test_compare_writes_csv_and_figures(data, tmp_path):
    out = tmp_path / "cmp"
    assert run(["compare", *args(data, "--epochs", "1", "--quiet", "--models", "nenet", "vanilla_gcn",
                                 "--out-dir", str(out))]) == EXIT_OK
    rows = list(csv.DictReader(open(out / "comparison.csv")))
    assert [r["model"] for r in rows] == ["nenet", "vanilla_gcn"]
    for name in ("comparison.png", "curves.png", "nenet.report.json"):
        assert (out / name).stat().st_size > 0


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["gen", "--out", "x", "--bogus"],
    ["train", "--scenes", "s"],
    ["gen", "--scenes", "3", "--width", "0", "--out", "x"],
    ["simulate", "--scenes", "s", "--drop", "2", "--out", "x"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert run(argv) == EXIT_USAGE


def test_data_errors_exit_2(data, tmp_path, capsys):
    assert run(["eval", "--scenes", str(tmp_path / "missing.jsonl"), "--detections",
                str(data / "d.jsonl"), "--checkpoint", str(data / "c.json")]) == EXIT_DATA
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"scene_id": "x", "image_width": 9, "image_height": 9, "words": []}\n'
                   '{"scene_id": "y", "image_width": 9, "image_height": 9, '
                   '"words": [{"text": "a", "chars": [[[0,0],[1,0],[1,1]]]}]}\n')
    assert run(["simulate", "--scenes", str(bad), "--out", str(tmp_path / "o.jsonl")]) == EXIT_DATA
    err = capsys.readouterr().err
    assert "bad.jsonl:2" in err and "words[0].chars[0]" in err and "quad must have 4 corners" in err
    broken = tmp_path / "c.json"
    broken.write_text("{not json")
    assert run(["eval", *args(data, "--checkpoint", str(broken))]) == EXIT_DATA
