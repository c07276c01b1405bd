"""The tigaug command line: ingest, augment, evaluate, check-mr."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

import tigaug as tg
from tigaug.cli import main
from tigaug.dataset_io import (
    Dataset,
    DetectionSet,
    annotations_json_bytes,
    read_annotations,
    read_canonical,
    write_canonical,
    write_detections,
)

from reference import perfect_detections, tree_bytes

FIXTURES = Path(__file__).parent / "fixtures"


def detections_for(ann_path, out_path, model="ref", drop=None):
    """Perfect detections for every image in an annotations file."""
    _, rows = read_annotations(ann_path)
    sets = []
    for image_id, _, _, lights in rows:
        dets = perfect_detections(lights)
        if drop is not None and image_id == drop:
            dets = dets[1:]
        sets.append(DetectionSet(image_id, tuple(dets)))
    write_detections(out_path, model, sets)
    return out_path


# ---------------------------------------------------------------------------
# ingest

def test_ingest_bosch_fixture(tmp_path, capsys):
    rc = main(["ingest", "--format", "bosch",
               "--input", str(FIXTURES / "bosch" / "boxes.yaml"),
               "--out", str(tmp_path / "a")])
    assert rc == 0
    out, err = capsys.readouterr()
    assert "ingested 3 image(s)" in out
    assert "dropped 1 'off' light(s)" in err
    ds = read_canonical(tmp_path / "a")
    assert [im.id for im in ds.images] == ["rgb/a.png", "rgb/b.png", "rgb/c.png"]

    rc = main(["ingest", "--format", "bosch",
               "--input", str(FIXTURES / "bosch" / "boxes.yaml"),
               "--out", str(tmp_path / "b")])
    assert rc == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_ingest_lisa_fixture(tmp_path, capsys):
    rc = main(["ingest", "--format", "lisa",
               "--input", str(FIXTURES / "lisa"),
               "--out", str(tmp_path / "out")])
    assert rc == 0
    assert "ingested 4 image(s)" in capsys.readouterr().out
    ann = (tmp_path / "out" / "annotations.json").read_bytes()
    assert ann == (FIXTURES / "lisa_expected.json").read_bytes()


def test_ingest_split_needs_enough_images(tmp_path, capsys):
    rc = main(["ingest", "--format", "lisa", "--input", str(FIXTURES / "lisa"),
               "--out", str(tmp_path / "out"), "--split-seed", "1"])
    assert rc == 2
    assert "at least 6" in capsys.readouterr().err


def test_ingest_missing_input(tmp_path, capsys):
    rc = main(["ingest", "--format", "bosch",
               "--input", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "nope.yaml" in capsys.readouterr().err


def test_ingest_canonical_with_split(tmp_path, mini, capsys):
    src = tmp_path / "src"
    write_canonical(mini, src)
    rc = main(["ingest", "--format", "canonical", "--input", str(src),
               "--out", str(tmp_path / "out"), "--split-seed", "5"])
    assert rc == 0
    back = read_canonical(tmp_path / "out")
    assert back.split is not None
    assert sorted(back.split.values()).count("train") == 13


def test_ingest_dedup_flagging(tmp_path, capsys):
    base = FIXTURES / "bosch"
    work = tmp_path / "src"
    shutil.copytree(base, work)
    dup = {"path": "rgb/d.png", "boxes": []}
    shutil.copyfile(work / "rgb" / "a.png", work / "rgb" / "d.png")
    text = (work / "boxes.yaml").read_text() + f"- path: {dup['path']}\n  boxes: []\n"
    (work / "boxes.yaml").write_text(text)

    rc = main(["ingest", "--format", "bosch", "--input", str(work / "boxes.yaml"),
               "--out", str(tmp_path / "deduped")])
    assert rc == 0
    assert "1 duplicate(s) removed" in capsys.readouterr().out
    assert len(read_canonical(tmp_path / "deduped").images) == 3

    rc = main(["ingest", "--format", "bosch", "--input", str(work / "boxes.yaml"),
               "--out", str(tmp_path / "kept"), "--no-dedup"])
    assert rc == 0
    assert len(read_canonical(tmp_path / "kept").images) == 4


# ---------------------------------------------------------------------------
# augment

def test_augment_weather_keeps_annotation_bytes(tmp_path, mini_root, capsys):
    rc = main(["augment", "--dataset", str(mini_root), "--transform", "FG",
               "--seed", "11", "--out", str(tmp_path)])
    assert rc == 0
    kind_dir = tmp_path / "FG+"
    assert (kind_dir / "annotations.json").read_bytes() == (
        (mini_root / "annotations.json").read_bytes())
    pngs = list(kind_dir.rglob("*.png"))
    assert len(pngs) == 20
    assert "FG+: 20 augmented, 0 skipped, 0 failed" in capsys.readouterr().out

    manifest = json.loads((kind_dir / "manifest.json").read_text())
    assert manifest["tool"] == "tigaug"
    assert manifest["version"] == tg.__version__
    assert manifest["kind"] == "FG"
    assert manifest["seed"] == 11
    assert manifest["params"] == tg.TransformParams().as_dict()
    assert manifest["skipped"] == {}
    assert set(manifest["images"]) == {f"mini-{i:03d}" for i in range(20)}
    for image_id, entry in manifest["images"].items():
        assert entry["seed"] == tg.image_seed(11, image_id)
        assert entry["notes"] == []
    assert manifest["policies"]["mp_direction_order"] == [1, -1]
    assert manifest["policies"]["subset_probability"] == 0.5

    timings = json.loads((kind_dir / "timings.json").read_text())
    assert set(timings["stages"]) == {"read", "transform", "write"}
    assert set(timings["images"]) == set(manifest["images"])
    for t in timings["images"].values():
        assert set(t) == {"transform", "write"}


def test_augment_light_kind_rewrites_annotations(tmp_path, mini_root):
    rc = main(["augment", "--dataset", str(mini_root), "--transform", "MP",
               "--seed", "11", "--out", str(tmp_path)])
    assert rc == 0
    kind_dir = tmp_path / "MP+"
    assert (kind_dir / "annotations.json").read_bytes() != (
        (mini_root / "annotations.json").read_bytes())
    manifest = json.loads((kind_dir / "manifest.json").read_text())
    moved = sum(1 for entry in manifest["images"].values()
                for n in entry["notes"] if n["action"] == "moved")
    assert moved > 0
    # notes in the manifest recompute the written labels exactly
    _, rows = read_annotations(kind_dir / "annotations.json")
    _, orig_rows = read_annotations(mini_root / "annotations.json")
    orig = {r[0]: r for r in orig_rows}
    for image_id, w, h, lights in rows:
        notes = [tg.LightNote.from_dict(n)
                 for n in manifest["images"][image_id]["notes"]]
        rebuilt = tg.recompute_labels("MP", orig[image_id][3], notes, w, h,
                                      tg.TransformParams())
        assert rebuilt == lights


def test_augment_lightless_dataset_warns_and_exits_zero(tmp_path, capsys):
    arr = tg.draw_scene(64, 48, [], 3)
    ds = Dataset("empty", (tg.LabeledImage("e-0", arr, ()),
                           tg.LabeledImage("e-1", tg.draw_scene(64, 48, [], 4), ())))
    src = tmp_path / "src"
    write_canonical(ds, src)
    rc = main(["augment", "--dataset", str(src), "--transform", "CC",
               "--out", str(tmp_path / "out")])
    assert rc == 0
    out, err = capsys.readouterr()
    assert "0 augmented, 2 skipped" in out
    assert "every image lacks lights" in err
    manifest = json.loads((tmp_path / "out" / "CC+" / "manifest.json").read_text())
    assert manifest["skipped"] == {"e-0": "no lights", "e-1": "no lights"}
    assert list((tmp_path / "out" / "CC+").rglob("*.png")) == []


def test_augment_unknown_transform(tmp_path, mini_root, capsys):
    rc = main(["augment", "--dataset", str(mini_root), "--transform", "ZZ",
               "--out", str(tmp_path)])
    assert rc == 2
    assert "unknown transform" in capsys.readouterr().err


def test_augment_bad_params_file(tmp_path, mini_root, capsys):
    bad = tmp_path / "params.json"
    bad.write_text(json.dumps({"sc_pad_w": -5}), encoding="utf-8")
    rc = main(["augment", "--dataset", str(mini_root), "--transform", "SC",
               "--params", str(bad), "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "sc_pad_w" in capsys.readouterr().err


def test_augment_rejects_bad_jobs(tmp_path, mini_root, capsys):
    rc = main(["augment", "--dataset", str(mini_root), "--transform", "FG",
               "--out", str(tmp_path), "--jobs", "0"])
    assert rc == 2
    assert "--jobs" in capsys.readouterr().err


def test_augment_jobs_env_default_matches_serial(tmp_path, mini_root, monkeypatch):
    monkeypatch.delenv("TIGAUG_JOBS", raising=False)
    rc = main(["augment", "--dataset", str(mini_root), "--transform", "OE",
               "--seed", "3", "--out", str(tmp_path / "serial"), "--jobs", "1"])
    assert rc == 0
    monkeypatch.setenv("TIGAUG_JOBS", "2")
    rc = main(["augment", "--dataset", str(mini_root), "--transform", "OE",
               "--seed", "3", "--out", str(tmp_path / "pooled")])
    assert rc == 0
    assert tree_bytes(tmp_path / "serial") == tree_bytes(tmp_path / "pooled")


def test_augment_all_failures_exit_one(tmp_path, capsys):
    b = tg.LightBox(40, 10, 50, 34, tg.LightState.GO)
    ds = Dataset("x", (tg.LabeledImage("a", tg.draw_scene(64, 48, [b], 1), (b,)),))
    src = tmp_path / "src"
    write_canonical(ds, src)
    # shrink the frame on disk: the light no longer fits, every image fails
    small = np.zeros((8, 8, 3), dtype=np.uint8)
    Image.fromarray(small, "RGB").save(src / "images" / "a.png", format="PNG")
    rc = main(["augment", "--dataset", str(src), "--transform", "FG",
               "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "every image failed" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# evaluate

def test_evaluate_perfect_detections(tmp_path, mini_root, capsys):
    dets = detections_for(mini_root / "annotations.json", tmp_path / "d.json")
    rc = main(["evaluate", "--ground-truth", str(mini_root),
               "--detections", str(dets)])
    assert rc == 0
    result = json.loads(capsys.readouterr().out)
    assert result["map"] == 1.0
    assert result["errors"] == {"fp": 0, "fn": 0}
    assert set(result["per_class"]) <= {s.value for s in tg.LightState}


def test_evaluate_protocol_flag_reaches_the_metric(tmp_path, capsys):
    # detector finds both lights but also a stray box between them in score
    # order, which is exactly the pattern the two protocols score differently
    g1 = tg.LightBox(4, 4, 12, 20, tg.LightState.GO)
    g2 = tg.LightBox(30, 4, 38, 20, tg.LightState.GO)
    ds = Dataset("tiny", (tg.LabeledImage("a", tg.draw_scene(64, 48, [g1, g2], 1),
                                          (g1, g2)),))
    src = tmp_path / "src"
    write_canonical(ds, src)
    stray = tg.LightBox(44, 30, 52, 44, tg.LightState.GO)
    sets = [DetectionSet("a", (
        tg.Detection(g1, 0.9), tg.Detection(stray, 0.8), tg.Detection(g2, 0.7)))]
    write_detections(tmp_path / "d.json", "m", sets)

    rc = main(["evaluate", "--ground-truth", str(src),
               "--detections", str(tmp_path / "d.json")])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["map"] == pytest.approx(
        (51 + 50 * 2 / 3) / 101)

    rc = main(["evaluate", "--ground-truth", str(src),
               "--detections", str(tmp_path / "d.json"), "--protocol", "allpoint"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["map"] == pytest.approx(5 / 6)


def test_evaluate_unknown_image_id(tmp_path, mini_root, capsys):
    b = tg.LightBox(1, 1, 5, 9, tg.LightState.GO)
    write_detections(tmp_path / "d.json", "m",
                     [DetectionSet("ghost", tuple(perfect_detections([b])))])
    rc = main(["evaluate", "--ground-truth", str(mini_root),
               "--detections", str(tmp_path / "d.json")])
    assert rc == 3
    assert "ghost" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# check-mr

@pytest.fixture()
def fg_run(tmp_path, mini_root):
    rc = main(["augment", "--dataset", str(mini_root), "--transform", "FG",
               "--seed", "11", "--out", str(tmp_path / "aug")])
    assert rc == 0
    return tmp_path / "aug" / "FG+"


def test_check_mr_clean_run(tmp_path, mini_root, fg_run, capsys):
    d_orig = detections_for(mini_root / "annotations.json", tmp_path / "orig.json")
    d_aug = detections_for(fg_run / "annotations.json", tmp_path / "aug.json")
    rc = main(["check-mr", "--original", str(mini_root), "--augmented", str(fg_run),
               "--det-original", str(d_orig), "--det-augmented", str(d_aug)])
    assert rc == 0
    out, err = capsys.readouterr()
    report = json.loads(out)
    assert report["kind"] == "FG"
    assert report["map_original"] == 1.0 and report["map_augmented"] == 1.0
    assert report["violations"] == []
    assert "relation check: FG" in err


def test_check_mr_flags_a_dropped_detection(tmp_path, mini_root, fg_run, capsys):
    d_orig = detections_for(mini_root / "annotations.json", tmp_path / "orig.json")
    d_aug = detections_for(fg_run / "annotations.json", tmp_path / "aug.json",
                           drop="mini-004")
    rc = main(["check-mr", "--original", str(mini_root), "--augmented", str(fg_run),
               "--det-original", str(d_orig), "--det-augmented", str(d_aug)])
    assert rc == 1
    report = json.loads(capsys.readouterr().out)
    assert [v["category"] for v in report["violations"]] == ["MissedLight"]
    assert report["violations"][0]["image_id"] == "mini-004"
    assert report["map_drop"] > 0.0


def test_check_mr_missing_manifest(tmp_path, mini_root, capsys):
    fake = tmp_path / "fake"
    fake.mkdir()
    (fake / "annotations.json").write_bytes(
        (mini_root / "annotations.json").read_bytes())
    d = detections_for(mini_root / "annotations.json", tmp_path / "d.json")
    rc = main(["check-mr", "--original", str(mini_root), "--augmented", str(fake),
               "--det-original", str(d), "--det-augmented", str(d)])
    assert rc == 3
    assert "manifest" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# console script

def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "tigaug", "--help"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert "ingest" in proc.stdout and "check-mr" in proc.stdout
    script = shutil.which("tigaug")
    assert script is not None
    proc = subprocess.run([script, "--help"], capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
