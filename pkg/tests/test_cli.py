import json

import numpy as np
import pytest

from touchprint import Image, save_image
from touchprint.cli import main
from touchprint.metrics import write_predictions, PredictionRecord

from conftest import blob_image, whorl_image


@pytest.fixture
def tree(tmp_path):
    root = tmp_path / "data"
    for sid in (1, 2, 3):
        d = root / str(sid)
        d.mkdir(parents=True)
        for idx in (1, 2):
            g = whorl_image(64, 48, 24, 32, seed=sid * 7 + idx).pixels.astype(np.float64)
            rgb = np.clip(np.stack([g, g * 0.93, g * 0.86], axis=-1), 0, 255).astype(np.uint8)
            save_image(Image(rgb), d / f"s{idx}.png")
    return root


def run(args):
    return main([str(a) for a in args])


def test_help_exits_zero(capsys):
    for cmd in ("scan", "split", "augment", "enhance", "prepare", "evaluate", "report", "sift-dump"):
        assert run([cmd, "--help"]) == 0
        assert "--" in capsys.readouterr().out


def test_missing_flag_is_usage_error(capsys):
    assert run(["scan", "--root", "/nowhere"]) == 1
    assert "required" in capsys.readouterr().err


def test_unknown_command_is_usage_error():
    assert run(["frobnicate"]) == 1


def test_scan_writes_manifest(tree, tmp_path):
    out = tmp_path / "m.csv"
    assert run(["scan", "--root", tree, "--out", out]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 7  # header + 6 records
    assert lines[0] == "path,subject_id,sample_idx,modality,split"


def test_scan_missing_root_is_data_error(tmp_path, capsys):
    assert run(["scan", "--root", tmp_path / "nope", "--out", tmp_path / "m.csv"]) == 2
    assert "error:" in capsys.readouterr().err


def test_split_deterministic(tree, tmp_path):
    m = tmp_path / "m.csv"
    run(["scan", "--root", tree, "--out", m])
    s1, s2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    assert run(["split", "--manifest", m, "--fraction", "0.666667", "--seed", "7", "--out", s1]) == 0
    assert run(["split", "--manifest", m, "--fraction", "0.666667", "--seed", "7", "--out", s2]) == 0
    assert s1.read_bytes() == s2.read_bytes()


def test_augment_and_enhance(tree, tmp_path):
    m = tmp_path / "m.csv"
    run(["scan", "--root", tree, "--out", m])
    for cmd, count in (("augment", 6 * 6), ("enhance", 6 * 3)):
        out_dir = tmp_path / cmd
        out_m = tmp_path / f"{cmd}.csv"
        code = run([
            cmd, "--manifest", m, "--images", tree,
            "--out-dir", out_dir, "--out-manifest", out_m, "--jobs", 1,
        ])
        assert code == 0
        rows = out_m.read_text().splitlines()[1:]
        assert len(rows) == count
        first = rows[0].split(",")[0]
        assert (out_dir / first).exists()


def test_augment_with_config_file(tree, tmp_path):
    m = tmp_path / "m.csv"
    run(["scan", "--root", tree, "--out", m])
    cfg = {
        "name": "tiny",
        "stages": [],
        "variants": [
            {"name": "original", "extra_stages": []},
            {"name": "bright", "extra_stages": [{"kind": "brightness", "params": {"delta": 10}}]},
        ],
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out_m = tmp_path / "out.csv"
    assert run([
        "augment", "--manifest", m, "--images", tree, "--config", cfg_path,
        "--out-dir", tmp_path / "out", "--out-manifest", out_m, "--jobs", 1,
    ]) == 0
    assert len(out_m.read_text().splitlines()) == 1 + 6 * 2


def test_bad_config_is_data_error(tree, tmp_path, capsys):
    m = tmp_path / "m.csv"
    run(["scan", "--root", tree, "--out", m])
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text('{"name": "x", "bogus": []}')
    assert run([
        "augment", "--manifest", m, "--images", tree, "--config", cfg_path,
        "--out-dir", tmp_path / "o", "--out-manifest", tmp_path / "o.csv",
    ]) == 2


def test_prepare_resizes(tree, tmp_path):
    m = tmp_path / "m.csv"
    run(["scan", "--root", tree, "--out", m])
    out_dir = tmp_path / "prep"
    assert run(["prepare", "--manifest", m, "--images", tree, "--size", 32, "--out-dir", out_dir]) == 0
    from touchprint import load_image

    img = load_image(out_dir / "1" / "s1.png")
    assert (img.width, img.height) == (32, 32)


def test_evaluate_perfect_fixture(tmp_path):
    k = 3
    preds = []
    for i in range(6):
        probs = np.zeros(k)
        probs[i % k] = 1.0
        preds.append(PredictionRecord(f"img{i}.png", i % k, probs))
    pred_path = tmp_path / "preds.csv"
    write_predictions(preds, k, pred_path)
    out = tmp_path / "summary.json"
    assert run(["evaluate", "--predictions", pred_path, "--classes", k, "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["accuracy"] == 1.0 and doc["loss"] == 0.0


def test_evaluate_class_mismatch_is_data_error(tmp_path):
    preds = [PredictionRecord("a.png", 0, np.array([0.6, 0.4]))]
    pred_path = tmp_path / "p.csv"
    write_predictions(preds, 2, pred_path)
    assert run(["evaluate", "--predictions", pred_path, "--classes", 5, "--out", tmp_path / "s.json"]) == 2


def test_report_renders(tmp_path):
    for name, acc in (("a.json", 0.93), ("b.json", 0.98)):
        (tmp_path / name).write_text(json.dumps({
            "model": "VGG-16", "accuracy": acc, "loss": 0.2,
            "precision": 0.9, "recall": 0.9, "f1": 0.9,
        }))
    out = tmp_path / "report.txt"
    jout = tmp_path / "report.json"
    assert run([
        "report", "--without", tmp_path / "a.json", "--with", tmp_path / "b.json",
        "--out", out, "--json-out", jout,
    ]) == 0
    assert "VGG-16" in out.read_text()
    assert json.loads(jout.read_text())["models"][0]["accuracy_delta"] == pytest.approx(0.05)


def test_sift_dump(tmp_path):
    img = blob_image(96, 96, [(48, 48, 4.0), (30, 60, 6.0)])
    p = tmp_path / "blob.png"
    save_image(img, p)
    out = tmp_path / "kps.json"
    assert run(["sift-dump", "--image", p, "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc and set(doc[0]) == {"x", "y", "scale", "orientation", "response"}


def test_commands_do_not_mutate_inputs(tree, tmp_path):
    m = tmp_path / "m.csv"
    run(["scan", "--root", tree, "--out", m])
    before = m.read_bytes()
    run(["split", "--manifest", m, "--fraction", "0.5", "--seed", "1", "--out", tmp_path / "s.csv"])
    assert m.read_bytes() == before
