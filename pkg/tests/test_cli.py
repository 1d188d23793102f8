import json
import os

import numpy as np
import pytest
from PIL import Image

from specsplit.cli import EXIT_DATA, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, main, replay
from specsplit.hypercube import HyperCube, read_cube, write_cube
from specsplit.synthetic import synthetic_dataset


@pytest.fixture
def hr_dir(tmp_path):
    d = tmp_path / "hr"
    d.mkdir()
    for k, cube in enumerate(synthetic_dataset(3, seed=2, height=16, width=16, bands=4)):
        write_cube(cube, d / f"c{k}.hsc")
    return d


def _mini_config(path):
    from specsplit.ssanet import miniature_config
    path.write_text(miniature_config(2).to_json())
    return path


def test_metrics_identity(tmp_path, capsys):
    write_cube(HyperCube(np.random.default_rng(0).uniform(0.1, 1, (3, 12, 12))), tmp_path / "x.hsc")
    code = main(["metrics", "--a", str(tmp_path / "x.hsc"), "--b", str(tmp_path / "x.hsc"), "--scale", "2"])
    assert code == EXIT_OK
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header.split("\t") == ["CC", "SAM", "RMSE", "ERGAS", "PSNR", "SSIM"]
    assert row.split("\t") == ["1.0000", "0.0000", "0.0000", "0.0000", "inf", "1.0000"]


def test_search_table(capsys, tmp_path):
    assert main(["search", "--scale", "4", "--out", str(tmp_path / "s")]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 + 10
    assert (tmp_path / "s" / "search.csv").exists()
    manifest = json.loads((tmp_path / "s" / "run_manifest.json").read_text())
    assert manifest["subcommand"] == "search" and manifest["seed"] == 0


def test_missing_file_exit_2(tmp_path, capsys):
    missing = str(tmp_path / "nope.hsc")
    assert main(["metrics", "--a", missing, "--b", missing, "--scale", "2"]) == EXIT_DATA
    assert missing in capsys.readouterr().err


def test_corrupt_file_exit_2(tmp_path, capsys):
    (tmp_path / "bad.hsc").write_bytes(b"garbage")
    p = str(tmp_path / "bad.hsc")
    assert main(["metrics", "--a", p, "--b", p, "--scale", "2"]) == EXIT_DATA


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err
    assert main([]) == EXIT_USAGE
    assert main(["search"]) == EXIT_USAGE
    assert main(["search", "--scale", "3"]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK


def test_import_and_downsample(tmp_path):
    paths = []
    for k in range(3):
        p = tmp_path / f"b{k}.png"
        Image.fromarray(np.full((8, 8), 20000 * k, np.uint16)).save(p)
        paths.append(str(p))
    out = tmp_path / "cube" / "x.hsc"
    os.makedirs(out.parent)
    assert main(["import", "--out", str(out), "--wavelengths", "400,10", "--quiet", *paths]) == EXIT_OK
    cube = read_cube(out)
    assert cube.shape == (8, 8, 3) and cube.wavelengths_nm == [400.0, 410.0, 420.0]
    assert main(["downsample", "--in", str(out), "--out", str(tmp_path / "cube" / "lr.hsc"), "--scale", "2"]) == EXIT_OK
    assert read_cube(tmp_path / "cube" / "lr.hsc").shape == (4, 4, 3)


def test_augment(hr_dir, tmp_path):
    out = tmp_path / "aug"
    assert main(["augment", "--in", str(hr_dir), "--out", str(out), "--sigmas", "0.5,2",
                 "--patch", "8", "--overlap", "4", "--symmetry", "--quiet"]) == EXIT_OK
    files = sorted(f for f in os.listdir(out) if f.endswith(".hsc"))
    assert len(files) == 6 * 6
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest) == 36 and manifest[6]["kind"] == "self"


def test_train_eval_and_replay(hr_dir, tmp_path, capsys):
    cfg = _mini_config(tmp_path / "model.json")
    out = tmp_path / "run"
    argv = ["train", "--config", str(cfg), "--data", str(hr_dir), "--scale", "2", "--epochs", "2",
            "--batch", "2", "--seed", "4", "--out", str(out), "--quiet"]
    assert main(argv) == EXIT_OK
    ckpt = (out / "best.ssap").read_bytes()
    log = (out / "train_log.jsonl").read_text()
    assert log and all(json.loads(line) for line in log.splitlines())

    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["argv"] == argv and manifest["config"]["epochs"] == 2
    assert str(out / "best.ssap") in manifest["outputs"]
    os.remove(out / "best.ssap")
    assert replay(out / "run_manifest.json") == EXIT_OK
    assert (out / "best.ssap").read_bytes() == ckpt
    assert (out / "train_log.jsonl").read_text() == log

    assert main(["eval", "--ckpt", str(out / "best.ssap"), "--data", str(hr_dir), "--out", str(tmp_path / "ev")]) == EXIT_OK
    text = capsys.readouterr().out
    assert "bicubic-mean" in text
    reports = json.loads((tmp_path / "ev" / "reports.json").read_text())
    assert len(reports["per_image"]) == 6


def test_divergence_exit_3(hr_dir, tmp_path):
    cfg = _mini_config(tmp_path / "model.json")
    code = main(["train", "--config", str(cfg), "--data", str(hr_dir), "--epochs", "3", "--lr", "1e30",
                 "--out", str(tmp_path / "div"), "--quiet"])
    assert code == EXIT_DIVERGED
    assert (tmp_path / "div" / "best.ssap").exists()


def test_demo_uses_cache_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SPECSPLIT_CACHE", str(tmp_path))
    assert main(["demo", "--epochs", "1", "--quiet", "--seed", "1"]) == EXIT_OK
    out = tmp_path / "specsplit-demo"
    assert (out / "metrics.json").exists() and (out / "run_manifest.json").exists()
