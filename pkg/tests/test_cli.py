import json

import numpy as np
import pytest

from parnet.cli import main
from parnet.datasets import Dataset
from parnet.geometry import curve_hausdorff
from parnet.io import read_curve, read_points, write_points

L = 20


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--set", "train", "--count", 60, "--points", L, "--seed", 4,
               "--out", d / "train.txt") == 0
    assert run("train", "--data", d / "train.txt", "--net", "ppn", "--hidden", "16,16",
               "--epochs", 3, "--batch-size", 32, "--out", d / "ppn.bin") == 0
    assert run("train", "--data", d / "train.txt", "--net", "ksn", "--ppn", d / "ppn.bin",
               "--hidden", "8,8", "--epochs", 2, "--batch-size", 32,
               "--out", d / "ksn.bin") == 0
    return d


def test_synth_is_deterministic(tmp_path, capsys):
    for name in ("a.txt", "b.txt"):
        assert run("synth", "--set", 3, "--count", 4, "--points", 50, "--seed", 9,
                   "--out", tmp_path / name) == 0
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert "wrote 4 instances of 50 points" in capsys.readouterr().out
    run("synth", "--set", 3, "--count", 4, "--points", 50, "--seed", 10, "--out", tmp_path / "c.txt")
    assert (tmp_path / "a.txt").read_bytes() != (tmp_path / "c.txt").read_bytes()


def test_training_log_is_seed_deterministic(work, tmp_path):
    for name in ("x", "y"):
        assert run("train", "--data", work / "train.txt", "--hidden", "8", "--epochs", 2,
                   "--seed", 5, "--out", tmp_path / f"{name}.bin") == 0
    assert (tmp_path / "x.bin.log").read_bytes() == (tmp_path / "y.bin.log").read_bytes()
    assert (tmp_path / "x.bin").read_bytes() == (tmp_path / "y.bin").read_bytes()


def test_usage_errors_exit_2(work, tmp_path, capsys):
    assert run("synth", "--set", 5, "--out", tmp_path / "x") == 2
    assert run("train", "--data", work / "train.txt", "--net", "ksn",
               "--out", tmp_path / "k.bin") == 2
    assert "--ppn" in capsys.readouterr().err
    assert run("compare-param", "--set", 1, "--count", 2, "--out", tmp_path / "r.json") == 2
    assert run("sweep-knots", "--ppn", work / "ppn.bin", "--ksn", work / "ksn.bin",
               "--count", 2, "--out", tmp_path / "s.json") == 2  # no kappa source
    assert run("export", "--out", tmp_path / "x.csv") == 2
    assert run("frobnicate") == 2


def test_runtime_failures_exit_1(work, tmp_path, capsys):
    assert run("compare-param", "--data", tmp_path / "missing.txt", "--baselines-only",
               "--out", tmp_path / "r.json") == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("0,0\n1,zero\n2,2\n")
    assert run("approximate", "--input", bad, "--ppn", work / "ppn.bin", "--ksn",
               work / "ksn.bin", "--kappa-threshold", 5, "--l", L, "--out", tmp_path / "c") == 1
    assert "line 2" in capsys.readouterr().err
    # a KSN file where a PPN is expected
    assert run("compare-param", "--set", 1, "--count", 2, "--ppn", work / "ksn.bin",
               "--out", tmp_path / "r.json") == 1


def test_baselines_only_needs_no_model(tmp_path, capsys):
    out = tmp_path / "t1.json"
    assert run("compare-param", "--set", 1, "--count", 3, "--points", 60, "--l", L,
               "--baselines-only", "--out", out, "--csv", tmp_path / "t1.csv") == 0
    payload = json.loads(out.read_text())
    assert payload["methods"] == ["uniform", "chordal", "centripetal"]
    assert len(payload["values"]["chordal"]) == 3
    assert payload["config"]["count"] == 3 and payload["config"]["baselines_only"] is True
    assert (tmp_path / "t1.csv").read_text().splitlines()[0] == "instance,uniform,chordal,centripetal"


def test_compare_param_with_model(work, tmp_path):
    out = tmp_path / "t.json"
    assert run("compare-param", "--set", 2, "--count", 3, "--points", 60, "--l", L,
               "--ppn", work / "ppn.bin", "--out", out) == 0
    payload = json.loads(out.read_text())
    assert payload["methods"][0] == "ppn"
    assert payload["means"]["ppn"] == np.mean(payload["values"]["ppn"])
    again = tmp_path / "again.json"
    run("compare-param", "--set", 2, "--count", 3, "--points", 60, "--l", L,
        "--ppn", work / "ppn.bin", "--out", again)
    assert json.loads(again.read_text())["values"] == payload["values"]


def test_approximate_round_trip(work, tmp_path):
    rng = np.random.default_rng(2)
    s = np.linspace(0, 1, 150)
    pts = np.column_stack([s, 0.3 * np.sin(5 * s) + 0.01 * rng.standard_normal(150)])
    write_points(tmp_path / "p.txt", pts)
    curve_path = tmp_path / "curve.txt"
    assert run("approximate", "--input", tmp_path / "p.txt", "--ppn", work / "ppn.bin",
               "--ksn", work / "ksn.bin", "--train-data", work / "train.txt", "--l", L,
               "--threshold", "1e-3", "--max-knots", 30, "--out", curve_path,
               "--dense", tmp_path / "dense.txt", "--dense-count", 50) == 0
    report = dict(line.split("=", 1) for line in (tmp_path / "curve.txt.report").read_text()
                  .splitlines() if " " not in line)
    assert float(report["threshold"]) == 1e-3 and int(report["max_knots"]) == 30
    assert report["config.threshold"] == "0.001" and report["config.max_knots"] == "30"
    curve = read_curve(curve_path)
    assert curve_hausdorff(curve, read_points(tmp_path / "p.txt")) == float(report["hausdorff"])
    assert read_points(tmp_path / "dense.txt").shape == (50, 2)


def test_config_file_supplies_and_flags_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# eval set\nset = 3\ncount = 2\npoints = 40\nout = " +
                   str(tmp_path / "from_cfg.txt") + "\n")
    assert run("synth", "--config", cfg) == 0
    ds = Dataset.load(tmp_path / "from_cfg.txt")
    assert ds.points.shape == (2, 40, 2)
    assert run("synth", "--config", cfg, "--count", 3, "--out", tmp_path / "flag.txt") == 0
    assert Dataset.load(tmp_path / "flag.txt").points.shape == (3, 40, 2)
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run("synth", "--config", bad, "--out", tmp_path / "x.txt") == 2


def test_sweep_and_export(work, tmp_path):
    out = tmp_path / "sweep.json"
    assert run("sweep-knots", "--set", 3, "--count", 2, "--points", 120, "--l", L,
               "--ppn", work / "ppn.bin", "--ksn", work / "ksn.bin", "--kappa-threshold", 4,
               "--min-knots", 3, "--max-knots", 6, "--out", out) == 0
    assert run("export", "--report", out, "--out", tmp_path / "sweep.csv") == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "interior_knots,parnet,nktp,dpkp"
    assert [line.split(",")[0] for line in lines[1:]] == ["3", "4", "5", "6"]
    assert all(line.endswith(",absent") for line in lines[1:])


def test_export_svg(work, tmp_path):
    pts = np.column_stack([np.linspace(0, 1, 60), np.linspace(0, 1, 60) ** 2])
    write_points(tmp_path / "p.txt", pts)
    assert run("approximate", "--input", tmp_path / "p.txt", "--ppn", work / "ppn.bin",
               "--ksn", work / "ksn.bin", "--kappa-threshold", 5, "--l", L,
               "--out", tmp_path / "c.txt") == 0
    assert run("export", "--input", tmp_path / "p.txt", "--curve", f"parnet={tmp_path / 'c.txt'}",
               "--svg", tmp_path / "c.svg") == 0
    svg = (tmp_path / "c.svg").read_text()
    assert svg.count("<polyline") == 1 and svg.count("<circle") == 60


def test_full_profile_is_selectable(work, tmp_path, capsys):
    # flags override the profile's sizes so this stays fast
    assert run("train", "--data", work / "train.txt", "--profile", "full", "--hidden", "4",
               "--epochs", 1, "--out", tmp_path / "f.bin") == 0
    assert "1 epochs" in capsys.readouterr().out
    assert run("train", "--data", work / "train.txt", "--profile", "huge",
               "--out", tmp_path / "g.bin") == 2
