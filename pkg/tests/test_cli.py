import json
import math
import subprocess
import sys

import pytest

from modespec import io
from modespec.cli import main

SMALL = ["--grid", "256"]


def run(*argv):
    return main([str(a) for a in argv])


def test_decompose_ok_and_deterministic(tmp_path):
    assert run("decompose", "astigmatic", "--out", tmp_path / "a", *SMALL) == 0
    assert run("decompose", "astigmatic", "--out", tmp_path / "b", *SMALL) == 0
    for name in ("spectrum.csv", "weights.csv", "weights.dat", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    spec = io.read_spectrum(tmp_path / "a" / "spectrum.csv")
    assert spec.max_order == 9
    assert json.loads((tmp_path / "a" / "report.json").read_text())["max_order"] == 9


def test_decompose_parse_failure(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("what,is,this\n")
    assert run("decompose", bad, "--out", tmp_path) == 2
    assert "expected" in capsys.readouterr().err


def test_missing_input(tmp_path):
    assert run("decompose", tmp_path / "none.csv", "--out", tmp_path) == 2


def test_grid_too_small_is_range_error(tmp_path):
    assert run("decompose", "necklace", "--grid", 32, "--out", tmp_path) == 3


def test_design_lenses(tmp_path):
    assert run("design-lenses", "--out", tmp_path) == 0
    plus = list(io._rows(tmp_path / "curve_plus.csv", ["phi", "R1", "R2", "defect"]))
    minus = list(io._rows(tmp_path / "curve_minus.csv", ["phi", "Omega", "alpha1", "alpha2", "defect"]))
    assert len(plus) == 51
    row = next(r for _, r in plus if math.isclose(float(r[0]), 2 * math.pi))
    assert float(row[1]) == pytest.approx(1.0) and float(row[2]) == pytest.approx(0.5)
    row = next(r for _, r in minus if math.isclose(float(r[0]), 2 * math.pi))
    assert float(row[1]) == pytest.approx(0.0, abs=1e-12) and float(row[3]) == pytest.approx(math.pi / 4)
    assert max(float(r[-1]) for _, r in plus + minus) < 1e-9
    train = io.read_train(tmp_path / "train_plus_2.0000pi.csv")
    assert len(train) == 5
    assert (tmp_path / "curve_plus.dat").read_text().startswith("# phi R1 R2 defect")


def test_design_range_error(tmp_path):
    assert run("design-lenses", "--phi-min", 0.5, "--out", tmp_path) == 3


def test_scan_and_reconstruct_pure_ground(tmp_path):
    spec = tmp_path / "g.csv"
    spec.write_text("nx,ny,re,im\n0,0,1,0\n")
    assert run("simulate-scan", spec, "--engine", "analytic", "--out", tmp_path) == 0
    a, b = tmp_path / "scan_identity.csv", tmp_path / "scan_minus_identity.csv"
    assert io.read_scan(a).values.min() == 2.0
    assert run("reconstruct", a, b, "--out", tmp_path / "r") == 0
    w = io.read_weights(tmp_path / "r" / "weights.csv")
    assert w[(0, 0)] == pytest.approx(1.0, abs=1e-12)
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    assert rep["sampling_ok"] is True and rep["K_plus"] == 10


def test_aliased_reconstruction_flags(tmp_path):
    assert run("simulate-scan", "random", "--engine", "analytic", "--max-order", 13, "--seed", 4,
               "--out", tmp_path) == 0
    assert run("reconstruct", tmp_path / "scan_identity.csv", tmp_path / "scan_minus_identity.csv",
               "--max-order", 13, "--out", tmp_path / "r") == 0
    assert json.loads((tmp_path / "r" / "report.json").read_text())["sampling_ok"] is False


def test_kernel_cross_check_and_compare(tmp_path):
    assert run("simulate-scan", "necklace", "--engine", "kernel", "--cross-check", "--out", tmp_path, *SMALL) == 0
    assert json.loads((tmp_path / "cross_check.json").read_text())["max_deviation"] < 1e-3
    assert run("decompose", "necklace", "--out", tmp_path / "o", *SMALL) == 0
    assert run("reconstruct", tmp_path / "scan_identity.csv", tmp_path / "scan_minus_identity.csv",
               "--compare", tmp_path / "o" / "spectrum.csv", "--out", tmp_path / "r") == 0
    cmp = json.loads((tmp_path / "r" / "comparison.json").read_text())
    assert cmp["max_error"] < 1e-3 and cmp["total_variation"] < 5e-3
    dat = (tmp_path / "scan_identity.dat").read_text().split("\n\n")
    assert len(dat) == 10


def test_compare_tolerance_failure(tmp_path):
    (tmp_path / "a.csv").write_text("nx,ny,weight\n0,0,1.0\n")
    (tmp_path / "b.csv").write_text("nx,ny,weight\n0,0,0.5\n1,0,0.5\n")
    assert run("compare", tmp_path / "a.csv", tmp_path / "b.csv", "--out", tmp_path) == 1
    assert run("compare", tmp_path / "a.csv", tmp_path / "b.csv", "--tol", 0.6, "--out", tmp_path) == 0


def test_mismatched_scans(tmp_path):
    spec = tmp_path / "g.csv"
    spec.write_text("nx,ny,re,im\n0,0,1,0\n")
    run("simulate-scan", spec, "--engine", "analytic", "--out", tmp_path / "x")
    run("simulate-scan", spec, "--engine", "analytic", "--k-plus", 6, "--out", tmp_path / "y")
    assert run("reconstruct", tmp_path / "x" / "scan_identity.csv", tmp_path / "y" / "scan_minus_identity.csv",
               "--out", tmp_path) == 2


def test_complex_request_warns(tmp_path, caplog):
    spec = tmp_path / "g.csv"
    spec.write_text("nx,ny,re,im\n0,0,1,0\n")
    run("simulate-scan", spec, "--engine", "analytic", "--out", tmp_path)
    run("reconstruct", tmp_path / "scan_identity.csv", tmp_path / "scan_minus_identity.csv", "--complex",
        "--out", tmp_path)
    assert "not recoverable" in caplog.text


def test_misalignment_study_outputs(tmp_path):
    code = run("misalignment-study", "--grid", 128, "--k-plus", 2, "--k-minus", 2, "--deltas", 0.02, 0.04,
               "--out", tmp_path)
    out = json.loads((tmp_path / "misalignment.json").read_text())
    assert code == (0 if abs(out["slope"] - 2) <= 0.1 else 1)
    assert out["slope"] == pytest.approx(2.0, abs=0.1)
    rows = list(io._rows(tmp_path / "misalignment.csv", ["delta_over_w0", "error", "ground_weight"]))
    assert [float(r[0]) for _, r in rows] == [0.0, 0.02, 0.04]


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "modespec.cli", "design-lenses", "--points", "5", "--out",
                        str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0
    assert "max matrix defect" in r.stdout
