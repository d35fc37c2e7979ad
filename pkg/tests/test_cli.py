import json
import subprocess
import sys

import numpy as np
import pytest

from eigenshape import GridSpec, eigensolve, gamma_distance, io
from eigenshape.cli import main

from conftest import disk


@pytest.fixture
def masks(tmp_path):
    g = GridSpec.centered((40, 40), 1 / 16)
    a, b = disk(g, 1.0), disk(g, 0.7)
    io.write_mask(tmp_path / "a.pgm", a)
    io.write_mask(tmp_path / "b.pgm", b)
    return tmp_path, a, b


def test_solve(masks, capsys):
    d, a, _ = masks
    assert main(["solve", "--mask", str(d / "a.pgm"), "--k", "2", "--out", str(d / "eig")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "index,eigenvalue,residual"
    ref = eigensolve(a, 2).eigenvalues
    assert float(lines[1].split(",")[1]) == pytest.approx(ref[0], rel=1e-12)
    assert (d / "eig" / "eigen.csv").exists()


def test_torsion(masks, capsys):
    d, a, _ = masks
    assert main(["torsion", "--mask", str(d / "a.pgm"), "--out", str(d / "w.pgm")]) == 0
    assert capsys.readouterr().out.startswith("energy=-")
    assert (d / "w.pgm").exists() and (d / "w.pgm.csv").exists()


def test_gamma(masks, capsys):
    d, a, b = masks
    assert main(["gamma", "--mask-a", str(d / "a.pgm"), "--mask-b", str(d / "b.pgm")]) == 0
    out = capsys.readouterr().out
    value = float(out.split()[0].split("=")[1])
    assert value == pytest.approx(gamma_distance(a, b).value, rel=1e-12)


def test_errors_exit_2(tmp_path, capsys):
    assert main(["solve", "--mask", str(tmp_path / "missing.pgm")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_run_exit_codes(tmp_path):
    ok = {
        "name": "sat",
        "grid": {"cells": [16, 16], "center": [0, 0], "cells_per_unit": 16},
        "D": {"type": "ball", "center": [0, 0], "radius": 0.3},
        "problem": {"type": "constrained", "m": "|D|"},
        "checks": [{"name": "equals_D"}],
    }
    failing = {**ok, "name": "fails", "checks": [{"name": "convexity_defect_above", "threshold": 0.5}]}
    (tmp_path / "ok.json").write_text(json.dumps({"scenarios": [ok]}))
    (tmp_path / "bad.json").write_text(json.dumps({"scenarios": [ok, failing]}))
    assert main(["run", str(tmp_path / "ok.json"), "--out", str(tmp_path / "o1"), "--seed", "3"]) == 0
    assert main(["run", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o2")]) == 1


def test_module_entry_point(tmp_path):
    (tmp_path / "empty.json").write_text('{"scenarios": []}')
    proc = subprocess.run(
        [sys.executable, "-m", "eigenshape", "run", str(tmp_path / "empty.json"), "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "scenario" in proc.stdout
