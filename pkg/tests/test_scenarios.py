import csv
import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from eigenshape import ConfigError, GridSpec, measure
from eigenshape.scenarios import (
    Ball,
    Rectangle,
    SingleCell,
    Union,
    load_suite,
    rasterize,
    resolve_seed,
    run_scenario,
    run_suite,
    scenario_from_json,
)

SMALL = {
    "name": "small_fk",
    "grid": {"cells": [40, 40], "center": [0, 0], "cells_per_unit": 16},
    "D": {"type": "single_cell", "point": [0, 0]},
    "problem": {"type": "constrained", "m": 1.0},
    "checks": [
        {"name": "measure_saturation", "threshold": 1},
        {"name": "boundedness", "threshold": 4},
        {"name": "convexity_defect_below", "threshold": 0.1},
    ],
}
SATURATED = {
    "name": "saturated",
    "grid": {"cells": [32, 32], "center": [0, 0], "cells_per_unit": 32},
    "D": {"type": "ball", "center": [0, 0], "radius": 0.3},
    "problem": {"type": "constrained", "m": "|D|"},
    "checks": [{"name": "equals_D"}, {"name": "measure_saturation", "threshold": 1}],
}
PENALIZED = {
    "name": "pen",
    "grid": {"cells": [40, 40], "center": [0, 0], "cells_per_unit": 16},
    "D": {"type": "ball", "center": [0, 0], "radius": 0.25},
    "problem": {"type": "penalized", "penalty": 10.0, "m_max": 2.0},
    "checks": [{"name": "boundedness", "threshold": 4}],
}


def write_suite(path, scenarios, **extra):
    path.write_text(json.dumps({"seed": 0, **extra, "scenarios": scenarios}, indent=2))
    return path


# ---------------------------------------------------------------- rasterize
def test_rasterize_ball_measure():
    g = GridSpec.centered((80, 80), 1 / 64)
    m = rasterize(Ball((0.0, 0.0), 0.5), g)
    assert abs(measure(m) - math.pi / 4) <= 2 * g.h


def test_rasterize_strip_is_exact():
    g = GridSpec.from_extent((-1.5, -1.5), (1.5, 1.5), 64)
    m = rasterize(Rectangle((0.0, 0.0), (0.125, 1.0)), g)
    assert measure(m) == pytest.approx(0.5, abs=1e-12)


def test_rasterize_thin_strip_warns():
    g = GridSpec.centered((32, 32), 1 / 16)
    with pytest.warns(RuntimeWarning, match="one-cell"):
        m = rasterize(Rectangle((0.0, 0.0), (0.01, 0.5)), g)
    assert np.count_nonzero(m.cells.any(axis=1)) == 1
    assert m.count == 16


def test_rasterize_out_of_bounds():
    g = GridSpec.centered((16, 16), 1 / 8)
    with pytest.raises(ConfigError):
        rasterize(Ball((0.9, 0.0), 0.5), g)
    with pytest.raises(ConfigError):
        rasterize(SingleCell((16, 0)), g)


def test_rasterize_union_is_cellwise_or():
    g = GridSpec.centered((32, 32), 1 / 16)
    a, b = Ball((-0.3, 0.0), 0.4), Rectangle((0.4, 0.1), (0.2, 0.5))
    u = rasterize(Union((a, b)), g)
    assert u == rasterize(a, g) | rasterize(b, g)


@settings(max_examples=60)
@given(
    st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.1, 0.6),
    st.floats(0.0, 0.4), st.floats(0.0, 0.4), st.floats(0.0, 0.4),
)
def test_rasterize_monotone(cx, cy, r, dx, dy, grow):
    # balls: B(c, r) inside B(c', r') whenever |c - c'| + r <= r'
    g = GridSpec.centered((64, 64), 1 / 24)
    small = Ball((cx, cy), r)
    big = Ball((cx + dx, cy + dy), r + math.hypot(dx, dy) + grow)
    assume(abs(cx + dx) + big.radius < 1.3 and abs(cy + dy) + big.radius < 1.3)
    assert rasterize(small, g).issubset(rasterize(big, g))
    # rectangles: grow each half-width
    rs = Rectangle((cx, cy), (r, r / 2))
    rb = Rectangle((cx, cy), (r + dx, r / 2 + dy))
    assert rasterize(rs, g).issubset(rasterize(rb, g))


# ------------------------------------------------------------------ config
def test_json_builders_and_grid():
    s = scenario_from_json(
        {
            "name": "x",
            "grid": {"lower": [-1, -1], "upper": [1, 1], "cells_per_unit": 8},
            "D": [{"type": "ball", "center": [0, 0], "radius": 0.3},
                  {"type": "single_cell", "index": [0, 0]}],
            "problem": {"type": "constrained", "m": 1.0},
        }
    )
    assert s.grid.shape == (16, 16) and s.grid.h == 0.125
    D = s.build_D()
    assert D.cells[0, 0] and D.count > 1


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown check"):
        scenario_from_json({**SMALL, "checks": [{"name": "nope"}]})
    with pytest.raises(ConfigError, match="problem type"):
        scenario_from_json({**SMALL, "problem": {"type": "free"}})
    with pytest.raises(ConfigError, match="missing"):
        scenario_from_json({"name": "y"})


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "scenarios": [\n    {"name": "a",}\n  ]\n}\n')
    with pytest.raises(ConfigError, match=r"bad\.json:3:"):
        load_suite(path)


def test_duplicate_names_rejected(tmp_path):
    path = write_suite(tmp_path / "dup.json", [SMALL, SATURATED, SMALL])
    with pytest.raises(ConfigError, match="duplicate scenario name 'small_fk'") as exc:
        load_suite(path)
    line = int(str(exc.value).split(":")[1])
    assert '"name": "small_fk"' in path.read_text().splitlines()[line - 1]


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv("EIGENSHAPE_SEED", raising=False)
    assert resolve_seed(3) == 3
    monkeypatch.setenv("EIGENSHAPE_SEED", "11")
    assert resolve_seed(3) == 11
    assert resolve_seed(3, 5) == 5


def test_env_seed_overrides_config(tmp_path, monkeypatch):
    path = write_suite(tmp_path / "s.json", [{**SMALL, "seed": 4}])
    monkeypatch.delenv("EIGENSHAPE_SEED", raising=False)
    assert load_suite(path)[0].seed == 4
    monkeypatch.setenv("EIGENSHAPE_SEED", "9")
    assert load_suite(path)[0].seed == 9


# ----------------------------------------------------------------- running
def test_saturated_scenario(tmp_path):
    rep = run_scenario(scenario_from_json(SATURATED), tmp_path)
    assert rep.passed
    assert rep.mask == rep.D
    rows = (tmp_path / "saturated" / "trace.csv").read_text().splitlines()
    assert len(rows) == 2
    for name in ("D.pgm", "mask.pgm", "trace.csv", "report.csv"):
        assert (tmp_path / "saturated" / name).exists()


def test_infeasible_target_is_config_error(tmp_path):
    s = scenario_from_json({**SMALL, "problem": {"type": "constrained", "m": 0.0001},
                            "D": {"type": "ball", "center": [0, 0], "radius": 0.3}})
    with pytest.raises(ConfigError):
        run_scenario(s, tmp_path)


def test_every_check_reported_once(tmp_path):
    rep = run_scenario(scenario_from_json(SMALL), tmp_path)
    assert [c.name for c in rep.checks] == [c["name"] for c in SMALL["checks"]]
    with open(tmp_path / "small_fk" / "report.csv") as fh:
        assert len(list(csv.reader(fh))) == len(SMALL["checks"]) + 1


def test_empty_suite(tmp_path):
    summary = run_suite(write_suite(tmp_path / "e.json", []), tmp_path / "out")
    assert summary.passed and summary.reports == []
    assert (tmp_path / "out" / "summary.csv").read_text().startswith("scenario,passed")


def test_partial_failure_still_summarised(tmp_path):
    broken = {**SMALL, "name": "cramped", "problem": {"type": "constrained", "m": 9.0}}
    summary = run_suite(write_suite(tmp_path / "s.json", [broken, SATURATED]), tmp_path / "out")
    assert not summary.passed
    by_name = {r.scenario: r for r in summary.reports}
    assert "DomainTooSmallError" in by_name["cramped"].error
    assert by_name["saturated"].passed
    text = (tmp_path / "out" / "summary.txt").read_text()
    assert "cramped" in text and "FAIL" in text


def _digest(summary):
    return {r.scenario: (r.objective, r.measure, r.mask.cells.tobytes(),
                         [(c.name, c.measured) for c in r.checks]) for r in summary.reports}


def test_suite_reproducible_and_order_independent(tmp_path):
    scen = [SMALL, SATURATED, PENALIZED]
    a = run_suite(write_suite(tmp_path / "a.json", scen), tmp_path / "a")
    b = run_suite(write_suite(tmp_path / "b.json", scen[::-1]), tmp_path / "b")
    c = run_suite(write_suite(tmp_path / "c.json", scen), tmp_path / "c", jobs=2)
    assert _digest(a) == _digest(b) == _digest(c)
    assert [r.scenario for r in c.reports] == ["small_fk", "saturated", "pen"]
