"""Scenario runner: build the constraint set, optimise, check, write artifacts."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import io
from .diagnostics import verify_growth_lemma
from .errors import ConfigError
from .grid import (
    ConstraintPair,
    DomainMask,
    GridSpec,
    connected_components,
    convexity_defect,
    excess_distance,
    measure,
)
from .optimize import (
    ConstrainedProblem,
    ObjectiveSpec,
    OptimizationTrace,
    PenalizedProblem,
    detect_case,
    optimize_constrained,
    optimize_penalized,
)
from .solver import SolverConfig, eigensolve

logger = logging.getLogger(__name__)

SEED_ENV = "EIGENSHAPE_SEED"


# ------------------------------------------------------------------ builders
@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class Rectangle:
    center: tuple[float, ...]
    half_widths: tuple[float, ...]


@dataclass(frozen=True)
class SingleCell:
    index: tuple[int, ...]


@dataclass(frozen=True)
class Union:
    parts: tuple["Builder", ...]


Builder = Union | Ball | Rectangle | SingleCell  # type: ignore[operator]


def _check_inside(grid: GridSpec, lo: Sequence[float], hi: Sequence[float], what: str) -> None:
    for a in range(grid.dim):
        g_lo = grid.origin[a]
        g_hi = g_lo + grid.shape[a] * grid.h
        if lo[a] < g_lo - 1e-12 or hi[a] > g_hi + 1e-12:
            raise ConfigError(f"{what} extends outside the grid along axis {a}")


def _axis_run(grid: GridSpec, axis: int, c: float, hw: float) -> np.ndarray:
    centers = grid.axis_centers(axis)
    sel = np.abs(centers - c) < hw
    if not sel.any():
        warnings.warn(
            f"half-width {hw} below h/2 = {grid.h / 2} on axis {axis}; using a one-cell strip",
            RuntimeWarning,
        )
        sel[int(np.argmin(np.abs(centers - c)))] = True
    return sel


def rasterize(builder: Builder, grid: GridSpec) -> DomainMask:
    """Cells whose centre lies in the (open) primitive; unions are cellwise or."""
    if isinstance(builder, Union):
        cells = np.zeros(grid.shape, dtype=bool)
        for part in builder.parts:
            cells |= rasterize(part, grid).cells
        return DomainMask(grid, cells)
    if isinstance(builder, SingleCell):
        idx = tuple(int(i) for i in builder.index)
        if len(idx) != grid.dim or any(not 0 <= i < n for i, n in zip(idx, grid.shape)):
            raise ConfigError(f"cell index {idx} outside grid {grid.shape}")
        cells = np.zeros(grid.shape, dtype=bool)
        cells[idx] = True
        return DomainMask(grid, cells)
    if isinstance(builder, Rectangle):
        c, hw = builder.center, builder.half_widths
        _check_inside(grid, [x - w for x, w in zip(c, hw)], [x + w for x, w in zip(c, hw)], "rectangle")
        runs = [_axis_run(grid, a, c[a], hw[a]) for a in range(grid.dim)]
        cells = runs[0]
        for r in runs[1:]:
            cells = np.multiply.outer(cells, r)
        return DomainMask(grid, cells)
    if isinstance(builder, Ball):
        c, r = builder.center, builder.radius
        _check_inside(grid, [x - r for x in c], [x + r for x in c], "ball")
        d2 = sum((X - x) ** 2 for X, x in zip(grid.centers(), c))
        cells = d2 < r * r
        if not cells.any():
            warnings.warn(f"ball of radius {r} holds no cell centre; using one cell", RuntimeWarning)
            cells[np.unravel_index(int(np.argmin(d2)), grid.shape)] = True
        return DomainMask(grid, cells)
    raise TypeError(f"unknown builder {builder!r}")


def builder_from_json(obj: Any, grid: GridSpec) -> Builder:
    if isinstance(obj, list):
        return Union(tuple(builder_from_json(o, grid) for o in obj))
    kind = obj.get("type")
    if kind == "ball":
        return Ball(tuple(obj["center"]), float(obj["radius"]))
    if kind == "rectangle":
        return Rectangle(tuple(obj["center"]), tuple(obj["half_widths"]))
    if kind == "single_cell":
        if "index" in obj:
            return SingleCell(tuple(obj["index"]))
        return SingleCell(grid.index_of(obj["point"]))
    if kind == "union":
        return Union(tuple(builder_from_json(o, grid) for o in obj["parts"]))
    raise ConfigError(f"unknown D builder type {kind!r}")


def grid_from_json(obj: dict) -> GridSpec:
    cpu = float(obj["cells_per_unit"])
    if "lower" in obj:
        return GridSpec.from_extent(obj["lower"], obj["upper"], cpu)
    cells = tuple(int(n) for n in obj["cells"])
    return GridSpec.centered(cells, 1.0 / cpu, obj.get("center"))


# ------------------------------------------------------------------ scenario
@dataclass(frozen=True)
class CheckSpec:
    name: str
    threshold: Any = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: GridSpec
    D: Builder
    problem: dict
    checks: tuple[CheckSpec, ...] = ()
    seed: int = 0

    def build_D(self) -> DomainMask:
        return rasterize(self.D, self.grid)


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    measured: Any
    threshold: Any
    passed: bool


@dataclass
class RunReport:
    scenario: str
    objective: float = float("nan")
    measure: float = float("nan")
    checks: list[CheckOutcome] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)
    wall_time: float = 0.0
    error: str | None = None
    mask: DomainMask | None = field(default=None, repr=False)
    D: DomainMask | None = field(default=None, repr=False)
    target_measure: float | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)


@dataclass
class _Context:
    scenario: Scenario
    D: DomainMask
    omega: DomainMask
    trace: OptimizationTrace
    objective: float
    cfg: SolverConfig
    target_measure: float | None


def _ball_diameter(area: float, dim: int) -> float:
    if dim == 2:
        return 2.0 * math.sqrt(max(area, 0.0) / math.pi)
    return 2.0 * (3.0 * max(area, 0.0) / (4.0 * math.pi)) ** (1.0 / 3.0)


def _check_eigenvalue_rel_error(ctx, spec):
    k = int(spec.params.get("k", 1))
    lam = float(eigensolve(ctx.omega, k, ctx.cfg).eigenvalues[-1])
    err = abs(lam - float(spec.params["reference"])) / float(spec.params["reference"])
    return err, err <= spec.threshold


def _check_convexity_max(ctx, spec):
    d = convexity_defect(ctx.omega)
    return d, d < spec.threshold


def _check_convexity_min(ctx, spec):
    d = convexity_defect(ctx.omega)
    return d, d > spec.threshold


def _check_measure_saturation(ctx, spec):
    cells = 1.0 if spec.threshold is None else float(spec.threshold)
    gap = abs(measure(ctx.omega) - ctx.target_measure)
    return gap, gap <= cells * ctx.D.grid.cell_volume


def _check_boundedness(ctx, spec):
    pad = 4.0 if spec.threshold is None else float(spec.threshold)
    g = ctx.D.grid
    dist = excess_distance(ConstraintPair(ctx.D, ctx.omega))
    added = (ctx.target_measure if ctx.target_measure is not None else measure(ctx.omega)) - measure(ctx.D)
    bound = _ball_diameter(added, g.dim) + pad * g.h
    return dist, dist <= bound


def _check_case(ctx, spec):
    case = detect_case(ConstraintPair(ctx.D, ctx.omega))
    return case, case == spec.threshold


def _check_competitor(ctx, spec):
    """λ1 of Ω below λ1 of D ∪ B*(m − |D|), the ball of the missing measure at the origin."""
    g = ctx.D.grid
    a = ctx.target_measure - measure(ctx.D)
    r = math.sqrt(a / math.pi)
    comp = ctx.D | rasterize(Ball(tuple(spec.params.get("center", (0.0,) * g.dim)), r), g)
    lam_comp = eigensolve(comp, 1, ctx.cfg).lambda1
    lam = eigensolve(ctx.omega, 1, ctx.cfg).lambda1
    return lam, lam < lam_comp


def _check_growth_zero(ctx, spec):
    h = ctx.D.grid.h
    radii = [float(f) * h for f in spec.params.get("radii_cells", (2, 4, 8))]
    bad = 0
    for comp in connected_components(ctx.omega):
        u = eigensolve(comp, 1, ctx.cfg).eigenfunctions[0]
        bad += verify_growth_lemma(u, comp, 0.0, radii).violations.count
    return bad, bad == 0


def _check_fixed_point(ctx, spec):
    prob = ConstrainedProblem(ctx.D, ctx.target_measure, _objective(ctx.scenario.problem))
    _, tr = optimize_constrained(prob, ctx.cfg, max_outer=1, initial=ctx.omega)
    flips = sum(r.flips for r in tr.rows)
    return flips, flips == 0 and len(tr.rows) == 2


def _check_equals_D(ctx, spec):
    same = ctx.omega == ctx.D
    return same, same


CHECKS: dict[str, Callable] = {
    "eigenvalue_rel_error": _check_eigenvalue_rel_error,
    "convexity_defect_below": _check_convexity_max,
    "convexity_defect_above": _check_convexity_min,
    "measure_saturation": _check_measure_saturation,
    "boundedness": _check_boundedness,
    "case": _check_case,
    "below_ball_competitor": _check_competitor,
    "growth_lemma_zero": _check_growth_zero,
    "fixed_point": _check_fixed_point,
    "equals_D": _check_equals_D,
}


def _objective(problem: dict) -> ObjectiveSpec:
    o = problem.get("objective", {})
    return ObjectiveSpec(o.get("kind", "eigenvalue_k"), int(o.get("k", 1)))


def scenario_from_json(obj: dict, seed: int = 0) -> Scenario:
    try:
        grid = grid_from_json(obj["grid"])
        D = builder_from_json(obj["D"], grid)
        problem = dict(obj["problem"])
        checks = tuple(
            CheckSpec(c["name"], c.get("threshold"), {k: v for k, v in c.items() if k not in ("name", "threshold")})
            for c in obj.get("checks", [])
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"scenario {obj.get('name', '?')!r}: missing or malformed field {exc}") from exc
    for c in checks:
        if c.name not in CHECKS:
            raise ConfigError(f"scenario {obj['name']!r}: unknown check {c.name!r}")
    if problem.get("type") not in ("constrained", "penalized"):
        raise ConfigError(f"scenario {obj['name']!r}: problem type must be constrained or penalized")
    return Scenario(str(obj["name"]), grid, D, problem, checks, int(obj.get("seed", seed)))


def _solve(s: Scenario, D: DomainMask, cfg: SolverConfig):
    p = s.problem
    obj = _objective(p)
    max_outer = int(p.get("max_outer", 200))
    if p["type"] == "constrained":
        m = measure(D) if p["m"] == "|D|" else float(p["m"])
        if m < measure(D) - 0.5 * D.grid.cell_volume:
            raise ConfigError(f"scenario {s.name!r}: m = {m} is below |D| = {measure(D)}")
        omega, trace = optimize_constrained(ConstrainedProblem(D, m, obj), cfg, max_outer)
        return omega, trace, m
    omega, trace = optimize_penalized(
        PenalizedProblem(D, float(p["penalty"]), obj),
        cfg,
        float(p["m_max"]),
        scan_points=int(p.get("scan_points", 9)),
        max_outer=max_outer,
    )
    return omega, trace, None


def run_scenario(s: Scenario, output_dir: str | Path, cfg: SolverConfig | None = None) -> RunReport:
    """Run one scenario; writes ``D.pgm``, ``mask.pgm``, ``trace.csv`` and ``report.csv``."""
    cfg = cfg or SolverConfig(seed=s.seed)
    out = Path(output_dir) / s.name
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report = RunReport(s.name)
    D = s.build_D()
    omega, trace, m = _solve(s, D, cfg)
    ctx = _Context(s, D, omega, trace, float(trace.rows[-1].objective), cfg, m)
    report.objective = min(r.objective for r in trace.rows)
    report.measure = measure(omega)
    report.mask, report.D, report.target_measure = omega, D, m
    for spec in s.checks:
        measured, ok = CHECKS[spec.name](ctx, spec)
        report.checks.append(CheckOutcome(spec.name, measured, spec.threshold, bool(ok)))
    io.write_mask(out / "D.pgm", D)
    io.write_mask(out / "mask.pgm", omega)
    io.write_trace(out / "trace.csv", trace)
    report.artifacts = {
        "D": str(out / "D.pgm"),
        "mask": str(out / "mask.pgm"),
        "trace": str(out / "trace.csv"),
        "report": str(out / "report.csv"),
    }
    report.wall_time = time.perf_counter() - t0
    with open(out / "report.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["check", "measured", "threshold", "passed"])
        for c in report.checks:
            wr.writerow([c.name, c.measured, c.threshold, c.passed])
    return report


# --------------------------------------------------------------------- suite
def _line_of(text: str, pattern: str, occurrence: int = 1) -> int | None:
    hits = [m.start() for m in re.finditer(pattern, text)]
    if len(hits) < occurrence:
        return None
    return text.count("\n", 0, hits[occurrence - 1]) + 1


def resolve_seed(config_seed: int, cli_seed: int | None = None) -> int:
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return int(env)
    return int(config_seed)


def load_suite(config_file: str | Path, seed: int | None = None) -> list[Scenario]:
    path = Path(config_file)
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if isinstance(cfg, list):
        cfg = {"scenarios": cfg}
    base_seed = resolve_seed(int(cfg.get("seed", 0)), seed)
    scenarios = []
    seen: dict[str, int] = {}
    for obj in cfg.get("scenarios", []):
        name = str(obj.get("name", ""))
        seen[name] = seen.get(name, 0) + 1
        if seen[name] > 1:
            line = _line_of(text, r'"name"\s*:\s*"' + re.escape(name) + '"', seen[name])
            raise ConfigError(f"{path}:{line}: duplicate scenario name {name!r}")
        sc = scenario_from_json(obj, base_seed)
        if seed is not None or os.environ.get(SEED_ENV):
            sc = Scenario(sc.name, sc.grid, sc.D, sc.problem, sc.checks, base_seed)
        scenarios.append(sc)
    return scenarios


@dataclass
class SuiteSummary:
    reports: list[RunReport]
    summary_csv: Path | None = None
    table: str = ""

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def _run_guarded(args) -> RunReport:
    s, out = args
    try:
        return run_scenario(s, out)
    except Exception as exc:  # a failing scenario must not sink the suite
        logger.exception("scenario %s failed", s.name)
        return RunReport(s.name, error=f"{type(exc).__name__}: {exc}")


def format_table(reports: Sequence[RunReport]) -> str:
    head = f"{'scenario':<24} {'status':<6} {'objective':>12} {'measure':>10} {'time[s]':>8}  failed checks"
    lines = [head, "-" * len(head)]
    for r in reports:
        failed = ", ".join(c.name for c in r.checks if not c.passed) or (r.error or "")
        lines.append(
            f"{r.scenario:<24} {'PASS' if r.passed else 'FAIL':<6} {r.objective:>12.6g} "
            f"{r.measure:>10.5g} {r.wall_time:>8.1f}  {failed}"
        )
    return "\n".join(lines)


def run_suite(config_file: str | Path, output_dir: str | Path, jobs: int = 1, seed: int | None = None) -> SuiteSummary:
    scenarios = load_suite(config_file, seed)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    work = [(s, out) for s in scenarios]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_run_guarded, work))
    else:
        reports = [_run_guarded(w) for w in work]
    summary = out / "summary.csv"
    with open(summary, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario", "passed", "objective", "measure", "failed_checks", "wall_time", "error"])
        for r in reports:
            failed = ";".join(c.name for c in r.checks if not c.passed)
            wr.writerow([r.scenario, r.passed, repr(float(r.objective)), repr(float(r.measure)), failed, f"{r.wall_time:.3f}", r.error or ""])
    table = format_table(reports)
    (out / "summary.txt").write_text(table + "\n")
    return SuiteSummary(reports, summary, table)


# ------------------------------------------------------------ penalty scan
def penalty_case_scan(
    D: DomainMask, penalties: Sequence[float], m_max: float, cfg: SolverConfig | None = None, **kw
) -> list[tuple[float, str, float]]:
    """``(penalty, case, measure)`` for each penalty on a two-core ``D``."""
    rows = []
    for lam in penalties:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            omega, _ = optimize_penalized(PenalizedProblem(D, float(lam)), cfg, m_max, **kw)
        rows.append((float(lam), detect_case(ConstraintPair(D, omega)), measure(omega)))
    return rows
