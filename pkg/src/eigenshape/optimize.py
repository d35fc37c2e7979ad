"""Shape descent with an inclusion constraint ``D ⊆ Ω``.

Each outer step rearranges the domain into a superlevel set of the current
mode density (first eigenfunction, a mean of squared eigenfunctions for
``k >= 2``, or the torsion function for the energy objective), unioned with
``D`` and cut to the target cell count. The density is zero outside the
current domain, so before thresholding it is spread one smoothing length
into the exterior with a Gaussian filter; the exterior value then grows with
the normal slope of the mode at the nearby boundary, which is the direction
that lowers the eigenvalue. A step is accepted only if it lowers the
objective; otherwise the swap set is halved until it does or until a single
swap fails, which makes the final domain an exact fixed point of the step.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DomainTooSmallError, EmptyMaskError
from .grid import ConstraintPair, DomainMask, ScalarField, connected_components, measure
from .metrics import energy as torsion_energy
from .solver import SolverConfig, eigensolve, torsion_with_residual

logger = logging.getLogger(__name__)

MAX_K = 6
DEFAULT_SMOOTHING = (8.0, 4.0, 2.0, 1.0)


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str = "eigenvalue_k"
    k: int = 1

    def __post_init__(self):
        if self.kind not in ("eigenvalue_k", "energy"):
            raise ConfigError(f"unknown objective kind {self.kind!r}")
        if not 1 <= self.k <= MAX_K:
            raise ConfigError(f"k must lie in [1, {MAX_K}]")


@dataclass(frozen=True, eq=False)
class ConstrainedProblem:
    D: DomainMask
    m: float
    objective: ObjectiveSpec = ObjectiveSpec()

    def __post_init__(self):
        if self.D.is_empty():
            raise EmptyMaskError("constraint set D must be nonempty")
        if self.m < measure(self.D) - 0.5 * self.D.grid.cell_volume:
            raise ConfigError(f"target measure {self.m} is below |D| = {measure(self.D)}")


@dataclass(frozen=True, eq=False)
class PenalizedProblem:
    D: DomainMask
    penalty: float
    objective: ObjectiveSpec = ObjectiveSpec()

    def __post_init__(self):
        if self.D.is_empty():
            raise EmptyMaskError("constraint set D must be nonempty")
        if not self.penalty > 0:
            raise ConfigError("penalty must be > 0")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    measure: float
    flips: int
    residual: float


@dataclass
class OptimizationTrace:
    rows: list[TraceRow] = field(default_factory=list)
    status: str = "budget_exhausted"

    def append(self, iteration: int, objective: float, measure: float, flips: int, residual: float) -> None:
        self.rows.append(TraceRow(int(iteration), float(objective), float(measure), int(flips), float(residual)))

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.rows])

    def running_minimum(self) -> np.ndarray:
        return np.minimum.accumulate(self.objectives)


@dataclass(frozen=True, eq=False)
class Evaluation:
    value: float
    density: np.ndarray
    residual: float


def evaluate(mask: DomainMask, objective: ObjectiveSpec, cfg: SolverConfig) -> Evaluation:
    """Objective value and the mode density that drives the rearrangement."""
    if objective.kind == "energy":
        w, res = torsion_with_residual(mask, cfg)
        return Evaluation(-w.integral(), w.values, res)
    k = min(objective.k, mask.count)
    eig = eigensolve(mask, k, cfg)
    if objective.k == 1:
        dens = np.abs(eig.eigenfunctions[0].values)
    else:
        dens = np.mean([f.values**2 for f in eig.eigenfunctions], axis=0)
    return Evaluation(float(eig.eigenvalues[-1]), dens, float(eig.residuals.max()))


def objective_value(mask: DomainMask, objective: ObjectiveSpec, cfg: SolverConfig) -> float:
    if objective.kind == "energy":
        return torsion_energy(mask, cfg)
    return float(eigensolve(mask, objective.k, cfg).eigenvalues[-1])


def target_cells(D: DomainMask, m: float) -> int:
    n = int(round(m / D.grid.cell_volume))
    return max(n, D.count)


def initial_domain(D: DomainMask, n_cells: int) -> DomainMask:
    """Grow ``D`` by face dilation until it has ``n_cells``; trim the last ring in index order."""
    cur = D
    while cur.count < n_cells:
        nxt = cur.dilate(1)
        if nxt.count == cur.count:
            raise DomainTooSmallError("grid is too small to hold the target measure")
        if nxt.count >= n_cells:
            ring = np.flatnonzero((nxt.cells & ~cur.cells).ravel())
            keep = ring[: n_cells - cur.count]
            cells = cur.cells.copy().ravel()
            cells[keep] = True
            return DomainMask(D.grid, cells.reshape(D.grid.shape))
        cur = nxt
    return cur


def _ranked(values: np.ndarray, candidates: np.ndarray, descending: bool) -> np.ndarray:
    """Flat indices of ``candidates`` ordered by value, ties by index."""
    idx = np.flatnonzero(candidates.ravel())
    v = values.ravel()[idx]
    order = np.lexsort((idx, -v if descending else v))
    return idx[order]


def rearrange(D: DomainMask, density: np.ndarray, n_cells: int, smoothing: float) -> tuple[DomainMask, np.ndarray]:
    """``D`` plus the highest-scoring free cells, ``n_cells`` in total."""
    score = ndimage.gaussian_filter(density, smoothing, mode="constant") if smoothing > 0 else density
    free = n_cells - D.count
    chosen = _ranked(score, ~D.cells, descending=True)[:free]
    cells = D.cells.copy().ravel()
    cells[chosen] = True
    return DomainMask(D.grid, cells.reshape(D.grid.shape)), score


def _descent_step(D, cur, ev, n_cells, sigma, objective, cfg):
    cand, score = rearrange(D, ev.density, n_cells, sigma)
    add = _ranked(score, cand.cells & ~cur.cells, descending=True)
    rem = _ranked(score, cur.cells & ~cand.cells, descending=False)
    s = min(add.size, rem.size)
    while s >= 1:
        cells = cur.cells.copy().ravel()
        cells[add[:s]] = True
        cells[rem[:s]] = False
        trial = DomainMask(D.grid, cells.reshape(D.grid.shape))
        tev = evaluate(trial, objective, cfg)
        if tev.value < ev.value - cfg.tolerance * abs(ev.value):
            return trial, tev, 2 * s
        s //= 2
    return None


def optimize_constrained(
    p: ConstrainedProblem,
    cfg: SolverConfig | None = None,
    max_outer: int = 200,
    *,
    initial: DomainMask | None = None,
    smoothing: Sequence[float] = DEFAULT_SMOOTHING,
    callback: Callable[[int, DomainMask], None] | None = None,
) -> tuple[DomainMask, OptimizationTrace]:
    """Minimise the objective over masks ``Ω ⊇ D`` with ``|Ω| = m`` (to one cell).

    ``smoothing`` lists Gaussian spreading lengths in cells, tried in order at
    every step; the run stops when none of them yields a descent step.
    ``initial`` replaces the dilation start, e.g. to restart from an optimum.
    ``callback(iteration, mask)`` sees every recorded iterate.
    """
    smoothing = tuple(np.atleast_1d(smoothing).astype(float))
    cfg = cfg or SolverConfig()
    D = p.D
    trace = OptimizationTrace()
    n_cells = target_cells(D, p.m)
    vol = D.grid.cell_volume
    if n_cells == D.count:
        ev = evaluate(D, p.objective, cfg)
        trace.append(0, ev.value, measure(D), 0, ev.residual)
        trace.status = "converged"
        return D, trace

    if initial is None:
        cur = initial_domain(D, n_cells)
    else:
        if initial.count != n_cells or not D.issubset(initial):
            raise ConfigError("initial domain must contain D and have the target measure")
        cur = initial
    ev = evaluate(cur, p.objective, cfg)
    trace.append(0, ev.value, cur.count * vol, 0, ev.residual)
    if callback is not None:
        callback(0, cur)

    for it in range(1, max_outer + 1):
        flips = 0
        for sigma in smoothing:
            step = _descent_step(D, cur, ev, n_cells, sigma, p.objective, cfg)
            if step is not None:
                cur, ev, flips = step
                break
        trace.append(it, ev.value, cur.count * vol, flips, ev.residual)
        if callback is not None:
            callback(it, cur)
        if flips == 0:
            trace.status = "converged"
            break

    if cur.touches_boundary():
        raise DomainTooSmallError(
            "optimal set touches the edge of the grid; enlarge the bounding box"
        )
    return cur, trace


# ---------------------------------------------------------------- penalized
@dataclass(frozen=True, eq=False)
class _Probe:
    n_cells: int
    mask: DomainMask
    value: float
    penalized: float


def optimize_penalized(
    p: PenalizedProblem,
    cfg: SolverConfig | None = None,
    m_max: float | None = None,
    *,
    scan_points: int = 9,
    max_outer: int = 200,
    smoothing: Sequence[float] = DEFAULT_SMOOTHING,
) -> tuple[DomainMask, OptimizationTrace]:
    """Minimise ``objective(Ω) + penalty·|Ω|`` over ``Ω ⊇ D``.

    The volume is searched in one dimension: a uniform scan of ``scan_points``
    budgets on ``[|D|, m_max]`` brackets the best one, then golden-section
    search narrows the bracket down to single cells. Every probe solves the
    constrained problem at that budget.
    """
    cfg = cfg or SolverConfig()
    D = p.D
    vol = D.grid.cell_volume
    if m_max is None or m_max <= measure(D):
        raise ConfigError("m_max must exceed |D|")
    n_lo, n_hi = D.count, int(math.floor(m_max / vol + 1e-9))
    probes: dict[int, _Probe] = {}
    trace = OptimizationTrace()

    def probe(n: int) -> float:
        if n not in probes:
            mask, _ = optimize_constrained(
                ConstrainedProblem(D, n * vol, p.objective), cfg, max_outer, smoothing=smoothing
            )
            val = objective_value(mask, p.objective, cfg)
            probes[n] = _Probe(n, mask, val, val + p.penalty * n * vol)
            trace.append(len(trace.rows), probes[n].penalized, n * vol, n - n_lo, 0.0)
            logger.debug("penalized probe n=%d value=%.6g", n, probes[n].penalized)
        return probes[n].penalized

    grid_pts = np.unique(np.linspace(n_lo, n_hi, max(scan_points, 3)).round().astype(int))
    vals = [probe(int(n)) for n in grid_pts]
    i = int(np.argmin(vals))
    a = int(grid_pts[max(i - 1, 0)])
    b = int(grid_pts[min(i + 1, len(grid_pts) - 1)])

    invphi = (math.sqrt(5) - 1) / 2
    while b - a > 2:
        c = int(round(b - invphi * (b - a)))
        d = int(round(a + invphi * (b - a)))
        if c == d:
            d = c + 1
        if probe(c) <= probe(d):
            b = d
        else:
            a = c
    for n in range(a, b + 1):
        probe(n)

    best = min(probes.values(), key=lambda pr: (pr.penalized, pr.n_cells))
    trace.status = "converged"
    if best.n_cells == n_hi:
        warnings.warn("penalized optimum sits at the volume cap m_max; the cap is binding", RuntimeWarning)
    return best.mask, trace


# ------------------------------------------------------------ case analysis
def _aspect(mask: DomainMask) -> float:
    idx = np.argwhere(mask.cells)
    ext = idx.max(axis=0) - idx.min(axis=0) + 1
    return float(ext.max() / ext.min())


def detect_case(pair: ConstraintPair) -> str:
    """Classify where the extra measure of a two-core configuration went.

    ``"A"``: every added cell sits in the component of Ω holding the round
    core; ``"B"``: every added cell sits with the elongated core; otherwise
    ``"mixed"`` (including no added cells).
    """
    comps = connected_components(pair.D)
    if len(comps) != 2:
        raise ConfigError(f"D must have exactly two components, found {len(comps)}")
    ball, rect = sorted(comps, key=_aspect)
    added = pair.omega - pair.D
    if added.is_empty():
        return "mixed"
    to_ball = to_rect = other = 0
    for comp in connected_components(pair.omega):
        n_add = (comp & added).count
        if n_add == 0:
            continue
        has_ball = np.any(comp.cells & ball.cells)
        has_rect = np.any(comp.cells & rect.cells)
        if has_ball and not has_rect:
            to_ball += n_add
        elif has_rect and not has_ball:
            to_rect += n_add
        else:
            other += n_add
    if other == 0 and to_rect == 0:
        return "A"
    if other == 0 and to_ball == 0:
        return "B"
    return "mixed"
