"""Torsion-based functionals: gamma distance, energy, and the coarea strip check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatchError
from .grid import DomainMask, ScalarField
from .solver import SolverConfig, solve_torsion, torsion_with_residual


@dataclass(frozen=True)
class GammaDistanceReport:
    value: float
    h: float
    residuals: tuple[float, float]


def _torsion_and_residual(mask: DomainMask, cfg: SolverConfig) -> tuple[np.ndarray, float]:
    if mask.is_empty():
        return np.zeros(mask.grid.shape), 0.0
    w, res = torsion_with_residual(mask, cfg)
    return w.values, res


def gamma_distance(a: DomainMask, b: DomainMask, cfg: SolverConfig | None = None) -> GammaDistanceReport:
    """L2 distance between the torsion functions of two masks on one grid."""
    cfg = cfg or SolverConfig()
    if a.grid != b.grid:
        raise GridMismatchError("gamma distance needs masks on one grid")
    wa, ra = _torsion_and_residual(a, cfg)
    wb, rb = _torsion_and_residual(b, cfg)
    value = float(np.sqrt(np.sum((wa - wb) ** 2) * a.grid.cell_volume))
    return GammaDistanceReport(value, a.grid.h, (ra, rb))


def energy(mask: DomainMask, cfg: SolverConfig | None = None) -> float:
    """``-integral of w`` for the torsion function ``w`` of the mask."""
    return -solve_torsion(mask, cfg or SolverConfig()).integral()


def forward_gradient_norm(u: ScalarField) -> np.ndarray:
    """|grad u| from forward differences, zero beyond the last cell."""
    v = u.values
    h = u.grid.h
    sq = np.zeros_like(v)
    for ax in range(v.ndim):
        nxt = np.roll(v, -1, axis=ax)
        sl = [slice(None)] * v.ndim
        sl[ax] = -1
        nxt[tuple(sl)] = 0.0
        sq += ((nxt - v) / h) ** 2
    return np.sqrt(sq)


@dataclass(frozen=True)
class CoareaRow:
    epsilon: float
    value: float

    @property
    def ratio(self) -> float:
        return self.value / self.epsilon


def coarea_check(
    u: ScalarField, mask: DomainMask, Dbar: DomainMask | None, epsilons: Sequence[float]
) -> list[CoareaRow]:
    """Gradient mass of ``u`` on the strips ``{0 < u <= eps}`` outside ``Dbar``."""
    if u.grid != mask.grid or (Dbar is not None and Dbar.grid != mask.grid):
        raise GridMismatchError("coarea_check inputs live on different grids")
    umax = float(u.values.max())
    grad = forward_gradient_norm(u)
    region = mask.cells.copy()
    if Dbar is not None:
        region &= ~Dbar.cells
    vol = u.grid.cell_volume
    rows = []
    for eps in epsilons:
        if not eps > 0:
            raise ValueError(f"epsilon must be positive, got {eps}")
        if eps >= umax:
            raise ValueError(f"epsilon {eps} is not below max(u) = {umax}")
        strip = region & (u.values > 0) & (u.values <= eps)
        rows.append(CoareaRow(float(eps), float(grad[strip].sum() * vol)))
    return rows
