"""Non-degeneracy checks on a computed eigenfunction.

Both checks compare a discrete spherical mean of ``u`` (the mean over the
cells whose centre lies at distance ``(r - h, r]`` from ``x``) with a linear
bound ``C·r`` and test what ``u`` does on a ball around ``x``. The sums over
annuli and balls are stencil sums, done for every cell at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import kernels
from .grid import DomainMask, ScalarField


def shell_offsets(dim: int, r_cells: float, width_cells: float = 1.0) -> np.ndarray:
    """Integer offsets with ``r - width < |o| <= r`` (in cell units)."""
    R = int(np.floor(r_cells))
    ax = np.arange(-R, R + 1)
    pts = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    d = np.sqrt((pts**2).sum(axis=1))
    return pts[(d > r_cells - width_cells) & (d <= r_cells)]


def ball_offsets(dim: int, r_cells: float) -> np.ndarray:
    """Integer offsets with ``|o| < r`` (the open ball, always holding the centre)."""
    R = int(np.ceil(r_cells))
    ax = np.arange(-R, R + 1)
    pts = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    d = np.sqrt((pts**2).sum(axis=1))
    keep = d < r_cells
    keep[np.all(pts == 0, axis=1)] = True
    return pts[keep]


def spherical_mean(values: np.ndarray, r_cells: float) -> np.ndarray:
    offs = shell_offsets(values.ndim, r_cells)
    return kernels.stencil_sum(values, offs) / len(offs)


def ball_count(indicator: np.ndarray, r_cells: float) -> tuple[np.ndarray, int]:
    offs = ball_offsets(indicator.ndim, r_cells)
    return kernels.stencil_sum(indicator.astype(np.float64), offs), len(offs)


@dataclass(frozen=True)
class LemmaReport:
    """Violations as parallel arrays: cell index, radius, mean, bound."""

    index: np.ndarray
    radius: np.ndarray
    average: np.ndarray
    bound: np.ndarray
    checked: int

    @property
    def count(self) -> int:
        return int(self.radius.size)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            dim = self.index.shape[1] if self.index.ndim == 2 else 2
            wr.writerow([f"x{a}" for a in range(dim)] + ["r", "average", "bound"])
            for idx, r, a, b in zip(self.index, self.radius, self.average, self.bound):
                wr.writerow([*map(int, idx), repr(float(r)), repr(float(a)), repr(float(b))])


def _collect(hits: list, dim: int, checked: int) -> LemmaReport:
    if not hits:
        return LemmaReport(np.zeros((0, dim), int), np.zeros(0), np.zeros(0), np.zeros(0), checked)
    idx = np.concatenate([h[0] for h in hits])
    return LemmaReport(
        idx,
        np.concatenate([h[1] for h in hits]),
        np.concatenate([h[2] for h in hits]),
        np.concatenate([h[3] for h in hits]),
        checked,
    )


@dataclass(frozen=True)
class GrowthReport:
    """``violations``: mean ≥ C·r yet some cell of ``B_r(x)`` inside the mask has ``u <= 0``.
    ``escapes``: mean ≥ C·r yet ``B_r(x)`` leaves ``{u > 0}`` at all (the full
    implication, which needs ``C`` above the empirical growth constant).
    """

    violations: LemmaReport
    escapes: LemmaReport


def verify_growth_lemma(u: ScalarField, mask: DomainMask, C: float, radii: Sequence[float]) -> GrowthReport:
    h = u.grid.h
    dim = u.grid.dim
    vals = u.values
    pos = vals > 0
    dead = mask.cells & ~pos  # mask cells where u has lost positivity
    hits_v, hits_e = [], []
    checked = 0
    for r in radii:
        if r < 2 * h - 1e-12:
            raise ValueError(f"radius {r} below 2h")
        rc = r / h
        avg = spherical_mean(vals, rc)
        premise = avg >= C * r
        n_dead, _ = ball_count(dead, rc)
        n_pos, n_ball = ball_count(pos, rc)
        checked += vals.size
        for hits, bad in ((hits_v, premise & (n_dead > 0.5)), (hits_e, premise & (n_pos < n_ball - 0.5))):
            if np.any(bad):
                idx = np.argwhere(bad)
                hits.append((idx, np.full(len(idx), r), avg[bad], np.full(len(idx), C * r)))
    return GrowthReport(_collect(hits_v, dim, checked), _collect(hits_e, dim, checked))


def empirical_growth_constant(
    u: ScalarField, mask: DomainMask, radii: Sequence[float], constants: Sequence[float]
) -> float | None:
    """Smallest constant in ``constants`` for which the full implication never fails.

    Raising ``C`` only weakens the premise, so the escape-free constants form
    an upper ray and the sweep returns its left end on the supplied grid.
    """
    for C in sorted(constants):
        if verify_growth_lemma(u, mask, C, radii).escapes.count == 0:
            return float(C)
    return None


def dyadic_radii(r0: float, h: float) -> list[float]:
    out, r = [], r0 / 2
    while r >= 2 * h - 1e-12:
        out.append(r)
        r /= 2
    return out


def verify_vanishing_lemma(
    u: ScalarField, mask: DomainMask, D: DomainMask, C0: float, r0: float
) -> LemmaReport:
    """Cells farther than ``r0`` from ``D`` where mean ≤ ``C0·r`` but ``u > 0`` on ``B_{r/2}``."""
    h = u.grid.h
    if r0 <= 2 * h:
        raise ValueError("r0 must exceed 2h")
    dim = u.grid.dim
    vals = u.values
    far = ndimage.distance_transform_edt(~D.cells, sampling=h) > r0
    pos = vals > 0
    hits = []
    checked = 0
    for r in dyadic_radii(r0, h):
        avg = spherical_mean(vals, r / h)
        n_pos, _ = ball_count(pos, r / (2 * h))
        bad = far & (avg <= C0 * r) & (n_pos > 0.5)
        checked += int(far.sum())
        if np.any(bad):
            idx = np.argwhere(bad)
            hits.append((idx, np.full(len(idx), r), avg[bad], np.full(len(idx), C0 * r)))
    return _collect(hits, dim, checked)


def sweep_vanishing_constants(
    u: ScalarField, mask: DomainMask, D: DomainMask, r0_values: Sequence[float], c0_values: Sequence[float]
) -> list[tuple[float, float | None]]:
    """For each ``r0``, the largest ``C0`` in ``c0_values`` with no violation."""
    out = []
    for r0 in r0_values:
        best = None
        for c0 in sorted(c0_values, reverse=True):
            if verify_vanishing_lemma(u, mask, D, c0, r0).count == 0:
                best = float(c0)
                break
        out.append((float(r0), best))
    return out
