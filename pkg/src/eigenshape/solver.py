"""Discrete Dirichlet Laplacian on a mask: stencil, torsion and low eigenpairs.

The operator is the cell-centred (2*dim+1)-point Laplacian with every cell
outside the mask held at zero. On the mask cells it is a symmetric M-matrix,
so the torsion solve obeys an exact discrete maximum principle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import ConvergenceError, EmptyMaskError, GridMismatchError
from .grid import DomainMask, ScalarField

logger = logging.getLogger(__name__)

# Below this many unknowns eigenpairs come from a dense symmetric solve
# (ARPACK needs k < n - 1 and is unreliable on tiny problems).
DENSE_EIG_LIMIT = 64


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int | None = None  # default: 10 * sqrt(cell count)
    seed: int = 0
    torsion_method: str = "direct"  # "direct" (sparse LU) or "cg" (matrix-free)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.torsion_method not in ("direct", "cg"):
            raise ValueError(f"unknown torsion method {self.torsion_method!r}")

    def iteration_budget(self, n: int) -> int:
        if self.max_iterations is not None:
            return int(self.max_iterations)
        return max(1, int(np.ceil(10 * np.sqrt(max(n, 1)))))


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Leading ``k`` Dirichlet eigenpairs.

    Eigenfunctions are normalised so that ``sum(u**2) * h**dim == 1``.
    Residuals are relative: ``||A u - lam u|| / (lam ||u||)``.
    """

    eigenvalues: np.ndarray
    eigenfunctions: tuple[ScalarField, ...]
    residuals: np.ndarray
    mask: DomainMask = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])


def cell_index(mask: DomainMask) -> np.ndarray:
    """Grid array holding the unknown number of each mask cell, -1 elsewhere."""
    idx = np.full(mask.grid.shape, -1, dtype=np.int64)
    idx[mask.cells] = np.arange(mask.count)
    return idx


def assemble_laplacian(mask: DomainMask) -> sp.csr_matrix:
    """Sparse matrix of the Dirichlet stencil restricted to the mask cells (C order)."""
    g = mask.grid
    n = mask.count
    idx = cell_index(mask)
    padded = np.pad(idx, 1, constant_values=-1)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 2.0 * g.dim)]
    for o in kernels.face_offsets(g.dim):
        sl = tuple(slice(1 + int(c), 1 + int(c) + s) for c, s in zip(o, g.shape))
        nb = padded[sl][mask.cells]
        keep = nb >= 0
        rows.append(np.arange(n)[keep])
        cols.append(nb[keep])
        vals.append(np.full(int(keep.sum()), -1.0))
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    return A / (g.h * g.h)


def _scatter(mask: DomainMask, vec: np.ndarray) -> np.ndarray:
    out = np.zeros(mask.grid.shape)
    out[mask.cells] = vec
    return out


def apply_laplacian(f: ScalarField, mask: DomainMask) -> ScalarField:
    if f.grid != mask.grid:
        raise GridMismatchError("field and mask live on different grids")
    if not f.support.issubset(mask):
        raise ValueError("field support must lie inside the mask")
    out = kernels.laplacian(f.values, mask.cells, mask.grid.h)
    return ScalarField(mask.grid, out, mask)


def solve_torsion(mask: DomainMask, cfg: SolverConfig | None = None) -> ScalarField:
    """Solve ``-Δw = 1`` on the mask with ``w = 0`` outside; returns ``w``."""
    return torsion_with_residual(mask, cfg)[0]


def torsion_with_residual(mask: DomainMask, cfg: SolverConfig | None = None) -> tuple[ScalarField, float]:
    cfg = cfg or SolverConfig()
    if mask.is_empty():
        raise EmptyMaskError("torsion of an empty mask")
    A = assemble_laplacian(mask)
    n = A.shape[0]
    rhs = np.ones(n)
    if cfg.torsion_method == "direct":
        w = spla.splu(A.tocsc()).solve(rhs)
    else:
        w = _torsion_cg(mask, rhs, cfg)
    res = float(np.linalg.norm(A @ w - rhs) / np.linalg.norm(rhs))
    if res > cfg.tolerance:
        raise ConvergenceError(f"torsion residual {res:.3e} above tolerance {cfg.tolerance:.1e}", [res])
    return ScalarField(mask.grid, _scatter(mask, w), mask), res


def _torsion_cg(mask: DomainMask, rhs: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    inside = mask.cells
    h = mask.grid.h

    def matvec(x):
        full = np.zeros(mask.grid.shape)
        full[inside] = np.ravel(x)
        return kernels.laplacian(full, inside, h)[inside]

    n = rhs.size
    op = spla.LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    budget = cfg.iteration_budget(n)
    # the solver's own stopping test is on the same relative residual
    w, info = spla.cg(op, rhs, rtol=0.5 * cfg.tolerance, atol=0.0, maxiter=budget)
    if info > 0:
        res = float(np.linalg.norm(matvec(w) - rhs) / np.linalg.norm(rhs))
        raise ConvergenceError(f"CG stopped after {budget} iterations at residual {res:.3e}", [res])
    return w


def eigensolve(mask: DomainMask, k: int = 1, cfg: SolverConfig | None = None) -> EigenResult:
    """The ``k`` smallest eigenpairs of the Dirichlet Laplacian on ``mask``."""
    cfg = cfg or SolverConfig()
    n = mask.count
    if n == 0:
        raise EmptyMaskError("eigensolve on an empty mask")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of cells ({n})")
    A = assemble_laplacian(mask)
    if n <= DENSE_EIG_LIMIT or k >= n - 1:
        lam, vec = scipy.linalg.eigh(A.toarray(), subset_by_index=(0, k - 1))
    else:
        rng = np.random.default_rng(cfg.seed)
        v0 = rng.standard_normal(n)
        try:
            lam, vec = spla.eigsh(
                A.tocsc(), k=k, sigma=0.0, which="LM", v0=v0, tol=0.0,
                maxiter=max(cfg.iteration_budget(n), 300),
            )
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"ARPACK did not converge: {exc}") from exc
    order = np.argsort(lam, kind="stable")
    lam = np.asarray(lam[order], dtype=np.float64)
    vec = np.asarray(vec[:, order], dtype=np.float64)
    vec /= np.linalg.norm(vec, axis=0)
    residuals = np.linalg.norm(A @ vec - vec * lam, axis=0) / np.abs(lam)
    if np.any(residuals > cfg.tolerance):
        raise ConvergenceError(
            f"eigen residuals {residuals.max():.3e} above tolerance {cfg.tolerance:.1e}", residuals
        )
    scale = mask.grid.cell_volume ** -0.5
    funcs = []
    for j in range(k):
        v = vec[:, j]
        s = v.sum()
        if abs(s) < 1e-12 * np.abs(v).sum():
            s = v[np.argmax(np.abs(v))]
        if s < 0:
            v = -v
        funcs.append(ScalarField(mask.grid, _scatter(mask, v * scale), mask))
    return EigenResult(lam, tuple(funcs), residuals, mask)
