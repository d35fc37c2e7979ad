import math

import numpy as np
import pytest

from eigenshape import ConstrainedProblem, ObjectiveSpec, SolverConfig, optimize_constrained
from eigenshape.grid import DomainMask, GridSpec
from eigenshape.scenarios import Ball, Rectangle, SingleCell, rasterize

J01_SQ = 5.783185962946784  # first zero of J0, squared


def block(grid, lo, hi):
    cells = np.zeros(grid.shape, dtype=bool)
    cells[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
    return DomainMask(grid, cells)


def disk(grid, radius, center=None):
    center = center if center is not None else (0.0,) * grid.dim
    return rasterize(Ball(tuple(center), radius), grid)


def random_mask(rng, shape, p, grid=None):
    grid = grid or GridSpec(shape, 1.0 / shape[0])
    return DomainMask(grid, rng.random(shape) < p)


@pytest.fixture(scope="session")
def cfg():
    return SolverConfig()


@pytest.fixture(scope="session")
def fk_grid():
    return GridSpec.centered((161, 161), 1 / 64)


@pytest.fixture(scope="session")
def fk_optimum(fk_grid):
    """Single central cell, m = pi, h = 1/64."""
    D = rasterize(SingleCell(fk_grid.index_of((0.0, 0.0))), fk_grid)
    omega, trace = optimize_constrained(ConstrainedProblem(D, math.pi, ObjectiveSpec()), SolverConfig())
    return D, omega, trace


@pytest.fixture(scope="session")
def strip_grid():
    return GridSpec.from_extent((-1.5, -1.5), (1.5, 1.5), 64)


@pytest.fixture(scope="session")
def strip_D(strip_grid):
    return rasterize(Rectangle((0.0, 0.0), (0.125, 1.0)), strip_grid)
