import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigenshape import (
    DomainMask,
    GridMismatchError,
    GridSpec,
    ScalarField,
    SolverConfig,
    coarea_check,
    energy,
    gamma_distance,
)
from eigenshape.metrics import forward_gradient_norm

from conftest import block, disk

TOL = SolverConfig().tolerance


def test_gamma_identity_and_single_cell():
    h = 0.1
    g = GridSpec((5, 5), h)
    a = block(g, (2, 2), (3, 3))
    assert gamma_distance(a, a).value <= 2 * TOL
    rep = gamma_distance(a, DomainMask.empty(g))
    assert rep.value == pytest.approx(h**3 / 4, rel=1e-12)
    assert rep.h == h and rep.residuals[1] == 0.0


def test_gamma_grid_mismatch():
    with pytest.raises(GridMismatchError):
        gamma_distance(DomainMask.full(GridSpec((3, 3), 1.0)), DomainMask.full(GridSpec((3, 3), 0.5)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gamma_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    g = GridSpec((16, 16), 1 / 16)
    a, b, c = (DomainMask(g, rng.random(g.shape) < p) for p in rng.uniform(0.3, 0.9, 3))
    dab = gamma_distance(a, b).value
    assert dab == pytest.approx(gamma_distance(b, a).value, abs=4 * TOL)
    assert gamma_distance(a, c).value <= dab + gamma_distance(b, c).value + 4 * TOL
    assert (dab <= 2 * TOL) == (a == b)


def test_energy_single_cell():
    h = 0.125
    assert energy(block(GridSpec((3, 3), h), (1, 1), (2, 2))) == pytest.approx(-(h**2) * h**2 / 4)
    assert energy(block(GridSpec((3, 3, 3), h), (1, 1, 1), (2, 2, 2))) == pytest.approx(-(h**3) * h**2 / 6)


def test_energy_disk():
    g = GridSpec.centered((264, 264), 1 / 128)
    assert energy(disk(g, 1.0)) == pytest.approx(-math.pi / 8, rel=0.02)


def test_energy_monotone_under_inclusion():
    rng = np.random.default_rng(9)
    g = GridSpec((20, 20), 0.05)
    for _ in range(10):
        outer = DomainMask(g, rng.random(g.shape) < 0.8)
        inner = outer & DomainMask(g, rng.random(g.shape) < 0.8)
        assert energy(inner) >= energy(outer) - 10 * TOL


def test_forward_gradient_zero_extension():
    g = GridSpec((3, 1), 1.0)
    u = ScalarField(g, np.array([[1.0], [3.0], [4.0]]))
    # along x: 2, 1, then -4 into the zero extension; along y: -value
    expect = np.sqrt(np.array([2.0**2 + 1, 1 + 9, 16 + 16]))
    np.testing.assert_allclose(forward_gradient_norm(u)[:, 0], expect)


def test_coarea_linear_ramp():
    # u = s*y on two identical columns: the x-difference from column 0 into
    # column 1 is zero, and Dbar covers column 1 and the top row, where the
    # zero extension would add a jump
    h, s = 0.1, 2.0
    g = GridSpec((2, 12), h)
    ramp = s * g.axis_centers(1)
    u = ScalarField(g, np.repeat(ramp[None, :], 2, axis=0))
    Dbar = block(g, (1, 0), (2, 12)) | block(g, (0, 11), (2, 12))
    for eps in (0.35, 0.95, 1.5):
        (row,) = coarea_check(u, DomainMask.full(g), Dbar, [eps])
        strip_area = np.count_nonzero(ramp[:11] <= eps) * h * h
        assert row.value == pytest.approx(s * strip_area, rel=1e-12)
        assert row.ratio == pytest.approx(row.value / eps)


def test_coarea_rejects_bad_epsilon():
    g = GridSpec((4, 4), 1.0)
    u = ScalarField(g, np.ones((4, 4)))
    with pytest.raises(ValueError):
        coarea_check(u, DomainMask.full(g), None, [1.0])
    with pytest.raises(ValueError):
        coarea_check(u, DomainMask.full(g), None, [0.0])
