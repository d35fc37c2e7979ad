import os
import subprocess
import sys

import numpy as np
import pytest

from eigenshape import kernels

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


@pytest.mark.parametrize("shape", [(7, 5), (16, 16), (4, 5, 6)])
def test_stencil_sum_backends_agree(shape):
    rng = np.random.default_rng(1)
    v = rng.standard_normal(shape)
    offs = np.array([o for o in np.ndindex(*([5] * len(shape)))]) - 2
    a = kernels.stencil_sum_numpy(v, offs)
    b = kernels.stencil_sum_numba(v, offs)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_stencil_sum_zero_extension():
    v = np.ones((3, 3))
    out = kernels.stencil_sum_numpy(v, kernels.face_offsets(2))
    assert out[1, 1] == 4 and out[0, 0] == 2 and out[0, 1] == 3


@pytest.mark.parametrize("shape", [(9, 11), (5, 6, 7)])
def test_laplacian_backends_agree(shape):
    rng = np.random.default_rng(2)
    inside = rng.random(shape) < 0.6
    v = np.where(inside, rng.standard_normal(shape), 0.0)
    a = kernels.laplacian_numpy(v, inside, 0.1)
    b = kernels.laplacian_numba(v, inside, 0.1)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-10)
    assert np.all(a[~inside] == 0)


@pytest.mark.parametrize("shape", [(12, 8), (4, 4, 4)])
def test_face_count_backends_agree(shape):
    rng = np.random.default_rng(3)
    m = rng.random(shape) < 0.5
    skip = rng.random(shape) < 0.2
    assert kernels.face_count_numpy(m) == kernels.face_count_numba(m)
    assert kernels.face_count_numpy(m, skip) == kernels.face_count_numba(m, skip)


def test_env_flag_selects_numpy():
    code = "from eigenshape import kernels; print(kernels.BACKEND, kernels.stencil_sum is kernels.stencil_sum_numpy)"
    env = dict(os.environ, EIGENSHAPE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
    env.pop("EIGENSHAPE_DISABLE_NUMBA")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numba", "False"]
