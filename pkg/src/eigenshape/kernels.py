"""Hot per-cell loops, with a numba path and a pure-numpy fallback.

The numpy versions shift a zero-padded copy of the array once per stencil
offset. The compiled versions walk the grid once, clip each offset against
the array bounds instead of padding, and keep the output row in cache while
all offsets are summed into it; there is one loop nest for dim 2 and one for
dim 3.

Set ``EIGENSHAPE_DISABLE_NUMBA=1`` to force the numpy implementations (they
are always importable as ``*_numpy``; the compiled ones as ``*_numba`` when
numba is installed).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_DISABLE = os.environ.get("EIGENSHAPE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
USE_NUMBA = HAVE_NUMBA and not _DISABLE


def face_offsets(dim: int) -> np.ndarray:
    offs = []
    for ax in range(dim):
        for s in (-1, 1):
            o = [0] * dim
            o[ax] = s
            offs.append(o)
    return np.array(offs, dtype=np.int64)


# ---------------------------------------------------------------- stencil sums
def stencil_sum_numpy(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """out[x] = sum_o values[x + o], zero outside the array."""
    values = np.asarray(values, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1, values.ndim)
    pad = int(np.abs(offsets).max()) if offsets.size else 0
    padded = np.pad(values, pad, mode="constant")
    out = np.zeros_like(values)
    for o in offsets:
        sl = tuple(slice(pad + int(c), pad + int(c) + n) for c, n in zip(o, values.shape))
        out += padded[sl]
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _stencil_sum_2d(v, offs, out):
        nx, ny = v.shape
        for i in range(nx):
            for k in range(offs.shape[0]):
                ii = i + offs[k, 0]
                if ii < 0 or ii >= nx:
                    continue
                dj = offs[k, 1]
                for j in range(max(0, -dj), min(ny, ny - dj)):
                    out[i, j] += v[ii, j + dj]

    @njit(cache=True)
    def _stencil_sum_3d(v, offs, out):
        nx, ny, nz = v.shape
        for i in range(nx):
            for j in range(ny):
                for k in range(offs.shape[0]):
                    ii = i + offs[k, 0]
                    jj = j + offs[k, 1]
                    if ii < 0 or ii >= nx or jj < 0 or jj >= ny:
                        continue
                    dl = offs[k, 2]
                    for l in range(max(0, -dl), min(nz, nz - dl)):
                        out[i, j, l] += v[ii, jj, l + dl]

    @njit(cache=True)
    def _laplacian_2d(v, inside, inv_h2, out):
        nx, ny = v.shape
        for i in range(nx):
            for j in range(ny):
                if not inside[i, j]:
                    out[i, j] = 0.0
                    continue
                acc = 4.0 * v[i, j]
                if i > 0 and inside[i - 1, j]:
                    acc -= v[i - 1, j]
                if i < nx - 1 and inside[i + 1, j]:
                    acc -= v[i + 1, j]
                if j > 0 and inside[i, j - 1]:
                    acc -= v[i, j - 1]
                if j < ny - 1 and inside[i, j + 1]:
                    acc -= v[i, j + 1]
                out[i, j] = acc * inv_h2

    @njit(cache=True)
    def _laplacian_3d(v, inside, inv_h2, out):
        nx, ny, nz = v.shape
        for i in range(nx):
            for j in range(ny):
                for l in range(nz):
                    if not inside[i, j, l]:
                        out[i, j, l] = 0.0
                        continue
                    acc = 6.0 * v[i, j, l]
                    if i > 0 and inside[i - 1, j, l]:
                        acc -= v[i - 1, j, l]
                    if i < nx - 1 and inside[i + 1, j, l]:
                        acc -= v[i + 1, j, l]
                    if j > 0 and inside[i, j - 1, l]:
                        acc -= v[i, j - 1, l]
                    if j < ny - 1 and inside[i, j + 1, l]:
                        acc -= v[i, j + 1, l]
                    if l > 0 and inside[i, j, l - 1]:
                        acc -= v[i, j, l - 1]
                    if l < nz - 1 and inside[i, j, l + 1]:
                        acc -= v[i, j, l + 1]
                    out[i, j, l] = acc * inv_h2

    @njit(cache=True)
    def _face_count_2d(mask, skip):
        nx, ny = mask.shape
        total = 0
        for i in range(nx):
            for j in range(ny):
                if not mask[i, j] or skip[i, j]:
                    continue
                total += (i == 0 or not mask[i - 1, j]) + (i == nx - 1 or not mask[i + 1, j])
                total += (j == 0 or not mask[i, j - 1]) + (j == ny - 1 or not mask[i, j + 1])
        return total

    @njit(cache=True)
    def _face_count_3d(mask, skip):
        nx, ny, nz = mask.shape
        total = 0
        for i in range(nx):
            for j in range(ny):
                for l in range(nz):
                    if not mask[i, j, l] or skip[i, j, l]:
                        continue
                    total += (i == 0 or not mask[i - 1, j, l]) + (i == nx - 1 or not mask[i + 1, j, l])
                    total += (j == 0 or not mask[i, j - 1, l]) + (j == ny - 1 or not mask[i, j + 1, l])
                    total += (l == 0 or not mask[i, j, l - 1]) + (l == nz - 1 or not mask[i, j, l + 1])
        return total


def stencil_sum_numba(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    offsets = np.ascontiguousarray(np.asarray(offsets, dtype=np.int64).reshape(-1, values.ndim))
    out = np.zeros_like(values)
    (_stencil_sum_2d if values.ndim == 2 else _stencil_sum_3d)(values, offsets, out)
    return out


# ------------------------------------------------------------ Dirichlet stencil
def laplacian_numpy(values: np.ndarray, inside: np.ndarray, h: float) -> np.ndarray:
    """(2*dim+1)-point Laplacian, exterior cells treated as zero."""
    u = np.where(inside, values, 0.0)
    nb = stencil_sum_numpy(u, face_offsets(u.ndim))
    out = (2 * u.ndim * u - nb) / (h * h)
    out[~inside] = 0.0
    return out


def laplacian_numba(values: np.ndarray, inside: np.ndarray, h: float) -> np.ndarray:
    v = np.ascontiguousarray(values, dtype=np.float64)
    ins = np.ascontiguousarray(inside, dtype=np.bool_)
    out = np.empty_like(v)
    (_laplacian_2d if v.ndim == 2 else _laplacian_3d)(v, ins, 1.0 / (h * h), out)
    return out


# ------------------------------------------------------------------ face count
def face_count_numpy(mask: np.ndarray, skip: np.ndarray | None = None) -> int:
    """Faces between a true cell (not in ``skip``) and a false cell."""
    mask = np.asarray(mask, dtype=bool)
    src = mask if skip is None else mask & ~np.asarray(skip, dtype=bool)
    padded = np.pad(mask, 1, mode="constant")
    total = 0
    for o in face_offsets(mask.ndim):
        sl = tuple(slice(1 + int(c), 1 + int(c) + n) for c, n in zip(o, mask.shape))
        total += int(np.count_nonzero(src & ~padded[sl]))
    return total


def face_count_numba(mask: np.ndarray, skip: np.ndarray | None = None) -> int:
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    skip = np.zeros_like(mask) if skip is None else np.ascontiguousarray(skip, dtype=np.bool_)
    return int((_face_count_2d if mask.ndim == 2 else _face_count_3d)(mask, skip))


if USE_NUMBA:
    stencil_sum = stencil_sum_numba
    laplacian = laplacian_numba
else:
    stencil_sum = stencil_sum_numpy
    laplacian = laplacian_numpy
# the vectorised count beats the compiled loop at every size we measured
face_count = face_count_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
