"""Plain-text file formats.

Masks are ASCII PGM (P2, maxval 1) with a one-line sidecar ``<file>.hdr``::

    h=<spacing> origin=<x> <y> [<z>]

Rows run from the top of the domain (largest y) down; a 3-D mask stacks its
z-slices vertically and the sidecar adds ``shape=<nx> <ny> <nz>``. Scalar
fields use the same raster rescaled to 0..255 with ``min=`` and ``max=`` in
the sidecar, plus a lossless CSV of ``i,j[,k],value`` rows for the support.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .grid import DomainMask, GridSpec, ScalarField

FIELD_MAXVAL = 255


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".hdr")


def _raster(values: np.ndarray) -> np.ndarray:
    if values.ndim == 2:
        return values.T[::-1]
    return np.concatenate([values[:, :, z].T[::-1] for z in range(values.shape[2])], axis=0)


def _unraster(raster: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if len(shape) == 2:
        return raster[::-1].T.copy()
    nx, ny, nz = shape
    out = np.empty(shape, dtype=raster.dtype)
    for z in range(nz):
        out[:, :, z] = raster[z * ny:(z + 1) * ny][::-1].T
    return out


def _header(grid: GridSpec, extra: str = "") -> str:
    line = f"h={grid.h!r} origin=" + " ".join(repr(float(o)) for o in grid.origin)
    if grid.dim == 3:
        line += " shape=" + " ".join(str(n) for n in grid.shape)
    return line + extra + "\n"


def _parse_header(text: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    key = None
    for tok in text.split():
        if "=" in tok:
            key, val = tok.split("=", 1)
            out[key] = [val] if val else []
        elif key is not None:
            out[key].append(tok)
    return out


def _write_pgm(path: Path, raster: np.ndarray, maxval: int) -> None:
    height, width = raster.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{width} {height}\n{maxval}\n")
        for row in raster:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def _read_pgm(path: Path) -> tuple[np.ndarray, int]:
    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM (P2) file")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array(tokens[4:4 + width * height], dtype=np.int64)
    if data.size != width * height:
        raise ValueError(f"{path}: truncated raster")
    return data.reshape(height, width), maxval


def _grid_from_header(hdr: dict[str, list[str]], raster_shape: tuple[int, int]) -> GridSpec:
    h = float(hdr["h"][0])
    origin = tuple(float(v) for v in hdr["origin"])
    if "shape" in hdr:
        shape = tuple(int(v) for v in hdr["shape"])
    else:
        shape = (raster_shape[1], raster_shape[0])
    return GridSpec(shape, h, origin)


def write_mask(path: str | Path, mask: DomainMask) -> None:
    path = Path(path)
    _write_pgm(path, _raster(mask.cells.astype(np.int64)), 1)
    sidecar_path(path).write_text(_header(mask.grid))


def read_mask(path: str | Path) -> DomainMask:
    path = Path(path)
    raster, _ = _read_pgm(path)
    hdr = _parse_header(sidecar_path(path).read_text())
    grid = _grid_from_header(hdr, raster.shape)
    return DomainMask(grid, _unraster(raster, grid.shape) > 0)


def write_field(path: str | Path, field: ScalarField, csv_path: str | Path | None = None) -> None:
    """PGM preview (rescaled) plus, when ``csv_path`` is given, the exact values."""
    path = Path(path)
    v = field.values
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo if hi > lo else 1.0
    q = np.rint((v - lo) / span * FIELD_MAXVAL).astype(np.int64)
    _write_pgm(path, _raster(q), FIELD_MAXVAL)
    sidecar_path(path).write_text(_header(field.grid, f" min={float(lo)!r} max={float(hi)!r}"))
    if csv_path is not None:
        write_field_csv(csv_path, field)


def read_field_pgm(path: str | Path) -> ScalarField:
    """Approximate field from the rescaled preview (8-bit quantisation)."""
    path = Path(path)
    raster, maxval = _read_pgm(path)
    hdr = _parse_header(sidecar_path(path).read_text())
    grid = _grid_from_header(hdr, raster.shape)
    lo, hi = float(hdr["min"][0]), float(hdr["max"][0])
    vals = lo + _unraster(raster, grid.shape) / maxval * (hi - lo)
    return ScalarField(grid, vals, DomainMask(grid, np.ones(grid.shape, bool)))


def write_field_csv(path: str | Path, field: ScalarField) -> None:
    dim = field.grid.dim
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "j", "k"][:dim] + ["value"])
        for idx in np.argwhere(field.support.cells):
            wr.writerow([*map(int, idx), repr(float(field.values[tuple(idx)]))])


def read_field_csv(path: str | Path, grid: GridSpec) -> ScalarField:
    vals = np.zeros(grid.shape)
    support = np.zeros(grid.shape, dtype=bool)
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        for row in rd:
            idx = tuple(int(c) for c in row[:-1])
            vals[idx] = float(row[-1])
            support[idx] = True
    return ScalarField(grid, vals, DomainMask(grid, support))


def write_eigen_result(directory: str | Path, result, stem: str = "eigen") -> list[Path]:
    """CSV of ``index,eigenvalue,residual`` plus one field CSV per eigenfunction."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    table = directory / f"{stem}.csv"
    with open(table, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "eigenvalue", "residual"])
        for j, (lam, res) in enumerate(zip(result.eigenvalues, result.residuals), start=1):
            wr.writerow([j, repr(float(lam)), repr(float(res))])
    paths = [table]
    for j, f in enumerate(result.eigenfunctions, start=1):
        p = directory / f"{stem}_u{j}.csv"
        write_field_csv(p, f)
        paths.append(p)
    return paths


def write_trace(path: str | Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "objective", "measure", "flips", "residual"])
        for r in trace.rows:
            wr.writerow([r.iteration, repr(float(r.objective)), repr(float(r.measure)), r.flips, repr(float(r.residual))])
