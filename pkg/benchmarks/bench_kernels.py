#!/usr/bin/env python3
"""Compare the numba and numpy kernels, alone and inside two end-to-end calls.

    python3 benchmarks/bench_kernels.py [--sizes 128 256 512] [--repeat 5]

The end-to-end rows run in subprocesses so that EIGENSHAPE_DISABLE_NUMBA picks
the backend the same way a user would.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from eigenshape import kernels
from eigenshape.diagnostics import shell_offsets

END_TO_END = """
import timeit
from eigenshape import GridSpec, SolverConfig, solve_torsion, eigensolve
from eigenshape.diagnostics import verify_growth_lemma
from eigenshape.scenarios import Ball, rasterize
g = GridSpec.centered(({n}, {n}), 2.2 / {n})
mask = rasterize(Ball((0.0, 0.0), 1.0), g)
cfg = SolverConfig(torsion_method="cg")
solve_torsion(mask, cfg)
u = eigensolve(mask).eigenfunctions[0]
radii = [2 * g.h, 4 * g.h, 8 * g.h]
verify_growth_lemma(u, mask, 0.0, radii)
t_cg = min(timeit.repeat(lambda: solve_torsion(mask, cfg), number=1, repeat={repeat}))
t_gr = min(timeit.repeat(lambda: verify_growth_lemma(u, mask, 0.0, radii), number=1, repeat={repeat}))
print(t_cg, t_gr)
"""


def best(fn, repeat):
    fn()  # compile / warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_rows(n, repeat):
    rng = np.random.default_rng(0)
    v = rng.standard_normal((n, n))
    inside = rng.random((n, n)) < 0.7
    v_in = np.where(inside, v, 0.0)
    shell = shell_offsets(2, 8.0)
    cases = {
        "stencil_sum (r=8 shell)": (
            lambda: kernels.stencil_sum_numpy(v, shell),
            lambda: kernels.stencil_sum_numba(v, shell),
        ),
        "laplacian": (
            lambda: kernels.laplacian_numpy(v_in, inside, 0.01),
            lambda: kernels.laplacian_numba(v_in, inside, 0.01),
        ),
        "face_count": (
            lambda: kernels.face_count_numpy(inside),
            lambda: kernels.face_count_numba(inside),
        ),
    }
    for name, (f_np, f_nb) in cases.items():
        yield name, best(f_np, repeat), best(f_nb, repeat)


def end_to_end(n, repeat, disable):
    env = dict(os.environ)
    if disable:
        env["EIGENSHAPE_DISABLE_NUMBA"] = "1"
    else:
        env.pop("EIGENSHAPE_DISABLE_NUMBA", None)
    code = END_TO_END.format(n=n, repeat=repeat)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return tuple(float(x) for x in out.stdout.split())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    print(f"{'case':<28} {'n':>5} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for n in args.sizes:
        for name, t_np, t_nb in kernel_rows(n, args.repeat):
            print(f"{name:<28} {n:>5} {t_np * 1e3:>11.3f} {t_nb * 1e3:>11.3f} {t_np / t_nb:>8.2f}")
        np_cg, np_gr = end_to_end(n, args.repeat, disable=True)
        nb_cg, nb_gr = end_to_end(n, args.repeat, disable=False)
        print(f"{'torsion, matrix-free CG':<28} {n:>5} {np_cg * 1e3:>11.3f} {nb_cg * 1e3:>11.3f} {np_cg / nb_cg:>8.2f}")
        print(f"{'growth lemma, 3 radii':<28} {n:>5} {np_gr * 1e3:>11.3f} {nb_gr * 1e3:>11.3f} {np_gr / nb_gr:>8.2f}")


if __name__ == "__main__":
    main()
