#!/usr/bin/env python3
"""Benchmark the numba walk kernels against the pure-Python fallback.

Usage:
    python benchmarks/backend_bench.py [--particles N] [--window M]

Runs the same workloads through both kernel sets in one process (the env
flag IDLAFOREST_BACKEND switches which set the package uses by default; here
both are exercised explicitly) and checks the outputs agree bit for bit.
"""

import argparse
import time

import numpy as np

from idlaforest._kernels import PY_KERNELS, numba_kernels
from idlaforest.engine import OccupancyGrid
from idlaforest.lattice import sources_in_ball
from idlaforest.streams import WALK, derive_key


def grown_grid(d: int, M: int, half_height: int) -> OccupancyGrid:
    """Solid slab |x_1| <= half_height over the window: the typical shape
    walks spend their time in."""
    grid = OccupancyGrid.for_sources(d, sources_in_ball((0,) * d, M),
                                     margin=half_height + 4)
    for z in sources_in_ball((0,) * d, M):
        for x in range(-half_height, half_height + 1):
            grid.add((x,) + z[1:])
    return grid


def run_walks(kernels, grid, d, particles, budget=10**7):
    src = np.zeros(d, dtype=np.int64)
    settle = np.empty(d, dtype=np.int64)
    prev = np.empty(d, dtype=np.int64)
    walk = kernels["walk_to_exit"]
    digest = 0
    steps = 0
    t0 = time.perf_counter()
    for j in range(1, particles + 1):
        key = derive_key(1, WALK, (0,) * d, j)
        _status, n_steps, r_src, _r_org = walk(
            key.k0, key.k1, src, src, 0, grid.grid, grid.lo, grid.shape,
            budget, 2 * d, settle, prev)
        digest ^= (int(n_steps) * 0x9E3779B97F4A7C15
                   + int(r_src) + int(settle[0])) & 0xFFFFFFFFFFFFFFFF
        steps += int(n_steps)
    return time.perf_counter() - t0, steps, digest


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--particles", type=int, default=2000)
    parser.add_argument("--window", type=int, default=40)
    parser.add_argument("--fill", type=int, default=12,
                        help="vertical occupancy per column")
    args = parser.parse_args()

    grid = grown_grid(2, args.window, args.fill)
    nb = numba_kernels()
    # trigger compilation outside the timed region
    run_walks(nb, grid, 2, 1)

    nb_time, nb_steps, nb_digest = run_walks(nb, grid, 2, args.particles)
    py_time, py_steps, py_digest = run_walks(PY_KERNELS, grid, 2,
                                             args.particles)

    assert nb_digest == py_digest and nb_steps == py_steps, \
        "backends disagree"
    print(f"workload: {args.particles} walks, {nb_steps} total steps, "
          f"window {args.window}")
    print(f"numba : {nb_time:8.3f}s  ({nb_steps / nb_time / 1e6:8.2f} M steps/s)")
    print(f"python: {py_time:8.3f}s  ({py_steps / py_time / 1e6:8.2f} M steps/s)")
    print(f"speedup: {py_time / nb_time:.1f}x  (outputs bit-identical)")


if __name__ == "__main__":
    main()
