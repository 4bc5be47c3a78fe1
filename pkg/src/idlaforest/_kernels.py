"""Hot walk kernels: numba @njit implementations with a pure-Python twin.

The backend is chosen once at import from the environment variable
IDLAFOREST_BACKEND ("auto", "numba" or "python"; default "auto" = numba when
importable).  Both backends perform identical uint64 arithmetic, so every
result is bit-identical across them; tests and benchmarks/backend_bench.py
compare the two directly.

Kernel contract shared by both backends:

walk_to_exit(k0, k1, src, start, first_step, grid, lo, shape, budget,
             dir_mod, settle, prev)
    Walk from `start`, reading directions from the counter-based stream
    (k0, k1) beginning at counter `first_step`, through the occupancy grid
    (flat uint8, box corner `lo`, box `shape`), until the first unoccupied
    site.  Sites outside the box are unoccupied by construction.  Returns
    (status, next_counter, r_src, r_origin) and writes the settle site into
    `settle` and the previous (occupied) site into `prev` when at least one
    step was taken.  status: 0 ok, 1 step budget exhausted.  r_src is the
    max projected infinity-distance from `src` over all visited sites;
    r_origin the same measured from the origin of the hyperplane.
    `dir_mod` is normally 2*d; smaller values deliberately bias the walk
    (negative controls only).

fill_walk_path(k0, k1, start, first_step, n_steps, dir_mod, out)
    Recompute the visited positions (pure function of the stream) into
    `out` of shape (n_steps + 1, d).

free_walk_cone(k0, k1, start, thresh, strip_level, boundaries, budget)
    Walk with no aggregate until exiting the cone (|z_1| > thresh[level]),
    entering the strip (level <= strip_level), or censoring (level beyond
    the threshold table, or budget).  Returns (outcome, deepest, steps)
    where outcome is 0=exited cone, 1=reached strip, 2=censored and
    `deepest` is the largest index of `boundaries` (descending levels)
    reached while still inside the cone.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError

ENV_VAR = "IDLAFOREST_BACKEND"

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15


def _pick_backend() -> str:
    val = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if val not in ("auto", "numba", "python"):
        raise ConfigError(f"{ENV_VAR} must be auto, numba or python (got {val!r})")
    if val == "python":
        return "python"
    try:
        import numba  # noqa: F401
    except ImportError:
        if val == "numba":
            raise ConfigError("numba backend requested but numba is not importable")
        return "python"
    return "numba"


BACKEND = _pick_backend()


# ---------------------------------------------------------------- python ---

def _mix64(x: int) -> int:
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def _stream(k0: int, k1: int, i: int) -> int:
    return _mix64(k0 ^ _mix64((k1 + i * GOLDEN) & MASK64))


def _py_occupied(grid, lo, shape, pos) -> bool:
    idx = 0
    for a in range(len(pos)):
        c = pos[a] - lo[a]
        if c < 0 or c >= shape[a]:
            return False
        idx = idx * shape[a] + c
    return grid[idx] != 0


def _py_walk_to_exit(k0, k1, src, start, first_step, grid, lo, shape,
                     budget, dir_mod, settle, prev):
    k0 = int(k0)
    k1 = int(k1)
    d = len(start)
    pos = [int(c) for c in start]
    r_src = 0
    r_org = 0
    for a in range(1, d):
        v = abs(pos[a] - int(src[a]))
        if v > r_src:
            r_src = v
        w = abs(pos[a])
        if w > r_org:
            r_org = w
    i = int(first_step)
    taken = 0
    while _py_occupied(grid, lo, shape, pos):
        if taken >= budget:
            for a in range(d):
                settle[a] = pos[a]
            return 1, i, r_src, r_org
        u = _stream(k0, k1, i)
        i += 1
        taken += 1
        dirv = u % dir_mod
        axis = dirv >> 1
        for a in range(d):
            prev[a] = pos[a]
        pos[axis] += 1 if (dirv & 1) == 0 else -1
        for a in range(1, d):
            v = abs(pos[a] - int(src[a]))
            if v > r_src:
                r_src = v
            w = abs(pos[a])
            if w > r_org:
                r_org = w
    for a in range(d):
        settle[a] = pos[a]
    return 0, i, r_src, r_org


def _py_fill_walk_path(k0, k1, start, first_step, n_steps, dir_mod, out):
    k0 = int(k0)
    k1 = int(k1)
    d = len(start)
    pos = [int(c) for c in start]
    for a in range(d):
        out[0, a] = pos[a]
    for s in range(n_steps):
        u = _stream(k0, k1, int(first_step) + s)
        dirv = u % dir_mod
        axis = dirv >> 1
        pos[axis] += 1 if (dirv & 1) == 0 else -1
        for a in range(d):
            out[s + 1, a] = pos[a]


def _py_free_walk_cone(k0, k1, start, thresh, strip_level, boundaries, budget):
    k0 = int(k0)
    k1 = int(k1)
    d = len(start)
    pos = [int(c) for c in start]
    n_thresh = len(thresh)
    n_bnd = len(boundaries)
    deepest = 0
    steps = 0
    while True:
        level = 0
        for a in range(1, d):
            w = abs(pos[a])
            if w > level:
                level = w
        if level >= n_thresh:
            return 2, deepest, steps
        if abs(pos[0]) > thresh[level]:
            return 0, deepest, steps
        while deepest + 1 < n_bnd and level <= boundaries[deepest + 1]:
            deepest += 1
        if level <= strip_level:
            return 1, deepest, steps
        if steps >= budget:
            return 2, deepest, steps
        u = _stream(k0, k1, steps)
        steps += 1
        dirv = u % (2 * d)
        axis = dirv >> 1
        pos[axis] += 1 if (dirv & 1) == 0 else -1


PY_KERNELS = {
    "walk_to_exit": _py_walk_to_exit,
    "fill_walk_path": _py_fill_walk_path,
    "free_walk_cone": _py_free_walk_cone,
}


# ----------------------------------------------------------------- numba ---

_NUMBA_CACHE = None


def numba_kernels():
    """Compile (once) and return the numba kernel set."""
    global _NUMBA_CACHE
    if _NUMBA_CACHE is not None:
        return _NUMBA_CACHE

    from numba import njit

    U = np.uint64
    G = U(GOLDEN)

    @njit(cache=True, nogil=True, inline="always")
    def nb_mix64(x):
        x ^= x >> U(30)
        x *= U(0xBF58476D1CE4E5B9)
        x ^= x >> U(27)
        x *= U(0x94D049BB133111EB)
        x ^= x >> U(31)
        return x

    @njit(cache=True, nogil=True, inline="always")
    def nb_stream(k0, k1, i):
        return nb_mix64(k0 ^ nb_mix64(k1 + i * G))

    @njit(cache=True, nogil=True, inline="always")
    def nb_occupied(grid, lo, shape, pos):
        idx = np.int64(0)
        for a in range(pos.shape[0]):
            c = pos[a] - lo[a]
            if c < 0 or c >= shape[a]:
                return False
            idx = idx * shape[a] + c
        return grid[idx] != 0

    @njit(cache=True, nogil=True)
    def nb_walk_to_exit(k0, k1, src, start, first_step, grid, lo, shape,
                        budget, dir_mod, settle, prev):
        d = start.shape[0]
        pos = np.empty(d, np.int64)
        for a in range(d):
            pos[a] = start[a]
        r_src = np.int64(0)
        r_org = np.int64(0)
        for a in range(1, d):
            v = pos[a] - src[a]
            if v < 0:
                v = -v
            if v > r_src:
                r_src = v
            w = pos[a]
            if w < 0:
                w = -w
            if w > r_org:
                r_org = w
        i = U(first_step)
        m = U(dir_mod)
        taken = np.int64(0)
        while nb_occupied(grid, lo, shape, pos):
            if taken >= budget:
                for a in range(d):
                    settle[a] = pos[a]
                return 1, np.int64(i), r_src, r_org
            u = nb_stream(k0, k1, i)
            i += U(1)
            taken += 1
            dirv = u % m
            axis = np.int64(dirv >> U(1))
            for a in range(d):
                prev[a] = pos[a]
            if dirv & U(1) == U(0):
                pos[axis] += 1
            else:
                pos[axis] -= 1
            for a in range(1, d):
                v = pos[a] - src[a]
                if v < 0:
                    v = -v
                if v > r_src:
                    r_src = v
                w = pos[a]
                if w < 0:
                    w = -w
                if w > r_org:
                    r_org = w
        for a in range(d):
            settle[a] = pos[a]
        return 0, np.int64(i), r_src, r_org

    @njit(cache=True, nogil=True)
    def nb_fill_walk_path(k0, k1, start, first_step, n_steps, dir_mod, out):
        d = start.shape[0]
        pos = np.empty(d, np.int64)
        for a in range(d):
            pos[a] = start[a]
            out[0, a] = pos[a]
        m = U(dir_mod)
        for s in range(n_steps):
            u = nb_stream(k0, k1, U(first_step) + U(s))
            dirv = u % m
            axis = np.int64(dirv >> U(1))
            if dirv & U(1) == U(0):
                pos[axis] += 1
            else:
                pos[axis] -= 1
            for a in range(d):
                out[s + 1, a] = pos[a]

    @njit(cache=True, nogil=True)
    def nb_free_walk_cone(k0, k1, start, thresh, strip_level, boundaries, budget):
        d = start.shape[0]
        pos = np.empty(d, np.int64)
        for a in range(d):
            pos[a] = start[a]
        n_thresh = thresh.shape[0]
        n_bnd = boundaries.shape[0]
        deepest = np.int64(0)
        steps = np.int64(0)
        m = U(2 * d)
        while True:
            level = np.int64(0)
            for a in range(1, d):
                w = pos[a]
                if w < 0:
                    w = -w
                if w > level:
                    level = w
            if level >= n_thresh:
                return 2, deepest, steps
            z1 = pos[0]
            if z1 < 0:
                z1 = -z1
            if z1 > thresh[level]:
                return 0, deepest, steps
            while deepest + 1 < n_bnd and level <= boundaries[deepest + 1]:
                deepest += 1
            if level <= strip_level:
                return 1, deepest, steps
            if steps >= budget:
                return 2, deepest, steps
            u = nb_stream(k0, k1, U(steps))
            steps += 1
            dirv = u % m
            axis = np.int64(dirv >> U(1))
            if dirv & U(1) == U(0):
                pos[axis] += 1
            else:
                pos[axis] -= 1

    def walk_to_exit(k0, k1, src, start, first_step, grid, lo, shape,
                     budget, dir_mod, settle, prev):
        return nb_walk_to_exit(
            np.uint64(k0), np.uint64(k1), src, start, np.uint64(first_step),
            grid, lo, shape, np.int64(budget), np.int64(dir_mod), settle, prev)

    def fill_walk_path(k0, k1, start, first_step, n_steps, dir_mod, out):
        nb_fill_walk_path(np.uint64(k0), np.uint64(k1), start,
                          np.uint64(first_step), np.int64(n_steps),
                          np.int64(dir_mod), out)

    def free_walk_cone(k0, k1, start, thresh, strip_level, boundaries, budget):
        out = nb_free_walk_cone(
            np.uint64(k0), np.uint64(k1), start, thresh,
            np.int64(strip_level), boundaries, np.int64(budget))
        return int(out[0]), int(out[1]), int(out[2])

    _NUMBA_CACHE = {
        "walk_to_exit": walk_to_exit,
        "fill_walk_path": fill_walk_path,
        "free_walk_cone": free_walk_cone,
    }
    return _NUMBA_CACHE


if BACKEND == "numba":
    _ACTIVE = numba_kernels()
else:
    _ACTIVE = PY_KERNELS

walk_to_exit = _ACTIVE["walk_to_exit"]
fill_walk_path = _ACTIVE["fill_walk_path"]
free_walk_cone = _ACTIVE["free_walk_cone"]
