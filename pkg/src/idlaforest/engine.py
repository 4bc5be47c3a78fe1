"""Aggregate and forest construction from emission schedules.

Builds the time-ordered multi-source aggregate and its forest, the
level-ordered variant that shares walk streams with it, and the classical
single-source aggregate.  One replay is strictly sequential (event order is
semantic); independent replicates share no mutable state.

Hot walks run through the kernels in ._kernels; `advance_particle` is the
plain-Python reference used by tests and scripted fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import StepBudgetExceeded, UnsupportedDimension
from .lattice import MAX_DIM, MIN_DIM, Site, Source, inf_norm, sources_in_ball
from .streams import (CLOCK, WALK, StreamKey, WalkSteps, clock_tops,
                      derive_key, unit_steps)

DEFAULT_STEP_BUDGET = 10**9

MODE_TIME_ORDERED = "time-ordered"
MODE_LEVEL_ORDERED = "level-ordered"
MODE_SINGLE_SOURCE = "single-source"


@dataclass(frozen=True)
class Emission:
    """One emitted particle: source, clock-top time, index within its clock."""

    source: Source
    time: float
    particle_index: int


@dataclass(frozen=True)
class ParticleTrace:
    """Outcome of one particle's walk.

    `path` is only populated when the build records paths; the summary
    fields (settle site, entry edge, step count, projected radius) are
    always present.  `radius` is the smallest hyperplane-ball radius around
    the source containing the projection of every visited site;
    `origin_reach` measures the same from the origin and feeds the
    finite-window proxy audit.
    """

    emission: Optional[Emission]
    path: Optional[tuple]
    settle_site: Site
    entry_edge: Optional[tuple]
    steps_taken: int
    radius: int
    origin_reach: int


class Aggregate:
    """Occupied-site set with insertion metadata."""

    def __init__(self, d: int, sites, creators):
        self.d = d
        self.sites = list(sites)
        self.creators = list(creators)
        self._index = {s: i for i, s in enumerate(self.sites)}

    @property
    def occupied(self):
        return self._index.keys()

    @property
    def order(self):
        return list(zip(self.sites, self.creators))

    def creator_of(self, site: Site) -> Emission:
        return self.creators[self._index[site]]

    def index_of(self, site: Site) -> int:
        return self._index[site]

    def __contains__(self, site) -> bool:
        return site in self._index

    def __len__(self) -> int:
        return len(self.sites)


class Forest:
    """Parent-edge map over an aggregate's sites, rooted in the hyperplane."""

    def __init__(self, roots, parent_edge):
        self.roots = frozenset(roots)
        self.parent_edge = dict(parent_edge)

    @property
    def vertices(self):
        return self.roots | set(self.parent_edge.keys())

    def edges(self):
        return set(self.parent_edge.values())

    def __eq__(self, other):
        return (isinstance(other, Forest)
                and self.roots == other.roots
                and self.parent_edge == other.parent_edge)


class OccupancyGrid:
    """Dense uint8 occupancy over a growable box around the hyperplane.

    Aggregates are strip-shaped, so a dense block keeps the hot membership
    reads O(1); the box grows geometrically when an added site lands on or
    beyond its edge.
    """

    def __init__(self, d: int, lo, hi):
        self.d = d
        self.lo = np.array(lo, dtype=np.int64)
        hi = np.array(hi, dtype=np.int64)
        self.shape = hi - self.lo + 1
        self.grid = np.zeros(int(np.prod(self.shape)), dtype=np.uint8)

    @classmethod
    def for_sources(cls, d: int, sources, margin: int = 8):
        arr = np.array(sources, dtype=np.int64).reshape(len(sources), d)
        lo = arr.min(axis=0) - margin
        hi = arr.max(axis=0) + margin
        return cls(d, lo, hi)

    def contains(self, site) -> bool:
        idx = 0
        for a in range(self.d):
            c = site[a] - self.lo[a]
            if c < 0 or c >= self.shape[a]:
                return False
            idx = idx * self.shape[a] + c
        return self.grid[idx] != 0

    def add(self, site) -> None:
        for a in range(self.d):
            c = site[a] - self.lo[a]
            if c < 0 or c >= self.shape[a]:
                self._grow(site)
                break
        idx = 0
        for a in range(self.d):
            idx = idx * self.shape[a] + (site[a] - self.lo[a])
        self.grid[idx] = 1

    def _grow(self, site) -> None:
        hi = self.lo + self.shape - 1
        new_lo = self.lo.copy()
        new_hi = hi.copy()
        for a in range(self.d):
            pad = max(8, int(self.shape[a]) // 2)
            if site[a] < self.lo[a]:
                new_lo[a] = site[a] - pad
            if site[a] > hi[a]:
                new_hi[a] = site[a] + pad
        new_shape = new_hi - new_lo + 1
        new_grid = np.zeros(tuple(new_shape), dtype=np.uint8)
        off = self.lo - new_lo
        slices = tuple(slice(int(off[a]), int(off[a] + self.shape[a]))
                       for a in range(self.d))
        new_grid[slices] = self.grid.reshape(tuple(self.shape))
        self.lo = new_lo
        self.shape = new_shape
        self.grid = new_grid.ravel()


def schedule_emissions(seed: int, M: int, n: float, d: int) -> list:
    """All emissions from the window of radius M in (0, n], merged in time.

    Ties (possible only through floating-point coincidence) break by
    lexicographic source order, then particle index.
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    if n <= 0:
        raise ValueError("horizon must be positive")
    origin = (0,) * d
    return schedule_for_sources(seed, sources_in_ball(origin, M), n)


def schedule_for_sources(seed: int, sources, n: float) -> list:
    out = []
    for z in sources:
        tops = clock_tops(derive_key(seed, CLOCK, z, 0), n)
        for j, t in enumerate(tops.times, start=1):
            out.append(Emission(z, t, j))
    out.sort(key=lambda e: (e.time, e.source, e.particle_index))
    return out


def _vec_add(a: Site, b: Site) -> Site:
    return tuple(x + y for x, y in zip(a, b))


def advance_particle(walk, start: Site, occupied,
                     step_budget: int = DEFAULT_STEP_BUDGET) -> ParticleTrace:
    """Reference walk: advance until the first site not in `occupied`.

    `walk` is either a walk StreamKey, a WalkSteps view, or any indexable
    sequence of unit step vectors (scripted fixtures).  Always records the
    full path; the engine's fast path goes through the kernels instead.
    """
    if isinstance(walk, StreamKey):
        walk = WalkSteps(walk)
    pos = tuple(start)
    path = [pos]
    steps = 0
    prev = None
    while pos in occupied:
        if steps >= step_budget:
            raise StepBudgetExceeded(step_budget)
        prev = pos
        pos = _vec_add(pos, tuple(walk[steps]))
        steps += 1
        path.append(pos)
    edge = (prev, pos) if steps > 0 else None
    src = path[0]
    radius = max(max(abs(p[a] - src[a]) for a in range(1, len(src)))
                 for p in path)
    origin_reach = max(max(abs(p[a]) for a in range(1, len(src)))
                       for p in path)
    return ParticleTrace(None, tuple(path), pos, edge, steps, radius,
                         origin_reach)


class AggregateBuilder:
    """Sequential replay state for one aggregate (and optionally its forest)."""

    def __init__(self, seed: int, d: int, sources,
                 step_budget: int = DEFAULT_STEP_BUDGET,
                 record_paths: bool = False,
                 direction_modulus: Optional[int] = None):
        if not (MIN_DIM <= d <= MAX_DIM):
            raise UnsupportedDimension(f"dimension {d} outside supported range")
        self.seed = seed
        self.d = d
        self.step_budget = step_budget
        self.record_paths = record_paths
        self.dir_mod = 2 * d if direction_modulus is None else direction_modulus
        self.grid = OccupancyGrid.for_sources(d, sources)
        self.sites = []
        self.creators = []
        self.roots = set()
        self.parent_edge = {}
        self.traces = []
        self._src_buf = np.empty(d, dtype=np.int64)
        self._settle = np.empty(d, dtype=np.int64)
        self._prev = np.empty(d, dtype=np.int64)

    def emit(self, emission: Emission) -> ParticleTrace:
        z = emission.source
        key = derive_key(self.seed, WALK, z, emission.particle_index)
        for a in range(self.d):
            self._src_buf[a] = z[a]
        status, next_i, r_src, r_org = K.walk_to_exit(
            key.k0, key.k1, self._src_buf, self._src_buf, 0,
            self.grid.grid, self.grid.lo, self.grid.shape,
            self.step_budget, self.dir_mod, self._settle, self._prev)
        if status != 0:
            raise StepBudgetExceeded(self.step_budget, z, emission.particle_index)
        steps = int(next_i)
        settle = tuple(int(c) for c in self._settle)
        if steps > 0:
            edge = (tuple(int(c) for c in self._prev), settle)
        else:
            edge = None
        path = None
        if self.record_paths:
            buf = np.empty((steps + 1, self.d), dtype=np.int64)
            K.fill_walk_path(key.k0, key.k1, self._src_buf, 0, steps,
                             self.dir_mod, buf)
            path = tuple(tuple(int(c) for c in row) for row in buf)
        self.grid.add(settle)
        self.sites.append(settle)
        self.creators.append(emission)
        if edge is None:
            self.roots.add(settle)
        else:
            self.parent_edge[settle] = edge
        trace = ParticleTrace(emission, path, settle, edge, steps,
                              int(r_src), int(r_org))
        self.traces.append(trace)
        return trace

    def aggregate(self) -> Aggregate:
        return Aggregate(self.d, self.sites, self.creators)

    def forest(self) -> Forest:
        return Forest(self.roots, self.parent_edge)


def run_build(seed: int, sources, n: float, d: int,
              step_budget: int = DEFAULT_STEP_BUDGET,
              record_paths: bool = False) -> AggregateBuilder:
    """Time-ordered replay over an explicit source set; returns the builder
    (its occupancy grid stays usable as a frozen reference)."""
    builder = AggregateBuilder(seed, d, sources, step_budget, record_paths)
    for emission in schedule_for_sources(seed, sources, n):
        builder.emit(emission)
    return builder


def build_for_sources(seed: int, sources, n: float, d: int,
                      step_budget: int = DEFAULT_STEP_BUDGET,
                      record_paths: bool = False):
    """Time-ordered build over an explicit source set."""
    builder = run_build(seed, sources, n, d, step_budget, record_paths)
    return builder.aggregate(), builder.forest(), list(builder.traces)


def build_aggregate_forest(seed: int, M: int, n: float, d: int,
                           step_budget: int = DEFAULT_STEP_BUDGET,
                           record_paths: bool = False):
    """Time-ordered aggregate and forest for the window of radius M."""
    if M < 0:
        raise ValueError("M must be non-negative")
    if n <= 0:
        raise ValueError("horizon must be positive")
    origin = (0,) * d
    return build_for_sources(seed, sources_in_ball(origin, M), n, d,
                             step_budget, record_paths)


def run_ordered_build(seed: int, M: int, n: float, d: int,
                      step_budget: int = DEFAULT_STEP_BUDGET,
                      direction_modulus: Optional[int] = None) -> AggregateBuilder:
    """Level-ordered replay (source by source, level 0 outward, lexicographic
    within a level); same clock counts and walk streams as the time-ordered
    build so the comparison isolates ordering effects only."""
    if M < 0:
        raise ValueError("M must be non-negative")
    if n <= 0:
        raise ValueError("horizon must be positive")
    origin = (0,) * d
    sources = sorted(sources_in_ball(origin, M), key=lambda z: (inf_norm(z), z))
    builder = AggregateBuilder(seed, d, sources, step_budget,
                               direction_modulus=direction_modulus)
    for z in sources:
        tops = clock_tops(derive_key(seed, CLOCK, z, 0), n)
        for j, t in enumerate(tops.times, start=1):
            builder.emit(Emission(z, t, j))
    return builder


def build_ordered_aggregate(seed: int, M: int, n: float, d: int,
                            step_budget: int = DEFAULT_STEP_BUDGET,
                            direction_modulus: Optional[int] = None) -> Aggregate:
    """Level-ordered aggregate (see run_ordered_build)."""
    return run_ordered_build(seed, M, n, d, step_budget,
                             direction_modulus).aggregate()


def run_single_source_build(seed: int, count: int, d: int,
                            step_budget: int = DEFAULT_STEP_BUDGET) -> AggregateBuilder:
    """Classical IDLA replay: exactly `count` particles from the origin.

    No clocks are involved; emission times are the ordinals 1..count.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    origin = (0,) * d
    builder = AggregateBuilder(seed, d, [origin], step_budget)
    for j in range(1, count + 1):
        builder.emit(Emission(origin, float(j), j))
    return builder


def single_source_aggregate(seed: int, count: int, d: int,
                            step_budget: int = DEFAULT_STEP_BUDGET) -> Aggregate:
    """Classical IDLA: exactly `count` particles from the origin."""
    return run_single_source_build(seed, count, d, step_budget).aggregate()


def probe_walk(key: StreamKey, start: Site, grid: OccupancyGrid,
               step_budget: int = DEFAULT_STEP_BUDGET,
               src: Optional[Site] = None) -> ParticleTrace:
    """Walk against a frozen occupancy grid without modifying it."""
    d = grid.d
    src = start if src is None else src
    src_buf = np.array(src, dtype=np.int64)
    start_buf = np.array(start, dtype=np.int64)
    settle = np.empty(d, dtype=np.int64)
    prev = np.empty(d, dtype=np.int64)
    status, next_i, r_src, r_org = K.walk_to_exit(
        key.k0, key.k1, src_buf, start_buf, 0, grid.grid, grid.lo,
        grid.shape, step_budget, 2 * d, settle, prev)
    if status != 0:
        raise StepBudgetExceeded(step_budget, tuple(src), key.particle_index)
    steps = int(next_i)
    settle_t = tuple(int(c) for c in settle)
    edge = ((tuple(int(c) for c in prev), settle_t) if steps > 0 else None)
    return ParticleTrace(None, None, settle_t, edge, steps, int(r_src),
                         int(r_org))


# re-export for callers that build scripted walks
__all__ = [
    "Emission", "ParticleTrace", "Aggregate", "Forest", "OccupancyGrid",
    "AggregateBuilder", "schedule_emissions", "schedule_for_sources",
    "advance_particle", "build_aggregate_forest", "build_for_sources",
    "build_ordered_aggregate", "single_source_aggregate", "probe_walk",
    "run_build", "run_ordered_build", "run_single_source_build",
    "unit_steps", "DEFAULT_STEP_BUDGET", "MODE_TIME_ORDERED",
    "MODE_LEVEL_ORDERED", "MODE_SINGLE_SOURCE",
]
