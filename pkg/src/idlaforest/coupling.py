"""Couplings of window sizes, discrepancy classification, chains of changes.

The natural coupling drives any increasing ladder of window radii with one
shared emission schedule and shared walk streams; aggregate inclusion is
audited after every event.  The special coupling implements the wake-up rule
under which every discrepancy site is owed to a particle emitted from the
outer source annulus; that property is audited at every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .engine import (DEFAULT_STEP_BUDGET, Aggregate, Emission, Forest,
                     OccupancyGrid)
from .errors import AuditViolation, StepBudgetExceeded
from .lattice import Site, hball_overlap, in_strip, inf_norm, sources_in_ball
from .streams import WALK, derive_key


@dataclass(frozen=True)
class WindowEntry:
    """Per-window outcome of one emission in a coupling ladder."""

    M: int
    settle: Site
    edge: Optional[tuple]
    steps: int
    radius: int
    origin_reach: int


@dataclass(frozen=True)
class CouplingEvent:
    index: int
    emission: Emission
    entries: tuple  # WindowEntry per contributing window, ascending M


class _WindowState:
    def __init__(self, d: int, M: int, sources):
        self.d = d
        self.M = M
        self.grid = OccupancyGrid.for_sources(d, sources)
        self.sites = []
        self.creators = []
        self.roots = set()
        self.parent_edge = {}

    def add(self, site: Site, emission: Emission, edge) -> None:
        self.grid.add(site)
        self.sites.append(site)
        self.creators.append(emission)
        if edge is None:
            self.roots.add(site)
        else:
            self.parent_edge[site] = edge

    def aggregate(self) -> Aggregate:
        return Aggregate(self.d, self.sites, self.creators)

    def forest(self) -> Forest:
        return Forest(self.roots, self.parent_edge)


@dataclass
class CouplingLadder:
    seed: int
    d: int
    n: float
    windows: tuple
    states: dict  # M -> (Aggregate, Forest)
    events: list


def run_coupling_ladder(seed: int, windows, n: float, d: int,
                        step_budget: int = DEFAULT_STEP_BUDGET,
                        audit: bool = True) -> CouplingLadder:
    """Natural coupling over an increasing ladder of window radii.

    One merged schedule over the largest window; each particle's walk stream
    is read once per window it contributes to, continuing from its previous
    settle site, so the same trajectory serves every window.
    """
    windows = tuple(sorted(set(int(M) for M in windows)))
    if len(windows) < 1:
        raise ValueError("need at least one window")
    if any(M < 0 for M in windows):
        raise ValueError("windows must be non-negative")
    origin = (0,) * d
    states = [_WindowState(d, M, sources_in_ball(origin, M)) for M in windows]
    from .engine import schedule_emissions

    schedule = schedule_emissions(seed, windows[-1], n, d)
    events = []
    src_buf = np.empty(d, dtype=np.int64)
    start_buf = np.empty(d, dtype=np.int64)
    settle_buf = np.empty(d, dtype=np.int64)
    prev_buf = np.empty(d, dtype=np.int64)
    for idx, emission in enumerate(schedule):
        z = emission.source
        level = inf_norm(z)
        key = derive_key(seed, WALK, z, emission.particle_index)
        for a in range(d):
            src_buf[a] = z[a]
            start_buf[a] = z[a]
        cur_step = 0
        cur_radius = 0
        cur_reach = 0
        last_prev = None
        entries = []
        for st in states:
            if st.M < level:
                continue
            status, next_i, r_src, r_org = K.walk_to_exit(
                key.k0, key.k1, src_buf, start_buf, cur_step,
                st.grid.grid, st.grid.lo, st.grid.shape,
                step_budget, 2 * d, settle_buf, prev_buf)
            if status != 0:
                raise StepBudgetExceeded(step_budget, z, emission.particle_index)
            steps_here = int(next_i) - cur_step
            settle = tuple(int(c) for c in settle_buf)
            if steps_here > 0:
                last_prev = tuple(int(c) for c in prev_buf)
            cur_step = int(next_i)
            cur_radius = max(cur_radius, int(r_src))
            cur_reach = max(cur_reach, int(r_org))
            edge = (last_prev, settle) if cur_step > 0 else None
            st.add(settle, emission, edge)
            entries.append(WindowEntry(st.M, settle, edge, cur_step,
                                       cur_radius, cur_reach))
            for a in range(d):
                start_buf[a] = settle[a]
        if audit:
            for i in range(len(entries) - 1):
                bigger = next(s for s in states if s.M == entries[i + 1].M)
                if not bigger.grid.contains(entries[i].settle):
                    raise AuditViolation(
                        f"inclusion broken at event {idx}: site "
                        f"{entries[i].settle} of window {entries[i].M} absent "
                        f"from window {entries[i + 1].M}")
        events.append(CouplingEvent(idx, emission, tuple(entries)))
    result = {st.M: (st.aggregate(), st.forest()) for st in states}
    return CouplingLadder(seed, d, n, windows, result, events)


def run_natural_coupling(seed: int, M: int, M2: int, n: float, d: int,
                         step_budget: int = DEFAULT_STEP_BUDGET,
                         audit: bool = True):
    """Two-window natural coupling; returns (ladder, event log)."""
    if not M < M2:
        raise ValueError("window radii must satisfy M < M'")
    ladder = run_coupling_ladder(seed, (M, M2), n, d, step_budget, audit)
    return ladder, ladder.events


@dataclass
class SpecialCouplingResult:
    seed: int
    d: int
    n: float
    M: int
    M2: int
    small_aggregate: Aggregate
    small_forest: Forest
    large_aggregate: Aggregate
    audit_log: list  # dict records, one per wake-up or outer emission
    suspended: dict  # discrepancy site -> creator Emission at the end


def run_special_coupling(seed: int, M: int, M2: int, n: float, d: int,
                         step_budget: int = DEFAULT_STEP_BUDGET) -> SpecialCouplingResult:
    """Special coupling with the wake-up rule and a running audit.

    A particle of the inner window settling on a discrepancy site wakes the
    stored walk of the particle that created it; the woken walk resumes from
    its suspension counter (no trajectory buffering) until it exits the
    larger aggregate.  The audit asserts, at every step, that every
    discrepancy site is owed to a particle emitted from the outer annulus.
    """
    if not M < M2:
        raise ValueError("window radii must satisfy M < M'")
    origin = (0,) * d
    small = _WindowState(d, M, sources_in_ball(origin, M))
    large = _WindowState(d, M2, sources_in_ball(origin, M2))
    # discrepancy site -> (k0, k1, resume counter, creating emission)
    suspended = {}
    audit_log = []
    from .engine import schedule_emissions

    schedule = schedule_emissions(seed, M2, n, d)
    src_buf = np.empty(d, dtype=np.int64)
    start_buf = np.empty(d, dtype=np.int64)
    settle_buf = np.empty(d, dtype=np.int64)
    prev_buf = np.empty(d, dtype=np.int64)

    def _walk(k0, k1, src, start, first, state):
        for a in range(d):
            src_buf[a] = src[a]
            start_buf[a] = start[a]
        status, next_i, r_src, r_org = K.walk_to_exit(
            k0, k1, src_buf, start_buf, first,
            state.grid.grid, state.grid.lo, state.grid.shape,
            step_budget, 2 * d, settle_buf, prev_buf)
        if status != 0:
            raise StepBudgetExceeded(step_budget, src)
        settle = tuple(int(c) for c in settle_buf)
        prev = tuple(int(c) for c in prev_buf) if int(next_i) > first else None
        return settle, prev, int(next_i)

    for idx, emission in enumerate(schedule):
        z = emission.source
        level = inf_norm(z)
        key = derive_key(seed, WALK, z, emission.particle_index)
        if level > M:
            settle, prev, next_i = _walk(key.k0, key.k1, z, z, 0, large)
            edge = (prev, settle) if next_i > 0 else None
            large.add(settle, emission, edge)
            suspended[settle] = (key.k0, key.k1, next_i, emission)
            audit_log.append({"event": idx, "action": "outer-settle",
                              "site": settle, "creator": z,
                              "creator_index": emission.particle_index})
        else:
            settle, prev, next_i = _walk(key.k0, key.k1, z, z, 0, small)
            edge = (prev, settle) if next_i > 0 else None
            small.add(settle, emission, edge)
            if large.grid.contains(settle):
                if settle not in suspended:
                    raise AuditViolation(
                        f"event {idx}: discrepancy {settle} has no suspended walk")
                wk0, wk1, resume, creator = suspended.pop(settle)
                if inf_norm(creator.source) <= M:
                    raise AuditViolation(
                        f"event {idx}: discrepancy {settle} created by inner "
                        f"source {creator.source}")
                y, yprev, new_next = _walk(wk0, wk1, creator.source, settle,
                                           resume, large)
                large.add(y, creator, (yprev, y) if yprev else None)
                suspended[y] = (wk0, wk1, new_next, creator)
                audit_log.append({"event": idx, "action": "wake-up",
                                  "visited": settle, "site": y,
                                  "creator": creator.source,
                                  "creator_index": creator.particle_index})
            else:
                large.add(settle, emission, edge)
        if len(suspended) != len(large.sites) - len(small.sites):
            raise AuditViolation(
                f"event {idx}: discrepancy ledger out of balance")
    small_sites = set(small.sites)
    for site in suspended:
        if site in small_sites:
            raise AuditViolation(f"suspended site {site} is not a discrepancy")
    final_suspended = {site: rec[3] for site, rec in suspended.items()}
    return SpecialCouplingResult(seed, d, n, M, M2, small.aggregate(),
                                 small.forest(), large.aggregate(),
                                 audit_log, final_suspended)


@dataclass(frozen=True)
class DiscrepancyReport:
    """Color classification of a coupled pair (Fig.-2 style).

    red: sites of the larger aggregate only.  blue: common sites reached by
    a different creating emission or through a different entry edge (the
    edge-differing subset is reported separately because only it falsifies
    forest equality).  green_edges: edges present in both forests.
    """

    red: frozenset
    blue: frozenset
    blue_edge: frozenset
    green_edges: frozenset


def classify_discrepancies(small_pair, large_pair) -> DiscrepancyReport:
    small_agg, small_forest = small_pair
    large_agg, large_forest = large_pair
    small_sites = set(small_agg.occupied)
    large_sites = set(large_agg.occupied)
    if not small_sites <= large_sites:
        raise AuditViolation("inclusion invariant does not hold")
    red = large_sites - small_sites
    blue = set()
    blue_edge = set()
    for site in small_sites:
        e_small = small_forest.parent_edge.get(site)
        e_large = large_forest.parent_edge.get(site)
        edge_differs = e_small != e_large
        creator_differs = (small_agg.creator_of(site)
                           != large_agg.creator_of(site))
        if edge_differs:
            blue_edge.add(site)
        if edge_differs or creator_differs:
            blue.add(site)
    green = small_forest.edges() & large_forest.edges()
    return DiscrepancyReport(frozenset(red), frozenset(blue),
                             frozenset(blue_edge), frozenset(green))


@dataclass(frozen=True)
class Relay:
    """One link of a chain of changes."""

    emission: Emission
    visited: Optional[Site]  # discrepancy the particle settled on (None for the opener)
    created: Site            # new discrepancy site
    radius: int              # walk radius w.r.t. the larger window


@dataclass(frozen=True)
class ChainOfChanges:
    relays: tuple
    originating_level: int

    @property
    def times(self):
        return tuple(r.emission.time for r in self.relays)

    @property
    def discrepancy_sites(self):
        return tuple(r.created for r in self.relays)

    def satisfies_conditions(self) -> bool:
        """Strict time increase plus consecutive ball overlap."""
        ts = self.times
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            return False
        for r1, r2 in zip(self.relays, self.relays[1:]):
            if not hball_overlap(r1.emission.source, r1.radius,
                                 r2.emission.source, r2.radius):
                return False
        return True


def extract_chains(events, M: int, M2: int) -> list:
    """Reconstruct every maximal relay sequence from a natural-coupling log.

    A chain opens when an outer emission creates a discrepancy; it extends
    whenever an inner particle's smaller-window settle site equals the
    chain's current discrepancy, which relays the token to that particle's
    larger-window settle site.
    """
    token = {}
    chains = []
    for ev in events:
        z = ev.emission.source
        level = inf_norm(z)
        if level > M2:
            # ladder log may carry emissions beyond the pair's larger window;
            # they play no role in the (M, M2) coupling
            continue
        entry_large = next((e for e in ev.entries if e.M == M2), None)
        if entry_large is None:
            raise ValueError(f"event {ev.index} lacks a window-{M2} entry")
        if level > M:
            relays = [Relay(ev.emission, None, entry_large.settle,
                            entry_large.radius)]
            token[entry_large.settle] = relays
            chains.append(relays)
        else:
            entry_small = next((e for e in ev.entries if e.M == M), None)
            if entry_small is None:
                raise ValueError(f"event {ev.index} lacks a window-{M} entry")
            visited = entry_small.settle
            if visited in token:
                relays = token.pop(visited)
                relays.append(Relay(ev.emission, visited, entry_large.settle,
                                    entry_large.radius))
                token[entry_large.settle] = relays
    return [ChainOfChanges(tuple(r), inf_norm(r[0].emission.source))
            for r in chains]


def forest_window_equal(f1: Forest, f2: Forest, K: int) -> bool:
    """Vertices and parent edges restricted to the strip of half-width K agree."""
    v1 = {v for v in f1.vertices if in_strip(v, K)}
    v2 = {v for v in f2.vertices if in_strip(v, K)}
    if v1 != v2:
        return False
    e1 = {e for e in f1.edges() if in_strip(e[0], K) and in_strip(e[1], K)}
    e2 = {e for e in f2.edges() if in_strip(e[0], K) and in_strip(e[1], K)}
    return e1 == e2
