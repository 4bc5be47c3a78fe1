"""Walk radii, discrete Boolean models on the hyperplane, and their clusters.

Radii here are measured against a *frozen* reference aggregate built up
front, the finite proxy for the infinite-volume aggregate (a runtime audit
flags any record whose walk strayed far enough to feel the window
truncation).  Radii against the growing aggregate of a replay are available
through coupling event logs instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .engine import (DEFAULT_STEP_BUDGET, OccupancyGrid, ParticleTrace,
                     probe_walk, run_build)
from .lattice import (Source, hball_overlap, hyperplane_sphere_size, inf_norm,
                      sources_in_ball)
from .streams import (CLOCK, WALK, clock_tops, derive_key, first_top,
                      replicate_seed)

Z95 = 1.959963984540054


def trace_radius(trace: ParticleTrace) -> int:
    """Smallest hyperplane-ball radius around the source containing the
    projection of every visited site (settle site included)."""
    if trace.path is not None:
        src = trace.path[0]
        return max(max(abs(p[a] - src[a]) for a in range(1, len(src)))
                   for p in trace.path)
    return trace.radius


@dataclass(frozen=True)
class StartingPoint:
    source: Source
    time: float
    particle_index: int


@dataclass(frozen=True)
class RadiusRecord:
    starting_point: StartingPoint
    radius: int
    reference: str
    origin_reach: int
    proxy_ok: bool


@dataclass
class FrozenReference:
    """Pre-built aggregate used as the exit set for probe walks."""

    description: str
    grid: OccupancyGrid
    site_count: int
    audit_level: Optional[int]


def build_frozen_reference(seed: int, sources, T: float, d: int,
                           description: str,
                           audit_level: Optional[int] = None,
                           step_budget: int = DEFAULT_STEP_BUDGET) -> FrozenReference:
    builder = run_build(seed, sources, T, d, step_budget)
    return FrozenReference(description, builder.grid, len(builder.sites),
                           audit_level)


def _probe_records(seed: int, probes, eps: float, ref: FrozenReference,
                   step_budget: int) -> list:
    records = []
    for z in sorted(probes):
        tops = clock_tops(derive_key(seed, CLOCK, z, 0), eps)
        for j, t in enumerate(tops.times, start=1):
            key = derive_key(seed, WALK, z, j)
            trace = probe_walk(key, z, ref.grid, step_budget)
            ok = (ref.audit_level is None
                  or trace.origin_reach <= ref.audit_level)
            records.append(RadiusRecord(StartingPoint(z, t, j), trace.radius,
                                        ref.description, trace.origin_reach,
                                        ok))
    return records


def radii_table(seed: int, region, eps: float, T: float, M_ref: int, d: int,
                step_budget: int = DEFAULT_STEP_BUDGET) -> list:
    """Radius records for every emission in (0, eps] from sources in `region`,
    walked against the frozen window-M_ref aggregate at horizon T.

    M_ref proxies the infinite-volume aggregate; records whose walk reached
    a hyperplane distance beyond M_ref // 2 from the origin are flagged
    (proxy_ok False) because the truncation may have shortened them.
    """
    if eps > T:
        raise ValueError("eps must not exceed T")
    origin = (0,) * d
    ref = build_frozen_reference(seed, sources_in_ball(origin, M_ref), T, d,
                                 f"window:{M_ref}", M_ref // 2, step_budget)
    return _probe_records(seed, region, eps, ref, step_budget)


def localized_radii(x: Source, M: int, seed: int, eps: float, T: float,
                    d: int, step_budget: int = DEFAULT_STEP_BUDGET) -> list:
    """Records of the localized model: reference built from sources within
    20M of x, probes restricted to emitters within 10M of x."""
    if M < 1:
        raise ValueError("M must be >= 1")
    ref_sources = sources_in_ball(x, 20 * M)
    ref = build_frozen_reference(seed, ref_sources, T, d,
                                 f"ball:{x}:{20 * M}", None, step_budget)
    probes = [z for z in sources_in_ball(x, 10 * M)
              if first_top(derive_key(seed, CLOCK, z, 0)) <= eps]
    return _probe_records(seed, probes, eps, ref, step_budget)


def emission_probability(eps: float) -> float:
    """Probability that a source emits at least once in (0, eps]."""
    return 1.0 - math.exp(-eps)


@dataclass(frozen=True)
class BooleanModel:
    """Hyperplane balls at the sources that emitted within (0, eps]."""

    d: int
    centers: tuple
    radii: tuple
    epsilon: float
    T: float
    reference: str

    @property
    def hyperplane_dim(self) -> int:
        return self.d - 1

    def __len__(self):
        return len(self.centers)


def build_boolean_model(records, eps: float, T: float, d: int) -> BooleanModel:
    """Assemble per-center maximal radii from a radius table."""
    by_center = {}
    reference = ""
    for rec in records:
        z = rec.starting_point.source
        by_center[z] = max(by_center.get(z, 0), rec.radius)
        reference = rec.reference
    centers = tuple(sorted(by_center))
    radii = tuple(by_center[z] for z in centers)
    return BooleanModel(d, centers, radii, eps, T, reference)


@dataclass(frozen=True)
class Cluster:
    members: tuple  # sorted indices into the model's center list


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def clusters(model: BooleanModel) -> list:
    """Connected components of the ball-overlap graph (union-find)."""
    n = len(model.centers)
    uf = _UnionFind(n)
    for i in range(n):
        for j in range(i + 1, n):
            if hball_overlap(model.centers[i], model.radii[i],
                             model.centers[j], model.radii[j]):
                uf.union(i, j)
    groups = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return [Cluster(tuple(sorted(g)))
            for _, g in sorted(groups.items())]


def origin_cluster_diameter(model: BooleanModel) -> Optional[int]:
    """Minimal r with the origin's cluster (balls inflated by their radii)
    inside the hyperplane ball of radius r; None when 0 did not emit."""
    origin = (0,) * model.d
    try:
        anchor = model.centers.index(origin)
    except ValueError:
        return None
    for cl in clusters(model):
        if anchor in cl.members:
            return max(inf_norm(model.centers[i]) + model.radii[i]
                       for i in cl.members)
    raise AssertionError("anchor missing from every cluster")


def find_descending_chain(records, K0: int, target_level: int):
    """Search for a witness of the descending-chain event.

    A witness is a sequence of records with strictly decreasing times and
    consecutively overlapping balls, whose first ball meets the strip of
    half-width K0 and whose last source lies beyond `target_level` (the
    finite surrogate for escape to infinity).  Returns the record list or
    None.  Memoized depth-first search; exhaustive, since strict time
    decrease makes the reachability graph acyclic.
    """
    n = len(records)
    order = sorted(range(n),
                   key=lambda i: (-records[i].starting_point.time,
                                  records[i].starting_point.source))
    memo = {}

    def level(i):
        return inf_norm(records[i].starting_point.source)

    def overlap(i, j):
        return hball_overlap(records[i].starting_point.source,
                             records[i].radius,
                             records[j].starting_point.source,
                             records[j].radius)

    def solve(i):
        if i in memo:
            return memo[i]
        memo[i] = None  # cycle guard; unreachable given strict time order
        if level(i) > target_level:
            memo[i] = [i]
            return memo[i]
        best = None
        for j in order:
            if (records[j].starting_point.time < records[i].starting_point.time
                    and overlap(i, j)):
                tail = solve(j)
                if tail is not None:
                    best = [i] + tail
                    break
        memo[i] = best
        return best

    for i in order:
        if inf_norm(records[i].starting_point.source) <= K0 + records[i].radius:
            path = solve(i)
            if path is not None:
                return [records[k] for k in path]
    return None


def component_escapes(model: BooleanModel, x: Source, M: int) -> bool:
    """Does the component of the seed ball (x, M) in (model union that ball)
    leave the ball of radius 8M around x?

    A member ball B(z, r) escapes exactly when inf_norm(z - x) + r > 8M.
    """
    n = len(model.centers)
    uf = _UnionFind(n + 1)  # node n is the seed ball (x, M)
    for i in range(n):
        for j in range(i + 1, n):
            if hball_overlap(model.centers[i], model.radii[i],
                             model.centers[j], model.radii[j]):
                uf.union(i, j)
        if hball_overlap(model.centers[i], model.radii[i], x, M):
            uf.union(i, n)
    seed_root = uf.find(n)
    for i in range(n):
        if uf.find(i) != seed_root:
            continue
        reach = max(abs(a - b) for a, b in zip(model.centers[i], x))
        if reach + model.radii[i] > 8 * M:
            return True
    return False


def event_G(x: Source, M: int, eps: float, seed: int, T: float, d: int,
            step_budget: int = DEFAULT_STEP_BUDGET) -> bool:
    """Does the component of x in (localized model union seed ball of radius
    M at x) escape the ball of radius 8M around x?"""
    if M < 1:
        raise ValueError("M must be >= 1")
    emitters = [z for z in sources_in_ball(x, 10 * M)
                if first_top(derive_key(seed, CLOCK, z, 0)) <= eps]
    if not emitters:
        return False
    records = localized_radii(x, M, seed, eps, T, d, step_budget)
    model = build_boolean_model(records, eps, T, d)
    return component_escapes(model, x, M)


def wilson_interval(hits: int, trials: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = hits / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class PiEstimate:
    epsilon: float
    M: int
    trials: int
    hits: int
    fraction: float
    ci_lo: float
    ci_hi: float


def estimate_pi(eps: float, M: int, trials: int, seed: int, T: float, d: int,
                step_budget: int = DEFAULT_STEP_BUDGET) -> PiEstimate:
    """Monte Carlo frequency of the escape event at the origin."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    origin = (0,) * d
    hits = 0
    for t in range(trials):
        if event_G(origin, M, eps, replicate_seed(seed, t), T, d, step_budget):
            hits += 1
    lo, hi = wilson_interval(hits, trials)
    return PiEstimate(eps, M, trials, hits, hits / trials, lo, hi)


@dataclass(frozen=True)
class UnionBoundReport:
    epsilon: float
    M: int
    bound: float
    pi_hat: float
    ci_half_width: float
    ok: bool


def check_union_bound(eps: float, M: int, estimate: PiEstimate,
                      d: int) -> UnionBoundReport:
    """Escape forces at least one emitter within 10M, so pi is bounded by
    p_eps times the ball cardinality (20M+1)^(d-1)."""
    bound = emission_probability(eps) * float((20 * M + 1) ** (d - 1))
    half = (estimate.ci_hi - estimate.ci_lo) / 2.0
    ok = estimate.fraction <= bound + 2.0 * half
    return UnionBoundReport(eps, M, bound, estimate.fraction, half, ok)


def multiscale_constant(d: int) -> int:
    """Combinatorial constant of the scale-doubling inequality: product of
    the hyperplane sphere sizes at radii 10 and 80."""
    return hyperplane_sphere_size(d, 10) * hyperplane_sphere_size(d, 80)


@dataclass(frozen=True)
class MultiscaleReport:
    verdict: str  # "pass" | "fail" | "inconclusive"
    c_geom: float
    slack: float
    lhs_ci: tuple
    rhs_lo: float
    rhs_hi: float


def check_multiscale(est_M: PiEstimate, est_10M: PiEstimate, c_geom: float,
                     slack: float) -> MultiscaleReport:
    """Three-valued check of pi(10M) <= c_geom * pi(M)^2 + slack.

    Verdict is decided only when the confidence intervals allow it;
    otherwise "inconclusive" (forcing a binary answer at small pi would
    fabricate confidence).
    """
    rhs_lo = c_geom * est_M.ci_lo**2 + slack
    rhs_hi = c_geom * est_M.ci_hi**2 + slack
    if est_10M.ci_hi <= rhs_lo:
        verdict = "pass"
    elif est_10M.ci_lo > rhs_hi:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    return MultiscaleReport(verdict, c_geom, slack,
                            (est_10M.ci_lo, est_10M.ci_hi), rhs_lo, rhs_hi)
