import math

import pytest

from idlaforest.engine import (advance_particle, build_aggregate_forest,
                               build_ordered_aggregate, schedule_emissions,
                               single_source_aggregate)
from idlaforest.errors import StepBudgetExceeded
from idlaforest.lattice import inf_norm
from idlaforest.streams import CLOCK, WALK, clock_tops, derive_key, walk_steps

SEED = 2024


# ------------------------------------------------------------- scheduling

def test_schedule_empty_horizon_tiny():
    # horizon so small that no clock fires for almost every seed; with a
    # fixed seed just assert the contract on whatever comes out
    ems = schedule_emissions(SEED, 0, 1e-9, 2)
    assert ems == []


def test_schedule_sorted_and_complete():
    for seed in range(100):
        ems = schedule_emissions(seed, 2, 3.0, 2)
        times = [e.time for e in ems]
        assert times == sorted(times)
        assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))
        assert all(inf_norm(e.source) <= 2 and 0 < e.time <= 3.0
                   for e in ems)


def test_schedule_mean_count():
    # Poisson mean n * (2M+1)^(d-1) = 15 for d=2, M=2, n=3
    total = sum(len(schedule_emissions(seed, 2, 3.0, 2))
                for seed in range(200))
    assert abs(total / 200 - 15.0) <= 1.2


def test_schedule_matches_clock_tops():
    ems = schedule_emissions(SEED, 1, 2.0, 2)
    for e in ems:
        tops = clock_tops(derive_key(SEED, CLOCK, e.source, 0), 2.0)
        assert tops.times[e.particle_index - 1] == e.time


# -------------------------------------------------------- advance_particle

def test_advance_empty_aggregate():
    trace = advance_particle([], (0, 5), set())
    assert trace.settle_site == (0, 5)
    assert trace.entry_edge is None
    assert trace.steps_taken == 0
    assert trace.radius == 0


def test_advance_scripted_one_step():
    z = (0, 0)
    trace = advance_particle([(1, 0)], z, {z})
    assert trace.settle_site == (1, 0)
    assert trace.entry_edge == ((0, 0), (1, 0))
    assert trace.steps_taken == 1


def test_advance_scripted_two_steps():
    z = (0, 0)
    occupied = {z, (1, 0)}
    trace = advance_particle([(1, 0), (1, 0)], z, occupied)
    assert trace.settle_site == (2, 0)
    assert trace.entry_edge == ((1, 0), (2, 0))
    assert trace.steps_taken == 2
    assert trace.path == ((0, 0), (1, 0), (2, 0))


def test_advance_radius_from_projection():
    z = (0, 0)
    occupied = {(0, 0), (1, 0), (1, 1)}
    # up, right, right: projections 0, 0, 1, 2 -> radius 2
    trace = advance_particle([(1, 0), (0, 1), (0, 1)], z, occupied)
    assert trace.settle_site == (1, 2)
    assert trace.radius == 2
    # moving only along the first axis keeps the projection constant
    t2 = advance_particle([(1, 0), (1, 0), (1, 0)], z, {(0, 0), (1, 0), (2, 0)})
    assert t2.radius == 0


def test_advance_budget():
    z = (0, 0)
    block = {(x, y) for x in range(-9, 10) for y in range(-9, 10)}
    with pytest.raises(StepBudgetExceeded):
        advance_particle(walk_steps(derive_key(SEED, WALK, z, 1)), z, block,
                         step_budget=5)


# ------------------------------------------------------------- full builds

def _replay_oracle(seed, M, n, d):
    """Independent sequential replay with plain sets and WalkSteps."""
    occupied = set()
    order = []
    roots = set()
    edges = {}
    for e in schedule_emissions(seed, M, n, d):
        key = derive_key(seed, WALK, e.source, e.particle_index)
        trace = advance_particle(walk_steps(key), e.source, occupied)
        occupied.add(trace.settle_site)
        order.append(trace.settle_site)
        if trace.entry_edge is None:
            roots.add(trace.settle_site)
        else:
            edges[trace.settle_site] = trace.entry_edge
    return occupied, order, roots, edges


@pytest.mark.parametrize("seed", [0, 7, 123])
def test_build_matches_replay_oracle(seed):
    agg, forest, traces = build_aggregate_forest(seed, 1, 1.0, 2)
    occupied, order, roots, edges = _replay_oracle(seed, 1, 1.0, 2)
    assert set(agg.occupied) == occupied
    assert agg.sites == order
    assert forest.roots == roots
    assert forest.parent_edge == edges


def test_build_d3_matches_replay_oracle():
    agg, forest, _ = build_aggregate_forest(11, 1, 0.8, 3)
    occupied, order, roots, edges = _replay_oracle(11, 1, 0.8, 3)
    assert agg.sites == order
    assert forest.parent_edge == edges
    assert forest.roots == roots


def test_vertex_identity_and_forest_shape():
    agg, forest, traces = build_aggregate_forest(SEED, 4, 3.0, 2)
    assert forest.vertices == set(agg.occupied)
    assert len(agg) == len(traces)  # each particle adds exactly one site
    # single parent, acyclic: following parents always terminates in a root
    for site in agg.occupied:
        seen = set()
        cur = site
        while cur in forest.parent_edge:
            assert cur not in seen
            seen.add(cur)
            parent, child = forest.parent_edge[cur]
            assert child == cur
            assert sum(abs(a - b) for a, b in zip(parent, child)) == 1
            cur = parent
        assert cur in forest.roots
        assert cur[0] == 0  # roots lie on the hyperplane


def test_roots_are_self_settled_sources():
    agg, forest, traces = build_aggregate_forest(SEED, 3, 2.0, 2)
    for t in traces:
        if t.entry_edge is None:
            assert t.settle_site == t.emission.source
            assert t.steps_taken == 0


def test_monotone_in_horizon():
    a_short, f_short, _ = build_aggregate_forest(SEED, 3, 2.0, 2)
    a_long, f_long, _ = build_aggregate_forest(SEED, 3, 4.0, 2)
    assert set(a_short.occupied) <= set(a_long.occupied)
    assert set(f_short.edges()) <= set(f_long.edges())
    # prefix stability: the first emissions coincide
    assert a_long.sites[:len(a_short.sites)] == a_short.sites


def test_determinism_bit_identical():
    a1, f1, t1 = build_aggregate_forest(SEED, 3, 2.5, 2)
    a2, f2, t2 = build_aggregate_forest(SEED, 3, 2.5, 2)
    assert a1.sites == a2.sites
    assert f1 == f2
    assert t1 == t2


def test_traces_record_paths_when_asked():
    agg, forest, traces = build_aggregate_forest(SEED, 2, 1.5, 2,
                                                 record_paths=True)
    assert len(set(agg.sites)) == len(agg.sites)  # sites unique
    for t in traces:
        assert t.path[0] == t.emission.source
        assert t.path[-1] == t.settle_site
        assert len(t.path) == t.steps_taken + 1
        src = t.path[0]
        assert t.radius == max(abs(p[1] - src[1]) for p in t.path)
        # every visited site except the settle site was occupied when the
        # walk crossed it (the aggregate only grows, so membership in the
        # final aggregate witnesses that)
        for p in t.path[:-1]:
            assert p in agg


# --------------------------------------------------------- ordered builds

def test_ordered_empty_and_single_source_cases():
    # no tops anywhere: tiny horizon keeps every clock silent w.h.p.; use a
    # seed checked to produce zero tops
    for seed in range(50):
        if not schedule_emissions(seed, 1, 1e-9, 2):
            assert len(build_ordered_aggregate(seed, 1, 1e-9, 2)) == 0
            break
    else:
        pytest.fail("no silent seed found")


def test_ordered_m0_equals_single_source():
    for seed in (1, 2, 3):
        n = 4.0
        count = len(clock_tops(derive_key(seed, CLOCK, (0, 0), 0), n))
        ordered = build_ordered_aggregate(seed, 0, n, 2)
        single = single_source_aggregate(seed, count, 2)
        assert ordered.sites == single.sites


def test_single_source_small_counts():
    assert len(single_source_aggregate(SEED, 0, 2)) == 0
    agg = single_source_aggregate(SEED, 1, 2)
    assert agg.sites == [(0, 0)]
    agg = single_source_aggregate(SEED, 50, 2)
    assert len(agg) == 50
    assert (0, 0) in agg


def test_single_source_contains_ball():
    # shape sanity at a desk scale: 500 particles cover the euclidean ball
    # of radius 0.9 * sqrt(500 / pi) ~ 11.3 for this frozen seed
    agg = single_source_aggregate(SEED, 500, 2)
    r = 0.9 * math.sqrt(500 / math.pi)
    for x in range(-12, 13):
        for y in range(-12, 13):
            if x * x + y * y <= r * r:
                assert (x, y) in agg


def test_ordered_same_clock_counts_as_time_ordered():
    seed = 77
    agg_time, _, _ = build_aggregate_forest(seed, 2, 3.0, 2)
    agg_level = build_ordered_aggregate(seed, 2, 3.0, 2)
    assert len(agg_time) == len(agg_level)
    # same emission multiset (sources with multiplicity), different order
    def key_counts(agg):
        counts = {}
        for e in agg.creators:
            counts[e.source] = counts.get(e.source, 0) + 1
        return counts
    assert key_counts(agg_time) == key_counts(agg_level)


# ---------------------------------------------------- coupling enablement

def test_streams_independent_of_window():
    """Same master seed: the smaller window's emissions and walks are a
    subset of the larger window's (the coupling-enabling property)."""
    small = schedule_emissions(SEED, 2, 2.0, 2)
    large = schedule_emissions(SEED, 5, 2.0, 2)
    small_keys = {(e.source, e.particle_index, e.time) for e in small}
    large_keys = {(e.source, e.particle_index, e.time) for e in large}
    assert small_keys <= large_keys
    inner = {k for k in large_keys if inf_norm(k[0]) <= 2}
    assert inner == small_keys
