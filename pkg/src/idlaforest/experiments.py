"""Named experiment runners with fixed protocols and reproducible records.

Every runner derives one master seed per replicate, fans replicates over an
optional thread pool (numba kernels release the GIL), and aggregates in
replicate order, so records are bit-identical for a given config regardless
of worker count.  Finite surrogates (proxy window radii, grid maxima) are
echoed into every record.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import chi2 as _chi2

from .coupling import (extract_chains, forest_window_equal,
                       run_coupling_ladder)
from .engine import (DEFAULT_STEP_BUDGET, build_aggregate_forest,
                     build_ordered_aggregate)
from .errors import ConfigError
from .lattice import (ConeSpec, in_strip, inf_norm, integer_nth_root,
                      sources_in_ball)
from .percolation import wilson_interval
from .streams import CLOCK, WALK, derive_key, first_top, replicate_seed
from . import _kernels as K


@dataclass(frozen=True)
class ExperimentConfig:
    """Echoed verbatim into every output record."""

    experiment: str
    d: int
    seeds: int
    master_seed: int
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"experiment": self.experiment, "d": self.d,
               "seeds": self.seeds, "master_seed": self.master_seed}
        out.update(self.params)
        return out


@dataclass
class RunRecord:
    """Replicate measurements plus summary; wall_clock never serializes."""

    config: ExperimentConfig
    replicates: list
    summary: dict
    wall_clock: float


def _fan_out(count: int, fn, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in range(count)]
    results = [None] * count
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(fn, i): i for i in range(count)}
        for fut, i in futures.items():
            results[i] = fut.result()
    return results


def _timed(config, replicates, summary, t0) -> RunRecord:
    return RunRecord(config, replicates, summary, time.monotonic() - t0)


def _chi2_2x2(a_yes: int, a_no: int, b_yes: int, b_no: int):
    """Pearson chi-square for a 2x2 table; returns (stat, p, min_expected)."""
    n = a_yes + a_no + b_yes + b_no
    row_a, row_b = a_yes + a_no, b_yes + b_no
    col_yes, col_no = a_yes + b_yes, a_no + b_no
    if 0 in (row_a, row_b, col_yes, col_no):
        return 0.0, 1.0, 0.0
    stat = 0.0
    min_exp = float("inf")
    for obs, r, c in ((a_yes, row_a, col_yes), (a_no, row_a, col_no),
                      (b_yes, row_b, col_yes), (b_no, row_b, col_no)):
        exp = r * c / n
        min_exp = min(min_exp, exp)
        stat += (obs - exp) ** 2 / exp
    return stat, float(_chi2.sf(stat, 1)), min_exp


# ------------------------------------------------------------ stabilization

def stabilization_scan_forest(n: float, K: int, N_grid, seeds: int,
                              master_seed: int, d: int = 2,
                              step_budget: int = DEFAULT_STEP_BUDGET,
                              threads: int = 1) -> RunRecord:
    """Forest agreement inside the strip of half-width K along a window grid.

    Each replicate builds the whole ladder under the natural coupling, tests
    consecutive grid pairs with forest_window_equal, and cross-audits every
    instability against an extracted chain of changes reaching the strip.
    """
    t0 = time.monotonic()
    N_grid = tuple(int(N) for N in N_grid)
    if any(b <= a for a, b in zip(N_grid, N_grid[1:])):
        raise ConfigError("N grid must be strictly increasing")
    if N_grid and N_grid[0] < K:
        raise ConfigError("grid minimum must be >= K")
    cfg = ExperimentConfig("stabilize-forest", d, seeds, master_seed,
                           {"n": n, "K": K, "N_grid": list(N_grid)})

    # single-entry grids degenerate to a self-comparison (trivially stable)
    pair_grid = list(zip(N_grid, N_grid[1:])) or [(N_grid[0], N_grid[0])]

    def one(i: int) -> dict:
        ms = replicate_seed(master_seed, i)
        ladder = run_coupling_ladder(ms, N_grid, n, d, step_budget)
        pairs = []
        for N, N2 in pair_grid:
            equal = forest_window_equal(ladder.states[N][1],
                                        ladder.states[N2][1], K)
            witnessed = None
            if not equal:
                chains = extract_chains(ladder.events, N, N2)
                witnessed = any(
                    any(in_strip(site, K) for site in c.discrepancy_sites)
                    for c in chains)
            pairs.append({"N": N, "N2": N2, "equal": equal,
                          "witnessed": witnessed})
        stable_from = None
        for idx in range(len(pairs)):
            if all(p["equal"] for p in pairs[idx:]):
                stable_from = N_grid[idx]
                break
        return {"seed_index": i, "pairs": pairs, "stable_from": stable_from}

    reps = _fan_out(seeds, one, threads)
    fractions = []
    for pair_idx, (N, N2) in enumerate(pair_grid):
        eq = sum(1 for r in reps if r["pairs"][pair_idx]["equal"])
        lo, hi = wilson_interval(eq, seeds)
        fractions.append({"N": N, "N2": N2, "fraction": eq / seeds,
                          "ci_lo": lo, "ci_hi": hi})
    unwitnessed = sum(
        1 for r in reps for p in r["pairs"]
        if not p["equal"] and not p["witnessed"])
    hist = {}
    for r in reps:
        key = str(r["stable_from"])
        hist[key] = hist.get(key, 0) + 1
    non_decreasing = all(b["fraction"] >= a["fraction"]
                         for a, b in zip(fractions, fractions[1:]))
    summary = {"pair_fractions": fractions,
               "stable_from_histogram": dict(sorted(hist.items())),
               "instabilities_unwitnessed": unwitnessed,
               "non_decreasing": non_decreasing}
    return _timed(cfg, reps, summary, t0)


def stabilization_scan_aggregate(n: float, M_grid, seeds: int,
                                 master_seed: int, d: int = 2,
                                 step_budget: int = DEFAULT_STEP_BUDGET,
                                 threads: int = 1) -> RunRecord:
    """Agreement of the window-2M and window-4M aggregates inside strip M."""
    t0 = time.monotonic()
    M_grid = tuple(int(M) for M in M_grid)
    cfg = ExperimentConfig("stabilize-aggregate", d, seeds, master_seed,
                           {"n": n, "M_grid": list(M_grid)})

    def one(i: int) -> dict:
        ms = replicate_seed(master_seed, i)
        out = {}
        for M in M_grid:
            ladder = run_coupling_ladder(ms, (2 * M, 4 * M), n, d, step_budget)
            a = {s for s in ladder.states[2 * M][0].occupied if in_strip(s, M)}
            b = {s for s in ladder.states[4 * M][0].occupied if in_strip(s, M)}
            out[str(M)] = a == b
        return {"seed_index": i, "agree": out}

    reps = _fan_out(seeds, one, threads)
    per_M = []
    for M in M_grid:
        agree = sum(1 for r in reps if r["agree"][str(M)])
        lo, hi = wilson_interval(agree, seeds)
        per_M.append({"M": M, "fraction": agree / seeds,
                      "ci_lo": lo, "ci_hi": hi})
    monotone_within_ci = all(
        b["fraction"] >= a["fraction"] - ((a["ci_hi"] - a["ci_lo"]) / 2
                                          + (b["ci_hi"] - b["ci_lo"]) / 2)
        for a, b in zip(per_M, per_M[1:]))
    summary = {"per_M": per_M, "monotone_within_ci": monotone_within_ci}
    return _timed(cfg, reps, summary, t0)


# -------------------------------------------------------------------- cone

def cone_scan(n: float, M_grid, eps, alpha, seeds: int, master_seed: int,
              d: int = 2, step_budget: int = DEFAULT_STEP_BUDGET,
              threads: int = 1) -> RunRecord:
    """Frequency of proxy-aggregate sites beyond strip M escaping the cone."""
    t0 = time.monotonic()
    cone = ConeSpec(Fraction(eps), Fraction(alpha))
    if not (Fraction(1) - Fraction(1, d) < cone.alpha):
        raise ConfigError("alpha must exceed 1 - 1/d")
    M_grid = tuple(int(M) for M in M_grid)
    cfg = ExperimentConfig("cone-scan", d, seeds, master_seed,
                           {"n": n, "M_grid": list(M_grid),
                            "eps": str(cone.epsilon), "alpha": str(cone.alpha)})
    thresh_cache = {}

    def max_offset(level: int) -> int:
        if level not in thresh_cache:
            thresh_cache[level] = cone.max_offset(level)
        return thresh_cache[level]

    def one(i: int) -> dict:
        ms = replicate_seed(master_seed, i)
        out = {}
        for M in M_grid:
            agg, _f, _t = build_aggregate_forest(ms, 2 * M, n, d, step_budget)
            violated = False
            for s in agg.sites:
                if in_strip(s, M):
                    continue
                level = max(abs(c) for c in s[1:])
                if abs(s[0]) > max_offset(level):
                    violated = True
                    break
            out[str(M)] = violated
        return {"seed_index": i, "violated": out}

    reps = _fan_out(seeds, one, threads)
    per_M = []
    for M in M_grid:
        v = sum(1 for r in reps if r["violated"][str(M)])
        lo, hi = wilson_interval(v, seeds)
        per_M.append({"M": M, "fraction": v / seeds, "ci_lo": lo, "ci_hi": hi})
    decreasing_within_ci = all(
        b["fraction"] <= a["fraction"] + ((a["ci_hi"] - a["ci_lo"]) / 2
                                          + (b["ci_hi"] - b["ci_lo"]) / 2)
        for a, b in zip(per_M, per_M[1:]))
    summary = {"per_M": per_M, "decreasing_within_ci": decreasing_within_ci}
    return _timed(cfg, reps, summary, t0)


def donut_width(eps: Fraction, alpha: Fraction, level: int) -> int:
    """Integer width of the widest donut at `level`: floor(2 eps level^alpha),
    at least 1."""
    p, q = alpha.numerator, alpha.denominator
    a, b = (2 * eps).numerator, (2 * eps).denominator
    return max(1, integer_nth_root(a**q * level**p, q) // b)


def strip_entry_scan(M: int, levels, walks: int, eps, alpha,
                     master_seed: int, d: int = 2,
                     step_budget: int = 10**7,
                     threads: int = 1) -> RunRecord:
    """Free walks from high levels: strip-entry fraction and per-donut
    crossing frequencies against the 1 - (2d)^-2 bound.

    Donut boundaries descend from the start level in steps of the widest
    donut's width; a crossing of donut k means reaching boundary k from
    boundary k-1 before leaving the cone.  Walks that leave the tracked
    region or exhaust the budget are counted as censored (reported, treated
    as not reaching the strip).
    """
    t0 = time.monotonic()
    cone = ConeSpec(Fraction(eps), Fraction(alpha))
    levels = tuple(int(l) for l in levels)
    if any(l <= 2 * M for l in levels):
        raise ConfigError("levels must exceed 2M")
    cfg = ExperimentConfig("strip-scan", d, len(levels) * walks, master_seed,
                           {"M": M, "levels": list(levels), "walks": walks,
                            "eps": str(cone.epsilon), "alpha": str(cone.alpha)})
    crossing_bound = 1.0 - (2 * d) ** -2

    per_level = []
    all_donuts = []
    for L in levels:
        width = donut_width(cone.epsilon, cone.alpha, L)
        boundaries = []
        b = L
        while b > M:
            boundaries.append(b)
            b -= width
        boundaries_arr = np.array(boundaries, dtype=np.int64)
        cap = max(4 * L, L + 64)
        thresh = cone.threshold_table(cap - 1)
        start = np.zeros(d, dtype=np.int64)
        start[1] = L
        source = tuple(int(c) for c in start)

        def one(w: int) -> tuple:
            key = derive_key(master_seed, WALK, source, w + 1)
            return K.free_walk_cone(key.k0, key.k1, start, thresh, M,
                                    boundaries_arr, step_budget)

        outcomes = _fan_out(walks, one, threads)
        reached = sum(1 for o, _dp, _s in outcomes if o == 1)
        censored = sum(1 for o, _dp, _s in outcomes if o == 2)
        entered = [0] * len(boundaries)
        crossed = [0] * len(boundaries)
        for _o, deepest, _s in outcomes:
            for k in range(1, len(boundaries)):
                if deepest >= k - 1:
                    entered[k] += 1
                if deepest >= k:
                    crossed[k] += 1
        donuts = []
        for k in range(1, len(boundaries)):
            if entered[k] == 0:
                continue
            freq = crossed[k] / entered[k]
            sigma = math.sqrt(crossing_bound * (1 - crossing_bound)
                              / entered[k])
            donuts.append({"level": L, "donut": k, "outer": boundaries[k - 1],
                           "inner": boundaries[k], "entered": entered[k],
                           "crossed": crossed[k], "frequency": freq,
                           "limit": crossing_bound + 3 * sigma,
                           "ok": freq <= crossing_bound + 3 * sigma})
        all_donuts.extend(donuts)
        lo, hi = wilson_interval(reached, walks)
        per_level.append({"level": L, "reach_fraction": reached / walks,
                          "ci_lo": lo, "ci_hi": hi, "censored": censored,
                          "donut_width": width,
                          "donut_count": max(0, len(boundaries) - 1)})

    decreasing = all(b["reach_fraction"] <= a["reach_fraction"]
                     + ((a["ci_hi"] - a["ci_lo"]) / 2
                        + (b["ci_hi"] - b["ci_lo"]) / 2)
                     for a, b in zip(per_level, per_level[1:]))
    summary = {"per_level": per_level,
               "crossing_bound": crossing_bound,
               "donuts_ok": all(dn["ok"] for dn in all_donuts),
               "reach_decreasing_within_ci": decreasing}
    return _timed(cfg, [{"donuts": all_donuts}], summary, t0)


# ------------------------------------------------------------- invariance

def _window_sites(center, K: int, d: int) -> list:
    """Sites of the cube of half-width K centered on a source."""
    import itertools as it
    ranges = [range(-K, K + 1)] + [range(c - K, c + K + 1)
                                   for c in center[1:]]
    return [tuple(v) for v in it.product(*ranges)]


def translation_test(n: float, K: int, shifts, seeds: int, master_seed: int,
                     d: int = 2, step_budget: int = DEFAULT_STEP_BUDGET,
                     threads: int = 1) -> RunRecord:
    """Chi-square homogeneity of local occupation patterns under source
    shifts, plus correlation decay of window counts (mixing proxy)."""
    t0 = time.monotonic()
    shifts = [tuple(s) for s in shifts]
    for s in shifts:
        if s[0] != 0:
            raise ConfigError("shifts must lie on the hyperplane")
    origin = (0,) * d
    max_shift = max([0] + [inf_norm(s) for s in shifts])
    proxy_M = 2 * (max_shift + K + 1)
    cfg = ExperimentConfig("translate-test", d, seeds, master_seed,
                           {"n": n, "K": K, "shifts": [list(s) for s in shifts],
                            "proxy_window": proxy_M})
    windows = [origin] + shifts
    window_sites = {c: _window_sites(c, K, d) for c in windows}

    def one(i: int) -> dict:
        ms = replicate_seed(master_seed, i)
        agg, _f, _t = build_aggregate_forest(ms, proxy_M, n, d, step_budget)
        out = {}
        for c in windows:
            bits = tuple(1 if s in agg else 0 for s in window_sites[c])
            out[str(c)] = bits
        return {"seed_index": i, "patterns": out}

    reps = _fan_out(seeds, one, threads)
    n_sites = len(window_sites[origin])
    origin_counts = [sum(r["patterns"][str(origin)][k] for r in reps)
                     for k in range(n_sites)]
    per_shift = []
    for s in shifts:
        shift_counts = [sum(r["patterns"][str(s)][k] for r in reps)
                        for k in range(n_sites)]
        tested = 0
        min_p = 1.0
        max_stat = 0.0
        for k in range(n_sites):
            stat, p, min_exp = _chi2_2x2(origin_counts[k],
                                         seeds - origin_counts[k],
                                         shift_counts[k],
                                         seeds - shift_counts[k])
            if min_exp < 5:
                continue
            tested += 1
            min_p = min(min_p, p)
            max_stat = max(max_stat, stat)
        adj_p = min(1.0, min_p * tested) if tested else 1.0
        o_tot = [sum(r["patterns"][str(origin)][k] for k in range(n_sites))
                 for r in reps]
        s_tot = [sum(r["patterns"][str(s)][k] for k in range(n_sites))
                 for r in reps]
        corr = _pearson(o_tot, s_tot)
        per_shift.append({"shift": list(s), "tested_sites": tested,
                          "max_stat": max_stat, "adjusted_p": adj_p,
                          "count_correlation": corr})
    summary = {"per_shift": per_shift}
    return _timed(cfg, reps, summary, t0)


def _pearson(xs, ys) -> float:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)


def rooted_and_vacant_scan(n: float, region: int, seeds: int,
                           master_seed: int, d: int = 2,
                           vacant: bool = True,
                           step_budget: int = DEFAULT_STEP_BUDGET,
                           threads: int = 1) -> RunRecord:
    """Empirical density of sources that emitted by time n versus 1-e^-n;
    for d=2 also counts hyperplane-parallel lines untouched by the proxy
    aggregate inside the region (set vacant=False to skip the builds)."""
    t0 = time.monotonic()
    origin = (0,) * d
    cfg = ExperimentConfig("rooted-vacant", d, seeds, master_seed,
                           {"n": n, "region": region, "vacant": vacant,
                            "proxy_window": 2 * region})
    region_sources = sources_in_ball(origin, region)

    def one(i: int) -> dict:
        ms = replicate_seed(master_seed, i)
        rooted = sum(1 for z in region_sources
                     if first_top(derive_key(ms, CLOCK, z, 0)) <= n)
        rec = {"seed_index": i, "rooted": rooted,
               "sources": len(region_sources)}
        if d == 2 and vacant:
            if n > 0:
                agg, _f, _t = build_aggregate_forest(ms, 2 * region, n, d,
                                                     step_budget)
                occupied_rows = {s[1] for s in agg.sites}
            else:
                occupied_rows = set()
            rec["vacant_lines"] = sum(1 for y in range(-region, region + 1)
                                      if y not in occupied_rows)
        return rec

    reps = _fan_out(seeds, one, threads)
    total = sum(r["rooted"] for r in reps)
    denom = seeds * len(region_sources)
    lo, hi = wilson_interval(total, denom)
    summary = {"rooted_density": total / denom, "ci_lo": lo, "ci_hi": hi,
               "expected_density": 1.0 - math.exp(-n)}
    if d == 2 and vacant:
        with_vacant = sum(1 for r in reps if r["vacant_lines"] > 0)
        summary["vacant_line_fraction"] = with_vacant / seeds
    return _timed(cfg, reps, summary, t0)


# ---------------------------------------------------------------- abelian

def abelian_scan(n: float, M: int, seeds_per_arm: int, master_seed: int,
                 d: int = 2, window_radius: int = 3,
                 negative_control: bool = False,
                 step_budget: int = DEFAULT_STEP_BUDGET,
                 threads: int = 1) -> RunRecord:
    """Per-site occupancy marginals of the time-ordered versus level-ordered
    builds, independent seeds per arm, chi-square with Bonferroni adjustment.

    The negative control biases the level-ordered walk's direction draw,
    which must make the test fail (power check)."""
    t0 = time.monotonic()
    if M > 2:
        raise ConfigError("abelian scan needs a small window (M <= 2) "
                          "for statistical power")
    origin = (0,) * d
    cfg = ExperimentConfig("abelian", d, seeds_per_arm, master_seed,
                           {"n": n, "M": M, "window_radius": window_radius,
                            "negative_control": negative_control})
    window = [s for s in _window_sites(origin, window_radius, d)]
    dir_mod = 2 * d - 1 if negative_control else None

    def time_ordered(i: int) -> tuple:
        ms = replicate_seed(master_seed, 2 * i)
        agg, _f, _t = build_aggregate_forest(ms, M, n, d, step_budget)
        return tuple(1 if s in agg else 0 for s in window)

    def level_ordered(i: int) -> tuple:
        ms = replicate_seed(master_seed, 2 * i + 1)
        agg = build_ordered_aggregate(ms, M, n, d, step_budget,
                                      direction_modulus=dir_mod)
        return tuple(1 if s in agg else 0 for s in window)

    arm_a = _fan_out(seeds_per_arm, time_ordered, threads)
    arm_b = _fan_out(seeds_per_arm, level_ordered, threads)
    counts_a = [sum(bits[k] for bits in arm_a) for k in range(len(window))]
    counts_b = [sum(bits[k] for bits in arm_b) for k in range(len(window))]
    tested = 0
    min_p = 1.0
    max_stat = 0.0
    worst_site = None
    for k, site in enumerate(window):
        stat, p, min_exp = _chi2_2x2(counts_a[k], seeds_per_arm - counts_a[k],
                                     counts_b[k], seeds_per_arm - counts_b[k])
        if min_exp < 5:
            continue
        tested += 1
        if stat > max_stat:
            max_stat = stat
            worst_site = site
        min_p = min(min_p, p)
    adjusted_p = min(1.0, min_p * tested) if tested else 1.0
    summary = {"tested_sites": tested, "max_stat": max_stat,
               "worst_site": list(worst_site) if worst_site else None,
               "adjusted_p": adjusted_p, "passes": adjusted_p >= 0.01}
    reps = [{"site": list(site), "occupied_time_ordered": counts_a[k],
             "occupied_level_ordered": counts_b[k]}
            for k, site in enumerate(window)]
    return _timed(cfg, reps, summary, t0)


# --------------------------------------------------------------- coverage

def coverage_scan(n_grid, S, seeds: int, master_seed: int, d: int = 2,
                  step_budget: int = DEFAULT_STEP_BUDGET,
                  threads: int = 1) -> RunRecord:
    """Fraction of replicates whose proxy aggregate covers the finite set S,
    per horizon in the grid.  One window serves the whole grid so coverage
    is monotone in n replicate by replicate."""
    t0 = time.monotonic()
    S = [tuple(s) for s in S]
    n_grid = tuple(float(x) for x in n_grid)
    reach = max([0] + [max(abs(c) for c in s[1:]) for s in S])
    proxy_M = 2 * (reach + int(math.ceil(max(n_grid))) + 2)
    cfg = ExperimentConfig("coverage", d, seeds, master_seed,
                           {"n_grid": list(n_grid), "S": [list(s) for s in S],
                            "proxy_window": proxy_M})

    def one(i: int) -> dict:
        ms = replicate_seed(master_seed, i)
        covered = {}
        for n in n_grid:
            agg, _f, _t = build_aggregate_forest(ms, proxy_M, n, d,
                                                 step_budget)
            covered[str(n)] = all(s in agg for s in S)
        return {"seed_index": i, "covered": covered}

    reps = _fan_out(seeds, one, threads)
    per_n = []
    for n in n_grid:
        c = sum(1 for r in reps if r["covered"][str(n)])
        lo, hi = wilson_interval(c, seeds)
        per_n.append({"n": n, "fraction": c / seeds, "ci_lo": lo, "ci_hi": hi})
    summary = {"per_n": per_n,
               "non_decreasing": all(b["fraction"] >= a["fraction"]
                                     for a, b in zip(per_n, per_n[1:]))}
    return _timed(cfg, reps, summary, t0)
