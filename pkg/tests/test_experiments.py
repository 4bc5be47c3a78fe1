import math
from fractions import Fraction

import pytest

from idlaforest.experiments import (abelian_scan, cone_scan, coverage_scan,
                                    donut_width, rooted_and_vacant_scan,
                                    stabilization_scan_aggregate,
                                    stabilization_scan_forest,
                                    strip_entry_scan, translation_test)
from idlaforest.lattice import integer_nth_root
from idlaforest.reports import run_record_lines

SEED = 909


def test_forest_scan_single_grid_value_trivially_stable():
    rec = stabilization_scan_forest(1.0, 2, [4], 5, SEED)
    assert rec.summary["pair_fractions"][0]["fraction"] == 1.0
    assert rec.summary["instabilities_unwitnessed"] == 0


def test_forest_scan_instabilities_witnessed():
    rec = stabilization_scan_forest(4.0, 2, [4, 8, 16], 30, SEED)
    assert rec.summary["instabilities_unwitnessed"] == 0
    fr = [p["fraction"] for p in rec.summary["pair_fractions"]]
    assert fr == sorted(fr)  # non-decreasing at this scale


def test_aggregate_scan_structure():
    rec = stabilization_scan_aggregate(1.0, [4, 8], 20, SEED)
    per_M = rec.summary["per_M"]
    assert [r["M"] for r in per_M] == [4, 8]
    assert all(0.0 <= r["fraction"] <= 1.0 for r in per_M)
    assert rec.summary["monotone_within_ci"]


def test_aggregate_scan_tiny_horizon_agrees():
    rec = stabilization_scan_aggregate(0.01, [10], 40, SEED)
    assert rec.summary["per_M"][0]["fraction"] >= 0.99


def test_cone_scan_huge_epsilon_never_violates():
    rec = cone_scan(1.0, [6], Fraction(1000), Fraction(3, 4), 10, SEED)
    assert rec.summary["per_M"][0]["fraction"] == 0.0


def test_cone_scan_requires_steep_alpha():
    with pytest.raises(Exception):
        cone_scan(1.0, [6], Fraction(1), Fraction(1, 4), 2, SEED)


def test_donut_width_exact():
    # floor(2 * eps * L^alpha) in exact arithmetic: 2 * 32^(4/5) = 32
    assert donut_width(Fraction(1), Fraction(4, 5), 32) == 32
    assert donut_width(Fraction(1), Fraction(4, 5), 31) == \
        integer_nth_root(2**5 * 31**4, 5)
    assert donut_width(Fraction(1, 1000), Fraction(4, 5), 8) == 1  # floor 0 -> 1


def test_strip_scan_level_above_strip():
    rec = strip_entry_scan(5, [11], 400, Fraction(1), Fraction(4, 5), SEED)
    lvl = rec.summary["per_level"][0]
    assert 0.0 < lvl["reach_fraction"] < 1.0
    assert rec.summary["crossing_bound"] == 1 - 1 / 16
    assert rec.summary["donuts_ok"]


def test_strip_scan_rejects_shallow_levels():
    with pytest.raises(Exception):
        strip_entry_scan(5, [10], 10, Fraction(1), Fraction(4, 5), SEED)


def test_translation_shift_zero_identical():
    rec = translation_test(1.0, 1, [(0, 0)], 40, SEED)
    shift = rec.summary["per_shift"][0]
    # identical windows: chi-square statistic 0, perfect correlation
    assert shift["max_stat"] == 0.0
    assert shift["adjusted_p"] == 1.0
    assert shift["count_correlation"] == pytest.approx(1.0)


def test_rooted_density_matches_formula():
    rec = rooted_and_vacant_scan(1.0, 5000, 1, SEED, vacant=False)
    assert abs(rec.summary["rooted_density"]
               - (1 - math.exp(-1))) <= 0.015
    assert "vacant_line_fraction" not in rec.summary


def test_rooted_zero_horizon():
    rec = rooted_and_vacant_scan(0.0, 50, 3, SEED)
    assert rec.summary["rooted_density"] == 0.0
    assert rec.summary["vacant_line_fraction"] == 1.0


def test_vacant_lines_small_n():
    rec = rooted_and_vacant_scan(0.2, 100, 20, SEED)
    assert rec.summary["vacant_line_fraction"] >= 0.95


def test_abelian_m0_trivial():
    rec = abelian_scan(2.0, 0, 400, SEED)
    assert rec.summary["adjusted_p"] >= 0.01


def test_abelian_negative_control_fails():
    ok = abelian_scan(2.0, 1, 400, SEED)
    bad = abelian_scan(2.0, 1, 400, SEED, negative_control=True)
    assert ok.summary["passes"]
    assert bad.summary["adjusted_p"] < ok.summary["adjusted_p"]
    assert not bad.summary["passes"]


def test_coverage_empty_set_trivial():
    rec = coverage_scan([0.5], [], 5, SEED)
    assert rec.summary["per_n"][0]["fraction"] == 1.0


def test_coverage_origin_lower_bound():
    rec = coverage_scan([1.0], [(0, 0)], 200, SEED)
    frac = rec.summary["per_n"][0]["fraction"]
    # occupied as soon as its own source emits: >= 1 - e^-1 minus 4 sigma
    p = 1 - math.exp(-1)
    assert frac >= p - 4 * math.sqrt(p * (1 - p) / 200)


def test_coverage_monotone_in_horizon():
    rec = coverage_scan([1.0, 2.0, 4.0],
                        [(x, y) for x in (-1, 0, 1) for y in (-1, 0, 1)],
                        40, SEED)
    assert rec.summary["non_decreasing"]


def test_run_records_reproducible():
    a = stabilization_scan_aggregate(1.0, [4], 10, SEED)
    b = stabilization_scan_aggregate(1.0, [4], 10, SEED)
    assert run_record_lines(a) == run_record_lines(b)
    c = stabilization_scan_aggregate(1.0, [4], 10, SEED, threads=3)
    assert run_record_lines(a) == run_record_lines(c)


def test_config_echo_present_in_lines():
    rec = coverage_scan([0.5], [(0, 0)], 3, SEED)
    for line in run_record_lines(rec):
        assert line["schema_version"] == 1
        assert line["config"]["experiment"] == "coverage"
        assert line["config"]["master_seed"] == SEED
