"""Command-line surface.

Subcommands: simulate, forest, couple, chains, radii, boolean, pi-scan,
stabilize-forest, stabilize-aggregate, cone-scan, strip-scan, abelian,
translate-test, coverage, figure, verify-snapshot.

Exit status: 0 success, 1 checked error (bad config, IO, checksum, audit),
2 usage error.  All outputs are deterministic functions of (config, seed);
worker count only affects wall clock.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import engine, snapshot
from .config import load_config, require_keys
from .coupling import (classify_discrepancies, extract_chains,
                       run_natural_coupling, run_special_coupling)
from .errors import ConfigError, IdlaError
from .experiments import (abelian_scan, cone_scan, coverage_scan,
                          stabilization_scan_aggregate,
                          stabilization_scan_forest, strip_entry_scan,
                          translation_test)
from .figures import emit_figure, scene_from_coupling, scene_from_snapshot
from .lattice import sources_in_ball
from .percolation import (build_boolean_model, check_union_bound, clusters,
                          estimate_pi, radii_table)
from .reports import (provenance_records, run_record_lines, write_csv,
                      write_jsonl)


def _parse_seed(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError as exc:
        raise ConfigError(f"cannot parse seed {text!r}") from exc


def _fraction(v) -> Fraction:
    # exact rationals from config scalars; floats go through their decimal
    # literal so "0.6" means 3/5, not the binary float
    return Fraction(str(v))


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", default="1", help="master seed (decimal or 0x hex)")
    sub.add_argument("--dim", type=int, default=2, help="lattice dimension d")
    sub.add_argument("--out", default=None, help="output path (or prefix)")
    sub.add_argument("--config", default=None, help="key=value config file")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker threads for replicates")
    sub.add_argument("--step-budget", type=int, default=engine.DEFAULT_STEP_BUDGET,
                     help="per-particle walk step cap")


def _merged_config(args, allowed, required=()) -> dict:
    cfg = {}
    if args.config:
        cfg = load_config(args.config)
        require_keys(cfg, allowed, ())
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)} "
                          f"(--config file required for this subcommand)")
    return cfg


def _base_echo(args, **extra) -> dict:
    echo = {"seed": _parse_seed(args.seed), "d": args.dim,
            "step_budget": args.step_budget}
    echo.update(extra)
    return echo


def _need_out(args) -> str:
    if not args.out:
        raise ConfigError("this subcommand requires --out")
    return args.out


# ------------------------------------------------------------- simulate ---

def _cmd_simulate(args) -> int:
    seed = _parse_seed(args.seed)
    d = args.dim
    if args.mode == engine.MODE_SINGLE_SOURCE:
        if args.count is None:
            raise ConfigError("single-source mode requires --count")
        builder = engine.run_single_source_build(seed, args.count, d,
                                                 args.step_budget)
        config = {"mode": args.mode, "d": d, "count": args.count,
                  "seed": seed, "step_budget": args.step_budget}
    else:
        if args.window is None or args.horizon is None:
            raise ConfigError("time/level-ordered modes require -M and -n")
        if args.mode == engine.MODE_TIME_ORDERED:
            builder = engine.run_build(
                seed, sources_in_ball((0,) * d, args.window), args.horizon,
                d, args.step_budget)
        else:
            builder = engine.run_ordered_build(seed, args.window,
                                               args.horizon, d,
                                               args.step_budget)
        config = {"mode": args.mode, "d": d, "M": args.window,
                  "n": args.horizon, "seed": seed,
                  "step_budget": args.step_budget}
    state = snapshot.snapshot_from_build(config, builder)
    if args.out:
        snapshot.save_snapshot(state, args.out)
    print(f"sites={len(state.sites)} roots={len(state.roots())} "
          f"edges={len(state.edges())}"
          + (f" -> {args.out}" if args.out else ""))
    return 0


def _cmd_forest(args) -> int:
    if args.input:
        state = snapshot.load_snapshot(args.input)
    else:
        if args.window is None or args.horizon is None:
            raise ConfigError("forest requires --in or -M and -n")
        seed = _parse_seed(args.seed)
        builder = engine.run_build(
            seed, sources_in_ball((0,) * args.dim, args.window),
            args.horizon, args.dim, args.step_budget)
        config = {"mode": engine.MODE_TIME_ORDERED, "d": args.dim,
                  "M": args.window, "n": args.horizon, "seed": seed,
                  "step_budget": args.step_budget}
        state = snapshot.snapshot_from_build(config, builder)
    payloads = []
    for i, site in enumerate(state.sites):
        p = state.parents[i]
        payloads.append(("vertex", {
            "site": site, "insertion_index": i,
            "parent": None if p < 0 else state.sites[p],
            "root": p < 0}))
    # echo in the snapshot's canonical string form so exports agree whether
    # built fresh or loaded from disk
    echo = {k: str(v) for k, v in state.config.items()}
    records = provenance_records(echo, payloads)
    path = _need_out(args)
    write_jsonl(path, records)
    print(f"{len(state.sites)} vertices -> {path}")
    return 0


# -------------------------------------------------------------- coupling ---

def _coupling_args(sub) -> None:
    sub.add_argument("-M", "--window", type=int, required=True)
    sub.add_argument("--M2", type=int, required=True,
                     help="larger window radius")
    sub.add_argument("-n", "--horizon", type=float, required=True)


def _cmd_couple(args) -> int:
    seed = _parse_seed(args.seed)
    echo = _base_echo(args, M=args.window, M2=args.M2, n=args.horizon,
                      special=args.special)
    payloads = []
    if args.special:
        res = run_special_coupling(seed, args.window, args.M2, args.horizon,
                                   args.dim, args.step_budget)
        for rec in res.audit_log:
            payloads.append(("audit", rec))
        payloads.append(("summary", {
            "small_sites": len(res.small_aggregate),
            "large_sites": len(res.large_aggregate),
            "discrepancies": len(res.suspended),
            "outer_origin_ok": True}))
    else:
        ladder, events = run_natural_coupling(seed, args.window, args.M2,
                                              args.horizon, args.dim,
                                              args.step_budget)
        for ev in events:
            payloads.append(("event", {
                "index": ev.index,
                "source": ev.emission.source,
                "time": ev.emission.time,
                "particle_index": ev.emission.particle_index,
                "windows": [{
                    "M": e.M, "settle": e.settle,
                    "edge": e.edge, "steps": e.steps, "radius": e.radius,
                } for e in ev.entries]}))
        report = classify_discrepancies(ladder.states[args.window],
                                        ladder.states[args.M2])
        payloads.append(("summary", {
            "small_sites": len(ladder.states[args.window][0]),
            "large_sites": len(ladder.states[args.M2][0]),
            "red": len(report.red), "blue": len(report.blue),
            "blue_edge": len(report.blue_edge),
            "green_edges": len(report.green_edges)}))
    path = _need_out(args)
    write_jsonl(path, provenance_records(echo, payloads))
    print(f"{len(payloads) - 1} records -> {path}")
    return 0


def _cmd_chains(args) -> int:
    seed = _parse_seed(args.seed)
    _ladder, events = run_natural_coupling(seed, args.window, args.M2,
                                           args.horizon, args.dim,
                                           args.step_budget)
    chains = extract_chains(events, args.window, args.M2)
    echo = _base_echo(args, M=args.window, M2=args.M2, n=args.horizon)
    payloads = []
    for i, chain in enumerate(chains):
        payloads.append(("chain", {
            "chain_index": i,
            "originating_level": chain.originating_level,
            "length": len(chain.relays),
            "valid": chain.satisfies_conditions(),
            "relays": [{
                "source": r.emission.source, "time": r.emission.time,
                "particle_index": r.emission.particle_index,
                "visited": r.visited, "created": r.created,
                "radius": r.radius} for r in chain.relays]}))
    path = _need_out(args)
    write_jsonl(path, provenance_records(echo, payloads))
    print(f"{len(chains)} chains -> {path}")
    return 0


# ------------------------------------------------------------ percolation ---

def _cmd_radii(args) -> int:
    seed = _parse_seed(args.seed)
    region = sources_in_ball((0,) * args.dim, args.region)
    records = radii_table(seed, region, args.eps, args.horizon, args.m_ref,
                          args.dim, args.step_budget)
    echo = _base_echo(args, eps=args.eps, T=args.horizon, M_ref=args.m_ref,
                      region=args.region)
    payloads = [("radius", {
        "source": r.starting_point.source, "time": r.starting_point.time,
        "particle_index": r.starting_point.particle_index,
        "radius": r.radius, "reference": r.reference,
        "origin_reach": r.origin_reach, "proxy_ok": r.proxy_ok})
        for r in records]
    path = _need_out(args)
    write_jsonl(path, provenance_records(echo, payloads))
    print(f"{len(records)} records -> {path}")
    return 0


def _cmd_boolean(args) -> int:
    seed = _parse_seed(args.seed)
    region = sources_in_ball((0,) * args.dim, args.region)
    records = radii_table(seed, region, args.eps, args.horizon, args.m_ref,
                          args.dim, args.step_budget)
    model = build_boolean_model(records, args.eps, args.horizon, args.dim)
    parts = clusters(model)
    echo = _base_echo(args, eps=args.eps, T=args.horizon, M_ref=args.m_ref,
                      region=args.region)
    payloads = [("model", {
        "centers": list(model.centers), "radii": list(model.radii),
        "hyperplane_dim": model.hyperplane_dim,
        "reference": model.reference})]
    for i, cl in enumerate(parts):
        payloads.append(("cluster", {
            "cluster_index": i,
            "members": [model.centers[k] for k in cl.members],
            "size": len(cl.members)}))
    path = _need_out(args)
    write_jsonl(path, provenance_records(echo, payloads))
    print(f"{len(model)} centers, {len(parts)} clusters -> {path}")
    return 0


def _cmd_pi_scan(args) -> int:
    allowed = {"eps_grid", "M_grid", "trials", "T"}
    cfg = _merged_config(args, allowed, ("eps_grid", "M_grid"))
    eps_grid = [float(e) for e in cfg["eps_grid"]]
    m_grid = [int(m) for m in cfg["M_grid"]]
    trials = int(cfg.get("trials", 2000))
    horizon = float(cfg.get("T", 2.0))
    seed = _parse_seed(args.seed)
    rows = []
    for eps in eps_grid:
        for M in m_grid:
            est = estimate_pi(eps, M, trials, seed, horizon, args.dim,
                              args.step_budget)
            bound = check_union_bound(eps, M, est, args.dim)
            rows.append((eps, M, trials, est.fraction, est.ci_lo, est.ci_hi,
                         bound.bound))
    path = _need_out(args)
    write_csv(path, ("epsilon", "M", "trials", "pi_hat", "ci_lo", "ci_hi",
                     "bound"), rows)
    print(f"{len(rows)} rows -> {path}")
    return 0


# ------------------------------------------------------------ experiments ---

def _write_run_record(args, record, csv_header, csv_rows) -> int:
    prefix = _need_out(args)
    write_jsonl(prefix + ".jsonl", run_record_lines(record))
    write_csv(prefix + ".csv", csv_header, csv_rows)
    print(f"-> {prefix}.jsonl, {prefix}.csv "
          f"({record.wall_clock:.1f}s)", file=sys.stderr)
    return 0


def _cmd_stabilize_forest(args) -> int:
    allowed = {"n", "K", "N_grid", "seeds"}
    cfg = _merged_config(args, allowed, ("n", "K", "N_grid", "seeds"))
    rec = stabilization_scan_forest(float(cfg["n"]), int(cfg["K"]),
                                    [int(x) for x in cfg["N_grid"]],
                                    int(cfg["seeds"]), _parse_seed(args.seed),
                                    args.dim, args.step_budget, args.threads)
    rows = [(r["N"], r["N2"], r["fraction"], r["ci_lo"], r["ci_hi"])
            for r in rec.summary["pair_fractions"]]
    return _write_run_record(args, rec,
                             ("N", "N2", "fraction", "ci_lo", "ci_hi"), rows)


def _cmd_stabilize_aggregate(args) -> int:
    allowed = {"n", "M_grid", "seeds"}
    cfg = _merged_config(args, allowed, ("n", "M_grid", "seeds"))
    rec = stabilization_scan_aggregate(float(cfg["n"]),
                                       [int(x) for x in cfg["M_grid"]],
                                       int(cfg["seeds"]),
                                       _parse_seed(args.seed), args.dim,
                                       args.step_budget, args.threads)
    rows = [(r["M"], r["fraction"], r["ci_lo"], r["ci_hi"])
            for r in rec.summary["per_M"]]
    return _write_run_record(args, rec,
                             ("M", "fraction", "ci_lo", "ci_hi"), rows)


def _cmd_cone_scan(args) -> int:
    allowed = {"n", "M_grid", "eps", "alpha", "seeds"}
    cfg = _merged_config(args, allowed, ("n", "M_grid", "eps", "alpha",
                                         "seeds"))
    rec = cone_scan(float(cfg["n"]), [int(x) for x in cfg["M_grid"]],
                    _fraction(cfg["eps"]), _fraction(cfg["alpha"]),
                    int(cfg["seeds"]), _parse_seed(args.seed), args.dim,
                    args.step_budget, args.threads)
    rows = [(r["M"], r["fraction"], r["ci_lo"], r["ci_hi"])
            for r in rec.summary["per_M"]]
    return _write_run_record(args, rec,
                             ("M", "fraction", "ci_lo", "ci_hi"), rows)


def _cmd_strip_scan(args) -> int:
    allowed = {"M", "levels", "walks", "eps", "alpha"}
    cfg = _merged_config(args, allowed, ("M", "levels", "walks", "eps",
                                         "alpha"))
    rec = strip_entry_scan(int(cfg["M"]), [int(x) for x in cfg["levels"]],
                           int(cfg["walks"]), _fraction(cfg["eps"]),
                           _fraction(cfg["alpha"]), _parse_seed(args.seed),
                           args.dim, threads=args.threads)
    rows = [(r["level"], r["reach_fraction"], r["ci_lo"], r["ci_hi"],
             r["censored"], r["donut_count"])
            for r in rec.summary["per_level"]]
    return _write_run_record(args, rec,
                             ("level", "reach_fraction", "ci_lo", "ci_hi",
                              "censored", "donut_count"), rows)


def _cmd_abelian(args) -> int:
    allowed = {"n", "M", "seeds", "window_radius", "negative_control"}
    cfg = _merged_config(args, allowed, ("n", "M", "seeds"))
    rec = abelian_scan(float(cfg["n"]), int(cfg["M"]), int(cfg["seeds"]),
                       _parse_seed(args.seed), args.dim,
                       int(cfg.get("window_radius", 3)),
                       bool(cfg.get("negative_control", False)),
                       args.step_budget, args.threads)
    rows = [(r["site"], r["occupied_time_ordered"],
             r["occupied_level_ordered"]) for r in rec.replicates]
    return _write_run_record(args, rec,
                             ("site", "occupied_time_ordered",
                              "occupied_level_ordered"), rows)


def _cmd_translate_test(args) -> int:
    allowed = {"n", "K", "shifts", "seeds"}
    cfg = _merged_config(args, allowed, ("n", "K", "shifts", "seeds"))
    shifts = [tuple(int(c) for c in s) for s in cfg["shifts"]]
    rec = translation_test(float(cfg["n"]), int(cfg["K"]), shifts,
                           int(cfg["seeds"]), _parse_seed(args.seed),
                           args.dim, args.step_budget, args.threads)
    rows = [(r["shift"], r["tested_sites"], r["adjusted_p"],
             r["count_correlation"]) for r in rec.summary["per_shift"]]
    return _write_run_record(args, rec,
                             ("shift", "tested_sites", "adjusted_p",
                              "count_correlation"), rows)


def _cmd_coverage(args) -> int:
    allowed = {"n_grid", "S", "seeds"}
    cfg = _merged_config(args, allowed, ("n_grid", "S", "seeds"))
    S = [tuple(int(c) for c in s) for s in cfg["S"]]
    rec = coverage_scan([float(x) for x in cfg["n_grid"]], S,
                        int(cfg["seeds"]), _parse_seed(args.seed), args.dim,
                        args.step_budget, args.threads)
    rows = [(r["n"], r["fraction"], r["ci_lo"], r["ci_hi"])
            for r in rec.summary["per_n"]]
    return _write_run_record(args, rec,
                             ("n", "fraction", "ci_lo", "ci_hi"), rows)


# ---------------------------------------------------------------- figures ---

def _cmd_figure(args) -> int:
    if args.style == "forest":
        if not args.input:
            raise ConfigError("--style forest requires --in snapshot")
        state = snapshot.load_snapshot(args.input)
        scene = scene_from_snapshot(state)
    else:
        if args.m2 is None or args.window is None or args.horizon is None:
            raise ConfigError("--style coupling requires -M, --M2 and -n")
        seed = _parse_seed(args.seed)
        ladder, _events = run_natural_coupling(seed, args.window, args.m2,
                                               args.horizon, args.dim,
                                               args.step_budget)
        report = classify_discrepancies(ladder.states[args.window],
                                        ladder.states[args.m2])
        title = (f"windows {args.window}/{args.m2}, n={args.horizon}, "
                 f"seed={seed}")
        scene = scene_from_coupling(ladder.states[args.window],
                                    ladder.states[args.m2], report, title)
    svg = emit_figure(scene)
    path = _need_out(args)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    print(f"figure -> {path}")
    return 0


def _cmd_verify_snapshot(args) -> int:
    snapshot.verify_snapshot(args.path)
    print(f"{args.path}: checksum and replay verified")
    return 0


# ------------------------------------------------------------------ parser ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idlaforest",
        description="Multi-source IDLA forest simulator and analysis suite")
    subs = parser.add_subparsers(dest="command")

    def sub(name, func, help_text):
        p = subs.add_parser(name, help=help_text)
        _common(p)
        p.set_defaults(func=func)
        return p

    p = sub("simulate", _cmd_simulate, "build an aggregate/forest snapshot")
    p.add_argument("-M", "--window", type=int, default=None)
    p.add_argument("-n", "--horizon", type=float, default=None)
    p.add_argument("--count", type=int, default=None,
                   help="particle count for single-source mode")
    p.add_argument("--mode", default=engine.MODE_TIME_ORDERED,
                   choices=(engine.MODE_TIME_ORDERED,
                            engine.MODE_LEVEL_ORDERED,
                            engine.MODE_SINGLE_SOURCE))

    p = sub("forest", _cmd_forest, "export forest vertices/edges as JSONL")
    p.add_argument("--in", dest="input", default=None,
                   help="snapshot to export (otherwise build fresh)")
    p.add_argument("-M", "--window", type=int, default=None)
    p.add_argument("-n", "--horizon", type=float, default=None)

    p = sub("couple", _cmd_couple, "run a natural or special coupling")
    _coupling_args(p)
    p.add_argument("--special", action="store_true",
                   help="use the wake-up coupling with the origin audit")

    p = sub("chains", _cmd_chains, "extract chains of changes")
    _coupling_args(p)

    p = sub("radii", _cmd_radii, "radius records against a frozen aggregate")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("-T", "--horizon", type=float, required=True)
    p.add_argument("--M-ref", dest="m_ref", type=int, required=True)
    p.add_argument("--region", type=int, required=True,
                   help="probe sources within this hyperplane radius")

    p = sub("boolean", _cmd_boolean, "Boolean model and its clusters")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("-T", "--horizon", type=float, required=True)
    p.add_argument("--M-ref", dest="m_ref", type=int, required=True)
    p.add_argument("--region", type=int, required=True)

    sub("pi-scan", _cmd_pi_scan,
        "escape-probability scan (config: eps_grid, M_grid, trials, T)")
    sub("stabilize-forest", _cmd_stabilize_forest,
        "forest stabilization scan (config: n, K, N_grid, seeds)")
    sub("stabilize-aggregate", _cmd_stabilize_aggregate,
        "aggregate stabilization scan (config: n, M_grid, seeds)")
    sub("cone-scan", _cmd_cone_scan,
        "cone containment scan (config: n, M_grid, eps, alpha, seeds)")
    sub("strip-scan", _cmd_strip_scan,
        "free-walk strip entry scan (config: M, levels, walks, eps, alpha)")
    sub("abelian", _cmd_abelian,
        "ordering-invariance test (config: n, M, seeds[, window_radius,"
        " negative_control])")
    sub("translate-test", _cmd_translate_test,
        "translation invariance test (config: n, K, shifts, seeds)")
    sub("coverage", _cmd_coverage,
        "finite-set coverage scan (config: n_grid, S, seeds)")

    p = sub("figure", _cmd_figure, "emit an SVG figure")
    p.add_argument("--style", choices=("forest", "coupling"),
                   default="forest")
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("-M", "--window", type=int, default=None)
    p.add_argument("--M2", dest="m2", type=int, default=None)
    p.add_argument("-n", "--horizon", type=float, default=None)

    p = sub("verify-snapshot", _cmd_verify_snapshot,
            "verify checksum and replay bit-exactness")
    p.add_argument("path")

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args) or 0
    except IdlaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
