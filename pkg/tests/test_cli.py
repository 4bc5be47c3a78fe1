import json

from idlaforest.cli import run_cli
from idlaforest.snapshot import load_snapshot


def _lines(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh]


def test_simulate_writes_snapshot(tmp_path):
    out = tmp_path / "s.snap"
    rc = run_cli(["simulate", "--dim", "2", "-M", "20", "-n", "30",
                  "--seed", "7", "--out", str(out)])
    assert rc == 0
    assert out.exists()
    state = load_snapshot(str(out))
    assert state.config["M"] == "20"
    assert len(state.sites) > 0


def test_simulate_hex_seed(tmp_path):
    out = tmp_path / "s.snap"
    rc = run_cli(["simulate", "-M", "2", "-n", "1", "--seed", "0x10",
                  "--out", str(out)])
    assert rc == 0
    assert load_snapshot(str(out)).config["seed"] == "16"


def test_unknown_flag_exits_2(capsys):
    rc = run_cli(["simulate", "--frobnicate"])
    assert rc == 2
    assert "usage" in capsys.readouterr().err


def test_no_subcommand_exits_2():
    assert run_cli([]) == 2


def test_verify_snapshot_roundtrip_and_tamper(tmp_path):
    out = tmp_path / "s.snap"
    assert run_cli(["simulate", "-M", "5", "-n", "3", "--seed", "2",
                    "--out", str(out)]) == 0
    assert run_cli(["verify-snapshot", str(out)]) == 0
    data = bytearray(out.read_bytes())
    data[25] ^= 0xFF
    bad = tmp_path / "t.snap"
    bad.write_bytes(bytes(data))
    assert run_cli(["verify-snapshot", str(bad)]) == 1


def test_missing_out_is_checked_error(tmp_path):
    assert run_cli(["couple", "-M", "2", "--M2", "4", "-n", "1",
                    "--seed", "3"]) == 1


def test_couple_and_chains_jsonl(tmp_path):
    out = tmp_path / "ev.jsonl"
    rc = run_cli(["couple", "-M", "2", "--M2", "5", "-n", "2", "--seed", "9",
                  "--out", str(out)])
    assert rc == 0
    recs = _lines(out)
    assert recs[-1]["kind"] == "summary"
    assert all(r["schema_version"] == 1 for r in recs)
    assert all(r["config"]["M"] == 2 for r in recs)
    chains_out = tmp_path / "ch.jsonl"
    rc = run_cli(["chains", "-M", "2", "--M2", "5", "-n", "2", "--seed", "9",
                  "--out", str(chains_out)])
    assert rc == 0
    for rec in _lines(chains_out):
        assert rec["kind"] == "chain"
        assert rec["valid"] is True


def test_special_coupling_cli(tmp_path):
    out = tmp_path / "sp.jsonl"
    rc = run_cli(["couple", "-M", "2", "--M2", "5", "-n", "2", "--seed", "9",
                  "--special", "--out", str(out)])
    assert rc == 0
    summary = _lines(out)[-1]
    assert summary["outer_origin_ok"] is True


def test_radii_and_boolean(tmp_path):
    out = tmp_path / "r.jsonl"
    rc = run_cli(["radii", "--eps", "0.5", "-T", "1.0", "--M-ref", "16",
                  "--region", "4", "--seed", "5", "--out", str(out)])
    assert rc == 0
    for rec in _lines(out):
        assert rec["kind"] == "radius"
        assert rec["proxy_ok"] is True
    bout = tmp_path / "b.jsonl"
    rc = run_cli(["boolean", "--eps", "0.5", "-T", "1.0", "--M-ref", "16",
                  "--region", "4", "--seed", "5", "--out", str(bout)])
    assert rc == 0
    recs = _lines(bout)
    assert recs[0]["kind"] == "model"


def test_pi_scan_csv(tmp_path):
    cfg = tmp_path / "scan.cfg"
    cfg.write_text("eps_grid = [0.001]\nM_grid = [2]\ntrials = 10\nT = 1.0\n")
    out = tmp_path / "pi.csv"
    rc = run_cli(["pi-scan", "--config", str(cfg), "--seed", "4",
                  "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "epsilon,M,trials,pi_hat,ci_lo,ci_hi,bound"
    assert len(lines) == 2


def test_config_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "scan.cfg"
    cfg.write_text("eps_grid = [0.001]\nM_grid = [2]\nbogus = 1\n")
    rc = run_cli(["pi-scan", "--config", str(cfg), "--out",
                  str(tmp_path / "x.csv")])
    assert rc == 1


def test_experiment_cli_roundtrip(tmp_path):
    cfg = tmp_path / "ab.cfg"
    cfg.write_text("n = 1.0\nM = 1\nseeds = 50\n")
    prefix = tmp_path / "ab"
    rc = run_cli(["abelian", "--config", str(cfg), "--seed", "8",
                  "--out", str(prefix)])
    assert rc == 0
    assert (tmp_path / "ab.jsonl").exists()
    assert (tmp_path / "ab.csv").exists()
    summary = _lines(tmp_path / "ab.jsonl")[-1]
    assert summary["kind"] == "summary"
    assert "adjusted_p" in summary


def test_figure_cli(tmp_path):
    snap = tmp_path / "s.snap"
    run_cli(["simulate", "-M", "3", "-n", "2", "--seed", "1", "--out",
             str(snap)])
    svg = tmp_path / "f.svg"
    rc = run_cli(["figure", "--style", "forest", "--in", str(snap),
                  "--out", str(svg)])
    assert rc == 0
    assert svg.read_text().startswith("<?xml")
    svg2 = tmp_path / "g.svg"
    rc = run_cli(["figure", "--style", "coupling", "-M", "2", "--M2", "4",
                  "-n", "1.5", "--seed", "3", "--out", str(svg2)])
    assert rc == 0


def test_output_determinism_across_thread_counts(tmp_path):
    cfg = tmp_path / "cov.cfg"
    cfg.write_text("n_grid = [0.5, 1.0]\nS = [[0, 0]]\nseeds = 12\n")
    outs = []
    for threads, name in ((1, "a"), (3, "b")):
        prefix = tmp_path / name
        rc = run_cli(["coverage", "--config", str(cfg), "--seed", "6",
                      "--threads", str(threads), "--out", str(prefix)])
        assert rc == 0
        outs.append(((tmp_path / f"{name}.jsonl").read_bytes(),
                     (tmp_path / f"{name}.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_forest_export(tmp_path):
    out = tmp_path / "f.jsonl"
    rc = run_cli(["forest", "-M", "2", "-n", "1.5", "--seed", "2",
                  "--out", str(out)])
    assert rc == 0
    recs = _lines(out)
    assert all(r["kind"] == "vertex" for r in recs)
    roots = [r for r in recs if r["root"]]
    assert roots and all(r["parent"] is None for r in roots)


def test_forest_export_from_snapshot(tmp_path):
    snap = tmp_path / "s.snap"
    run_cli(["simulate", "-M", "2", "-n", "1.5", "--seed", "2", "--out",
             str(snap)])
    direct = tmp_path / "direct.jsonl"
    via_snap = tmp_path / "snap.jsonl"
    assert run_cli(["forest", "-M", "2", "-n", "1.5", "--seed", "2",
                    "--out", str(direct)]) == 0
    assert run_cli(["forest", "--in", str(snap), "--out",
                    str(via_snap)]) == 0
    assert direct.read_bytes() == via_snap.read_bytes()


def test_simulate_modes_verify(tmp_path):
    for mode, extra in (("level-ordered", ["-M", "2", "-n", "1.5"]),
                        ("single-source", ["--count", "80"])):
        snap = tmp_path / f"{mode}.snap"
        assert run_cli(["simulate", "--mode", mode, "--seed", "4",
                        *extra, "--out", str(snap)]) == 0
        assert run_cli(["verify-snapshot", str(snap)]) == 0
