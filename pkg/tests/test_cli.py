import json
import subprocess
import sys
from pathlib import Path

import pytest

from sbtree.cli import (RunConfig, fixture_dir, main, minimize_ops, parse_config, random_keys,
                        read_keys, replay_tree_ops, write_keys)
from sbtree.btree import TreeParams


def run_cli(*args):
    return main([str(a) for a in args])


def test_fixtures_present():
    fx = fixture_dir()
    assert (fx / "example.txt").read_bytes() == b"caatcacggtcggac"
    assert (fx / "positions.txt").read_text().split() == [str(i) for i in range(1, 16)]


def test_dump_matches_fixture(tmp_path):
    out = tmp_path / "ssa.csv"
    assert run_cli("dump", "--out", out) == 0
    assert out.read_text() == (fixture_dir() / "expected.csv").read_text()


def test_dump_with_explicit_inputs(tmp_path):
    text = tmp_path / "t.txt"
    text.write_bytes(b"caatcacggtcggac")
    pos = tmp_path / "p.txt"
    pos.write_text("7\n11\n")
    out = tmp_path / "o.csv"
    assert run_cli("dump", "--in", text, "--positions", pos, "--out", out) == 0
    assert out.read_text() == "rank,pos,slcp\n1,11,0\n2,7,3\n"


def test_fixture_dir_override(tmp_path, monkeypatch):
    (tmp_path / "example.txt").write_bytes(b"abab")
    (tmp_path / "positions.txt").write_text("1\n3\n")
    monkeypatch.setenv("SBTREE_FIXTURES", str(tmp_path))
    out = tmp_path / "o.csv"
    assert run_cli("dump", "--out", out) == 0
    assert out.read_text() == "rank,pos,slcp\n1,3,0\n2,1,2\n"


def test_build_empty_key_file(tmp_path):
    keys = tmp_path / "keys.txt"
    keys.write_text("")
    out = tmp_path / "stats.json"
    assert run_cli("build", "--in", keys, "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["n_keys"] == 0
    assert rep["bits_internal"] == 0


def test_build_random_keys_report(tmp_path):
    out = tmp_path / "stats.json"
    assert run_cli("stats", "--random", 5000, "--seed", 3, "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["n_keys"] == 5000
    assert (rep["q"], rep["b"]) == (20, 40)
    assert rep["occupancy_ratio"] >= rep["occupancy_bound"]
    # deterministic under a fixed seed
    out2 = tmp_path / "stats2.json"
    run_cli("stats", "--random", 5000, "--seed", 3, "--out", out2)
    assert out.read_text() == out2.read_text()


def test_build_with_aggregate(tmp_path):
    keys = tmp_path / "keys.txt"
    write_keys(str(keys), [5, 1, 9, 3], "text", 32)
    out = tmp_path / "stats.json"
    assert run_cli("build", "--in", keys, "--aggregate", "sum", "--mode", "batch",
                   "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["root_aggregate"] == 18 and rep["mode"] == "batch"


def test_dump_compressed_keys(tmp_path):
    keys = tmp_path / "keys.bin"
    write_keys(str(keys), [40, 2, 2, 17], "binary", 20)
    out = tmp_path / "keys.out"
    assert run_cli("dump", "--in", keys, "--format", "binary", "--k", 20,
                   "--compressed", "--b", 8, "--out", out) == 0
    assert out.read_text().split() == ["2", "17", "40"]


@pytest.mark.parametrize("k", [8, 20, 32, 64])
def test_key_file_roundtrip(tmp_path, k):
    keys = random_keys(300, k, seed=k)
    assert all(0 <= x < 1 << k for x in keys)
    for fmt in ("text", "binary"):
        path = tmp_path / f"keys.{fmt}"
        write_keys(str(path), keys, fmt, k)
        assert read_keys(str(path), fmt, k) == keys
    assert (tmp_path / "keys.binary").stat().st_size == 300 * ((k + 7) // 8)


def test_bad_inputs_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("12\nxyz\n")
    assert run_cli("build", "--in", bad) == 2
    assert "not an integer" in capsys.readouterr().err
    assert run_cli("build", "--in", tmp_path / "missing.txt") == 2
    odd = tmp_path / "odd.bin"
    odd.write_bytes(b"\x01\x02\x03")
    assert run_cli("build", "--in", odd, "--format", "binary") == 2


def test_run_config_roundtrip():
    cfg = parse_config(["verify", "--t", "5", "--q", "4", "--b", "6", "--compressed", "delta",
                        "--seed", "9", "--sizes", "10", "20"])
    assert cfg.format == "text"
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.params() == TreeParams(t=5, q=4, b=6, compressed="delta")
    assert parse_config(["bench"]).format == "binary"


def test_verify_passes(tmp_path):
    out = tmp_path / "verify.json"
    rc = run_cli("verify", "--ops", 1500, "--t", 4, "--q", 4, "--b", 4, "--k", 16,
                 "--out", out)
    rep = json.loads(out.read_text())
    assert rc == 0, rep
    assert rep["ok"] and set(rep["checks"].values()) == {"ok"}
    assert not out.with_suffix(".repro.json").exists()


@pytest.mark.parametrize("fault,check", [("separator", "tree_oracle"),
                                         ("aggregate", "aggregates_batch")])
def test_verify_reports_injected_fault(tmp_path, fault, check, capsys):
    out = tmp_path / "verify.json"
    rc = run_cli("verify", "--ops", 800, "--t", 4, "--q", 4, "--b", 4, "--k", 16,
                 "--inject-fault", fault, "--out", out)
    assert rc == 1
    repro = json.loads(out.with_suffix(".repro.json").read_text())
    assert repro["check"] == check
    assert repro["violation"]
    assert "violation in" in capsys.readouterr().err
    if fault == "separator":
        assert "separator" in repro["violation"]
        assert 0 < len(repro["ops"]) < 800


def test_minimize_ops_shrinks():
    ops = [("ins", i) for i in range(100)]
    small = minimize_ops(ops, lambda o: ("ins", 37) in o and ("ins", 80) in o)
    assert small == [("ins", 37), ("ins", 80)]


def test_replay_clean_sequence():
    ops = [("ins", x) for x in range(200)] + [("pred", 50), ("del", 3), ("del", 3)]
    assert replay_tree_ops(ops, TreeParams(t=3, q=3, b=3, k=16)) is None


def test_bench_small(tmp_path):
    out = tmp_path / "bench.json"
    assert run_cli("bench", "--sizes", 2000, 4000, "--queries", 500, "--reps", 3,
                   "--aggregate", "min", "--out", out) == 0
    rep = json.loads(out.read_text())
    res = rep["results"]
    assert [r["n"] for r in res] == [2000, 4000]
    for r in res:
        assert r["predecessor_ns_per_op"] > 0
        assert len(r["predecessor_ns_runs"]) == 3
        assert r["leaves_touched_max"] <= r["q"] + 2
        assert r["aggregate"]["fix_visits_max"] <= 2 * r["q"] + 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sbtree.cli", "dump"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[:3] == ["rank,pos,slcp", "1,2,0", "2,14,1"]
