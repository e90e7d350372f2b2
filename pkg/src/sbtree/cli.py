"""Command line front end: build, dump, stats, verify and bench."""

from __future__ import annotations

import argparse
import bisect
import json
import os
import random
import statistics
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .aggregates import AGGREGATES, AggregateBTree
from .btree import BTree, TreeParams
from .suffix import SavlTree, SparseSuffixIndex, brute_force_ssa

FIXTURE_ENV = "SBTREE_FIXTURES"
BENCH_SIZES = (1 << 16, 1 << 18, 1 << 20)


@dataclass
class RunConfig:
    command: str = "build"
    t: int = 16
    q: Optional[int] = None
    b: Optional[int] = None
    k: int = 32
    n0: int = 1 << 20
    aggregate: Optional[str] = None
    mode: str = "merge"
    compressed: Optional[str] = None
    seed: int = 0
    input: Optional[str] = None
    positions: Optional[str] = None
    output: Optional[str] = None
    format: str = "text"
    random: Optional[int] = None
    ops: int = 20000
    sizes: Optional[list] = None
    queries: int = 100000
    reps: int = 3
    inject_fault: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "RunConfig":
        data = json.loads(s)
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def params(self, value_width: Optional[int] = None) -> TreeParams:
        return TreeParams(t=self.t, k=self.k, n0=self.n0, q=self.q, b=self.b,
                          value_width=value_width, compressed=self.compressed)


# -- files --------------------------------------------------------------------------


def fixture_dir() -> Path:
    env = os.environ.get(FIXTURE_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent / "fixtures" / "v1"


def read_keys(path: str, fmt: str, k: int) -> list[int]:
    if fmt == "binary":
        width = (k + 7) // 8
        raw = Path(path).read_bytes()
        if len(raw) % width:
            raise ValueError(f"{path}: size is not a multiple of {width}-byte records")
        if width in (1, 2, 4, 8):
            return np.frombuffer(raw, dtype=f"<u{width}").tolist()
        return [int.from_bytes(raw[i:i + width], "little") for i in range(0, len(raw), width)]
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not an integer: {line!r}") from None
    return out


def write_keys(path: str, keys, fmt: str, k: int) -> None:
    if fmt == "binary":
        width = (k + 7) // 8
        with open(path, "wb") as fh:
            fh.write(b"".join(int(x).to_bytes(width, "little") for x in keys))
    else:
        with open(path, "w") as fh:
            fh.writelines(f"{x}\n" for x in keys)


def random_keys(n: int, k: int, seed: int) -> list[int]:
    rng = np.random.default_rng(seed)
    if k <= 63:
        return rng.integers(0, 1 << k, size=n, dtype=np.uint64).tolist()
    return [int(x) for x in rng.integers(0, 1 << 63, size=n, dtype=np.uint64) * 2
            + rng.integers(0, 2, size=n, dtype=np.uint64)]


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# -- build / stats / dump ---------------------------------------------------------------


def _suffix_inputs(cfg: RunConfig) -> tuple[bytes, list[int]]:
    if cfg.input is None:
        fx = fixture_dir()
        text = (fx / "example.txt").read_bytes()
        pos_path = cfg.positions or str(fx / "positions.txt")
    else:
        text = Path(cfg.input).read_bytes()
        pos_path = cfg.positions
    if pos_path is None:
        positions = list(range(1, len(text) + 1))
    else:
        positions = read_keys(pos_path, "text", 64)
    return text, positions


def build_index(cfg: RunConfig) -> SparseSuffixIndex:
    text, positions = _suffix_inputs(cfg)
    idx = SparseSuffixIndex(text, mode=cfg.mode, t=cfg.t)
    for p in positions:
        idx.insert(p)
    return idx


def build_tree(cfg: RunConfig) -> BTree:
    if cfg.random is not None:
        keys = random_keys(cfg.random, cfg.k, cfg.seed)
    elif cfg.input is not None:
        keys = read_keys(cfg.input, cfg.format, cfg.k)
    else:
        keys = []
    if cfg.aggregate:
        tree = AggregateBTree(cfg.params(value_width=cfg.k), spec=cfg.aggregate, mode=cfg.mode)
        for x in keys:
            tree.insert(x, x)
    else:
        tree = BTree(cfg.params())
        seen = set()
        for x in keys:
            if cfg.compressed:
                if x in seen:
                    continue
                seen.add(x)
            tree.insert(x)
    return tree


def tree_report(tree: BTree, cfg: RunConfig) -> dict:
    rep = tree.stats().as_dict()
    rep.update(t=tree.t, q=tree.q, b=tree.b, k=tree.k, n0=tree.params.n0,
               occupancy_bound=1 - 3 / tree.q,
               counters=dict(sorted(tree.counters.items())))
    if isinstance(tree, AggregateBTree):
        rep["aggregate"] = tree.spec.name
        rep["mode"] = tree.mode
        rep["root_aggregate"] = tree.root_aggregate if tree.n else None
    return rep


def _is_suffix_job(cfg: RunConfig) -> bool:
    return cfg.positions is not None or (cfg.input is None and cfg.random is None)


def cmd_build(cfg: RunConfig) -> int:
    if _is_suffix_job(cfg):
        idx = build_index(cfg)
        rep = tree_report(idx.tree, cfg)
        rep["suffixes"] = len(idx)
    else:
        rep = tree_report(build_tree(cfg), cfg)
    _emit(json.dumps(rep, indent=2, sort_keys=True, default=str) + "\n", cfg.output)
    return 0


cmd_stats = cmd_build


def cmd_dump(cfg: RunConfig) -> int:
    if _is_suffix_job(cfg):
        ssa, slcp = build_index(cfg).dump()
        lines = ["rank,pos,slcp\n"] + [f"{i},{p},{v}\n" for i, (p, v) in
                                       enumerate(zip(ssa, slcp), 1)]
        _emit("".join(lines), cfg.output)
    else:
        _emit("".join(f"{x}\n" for x in build_tree(cfg)), cfg.output)
    return 0


# -- verify ---------------------------------------------------------------------------------


class Violation(Exception):
    pass


def _gen_tree_ops(rng: random.Random, count: int, k: int) -> list:
    ops, live = [], []
    span = 1 << min(k, 20)
    for _ in range(count):
        r = rng.random()
        if r < 0.5 or not live:
            x = rng.randrange(span)
            ops.append(("ins", x))
            live.append(x)
        elif r < 0.8:
            x = live.pop(rng.randrange(len(live)))
            ops.append(("del", x))
        else:
            ops.append(("pred", rng.randrange(span)))
    return ops


def replay_tree_ops(ops, params: TreeParams, fault: Optional[str] = None,
                    full_every: int = 256) -> Optional[tuple[int, str]]:
    """Run ops against the tree and a sorted-list oracle; returns
    ``(index, message)`` of the first violation or None."""
    tree = BTree(params)
    oracle: list[int] = []
    injected = False
    for i, (op, x) in enumerate(ops):
        if op == "ins":
            tree.insert(x)
            bisect.insort(oracle, x)
        elif op == "del":
            j = bisect.bisect_left(oracle, x)
            if j == len(oracle) or oracle[j] != x:
                continue
            oracle.pop(j)
            tree.delete(x)
        else:
            j = bisect.bisect_right(oracle, x)
            want = oracle[j - 1] if j else None
            got = tree.predecessor(x)
            if got != want:
                return i, f"predecessor({x}) returned {got}, oracle {want}"
        full = (i + 1) % full_every == 0
        if fault == "separator" and not injected and not tree.root.is_leaf:
            tree.root.seps[0] += 1
            injected = full = True
        rep = tree.check_invariants(local=not full)
        if not rep.ok:
            return i, rep.first
    rep = tree.check_invariants()
    if not rep.ok:
        return len(ops) - 1, rep.first
    if tree.keys() != oracle:
        return len(ops) - 1, "in-order keys differ from oracle"
    return None


def minimize_ops(ops: list, fails, budget: int = 200) -> list:
    """Greedy chunk removal keeping ``fails(ops)`` true."""
    cur = list(ops)
    chunk = max(1, len(cur) // 2)
    tries = 0
    while chunk >= 1 and tries < budget:
        i = 0
        changed = False
        while i < len(cur) and tries < budget:
            cand = cur[:i] + cur[i + chunk:]
            tries += 1
            if cand and fails(cand):
                cur = cand
                changed = True
            else:
                i += chunk
        if not changed:
            chunk //= 2
    return cur


def _check_compressed(cfg: RunConfig, rng: random.Random, count: int) -> Optional[str]:
    plain = BTree(TreeParams(t=cfg.t, k=cfg.k, n0=cfg.n0, q=cfg.q, b=cfg.b))
    packed = BTree(TreeParams(t=cfg.t, k=cfg.k, n0=cfg.n0, q=cfg.q, b=cfg.b,
                              compressed=cfg.compressed or "gamma"))
    live: list[int] = []
    present = set()
    for i in range(count):
        if rng.random() < 0.6 or not live:
            x = rng.randrange(1 << cfg.k)
            if x in present:
                continue
            present.add(x)
            live.append(x)
            plain.insert(x)
            packed.insert(x)
        else:
            x = live.pop(rng.randrange(len(live)))
            present.discard(x)
            plain.delete(x)
            packed.delete(x)
        y = rng.randrange(1 << cfg.k)
        if plain.predecessor(y) != packed.predecessor(y):
            return f"op {i}: predecessor({y}) differs between leaf encodings"
    if plain.keys() != packed.keys():
        return "key sequences differ between leaf encodings"
    rep = packed.check_invariants()
    return None if rep.ok else rep.first


def _check_aggregates(cfg: RunConfig, rng: random.Random, count: int, mode: str,
                      fault: Optional[str]) -> Optional[str]:
    for name in ("min", "sum"):
        tree = AggregateBTree(TreeParams(t=cfg.t, k=cfg.k, n0=cfg.n0, q=cfg.q, b=cfg.b,
                                         value_width=16), spec=name, mode=mode)
        tree.inject_fault = fault == "aggregate"
        spec = tree.spec
        data: dict[int, int] = {}
        for i in range(count):
            r = rng.random()
            if r < 0.45 or not data:
                x = rng.randrange(1 << cfg.k)
                if x in data:
                    continue
                data[x] = rng.randrange(1 << 16)
                tree.insert(x, data[x])
            elif r < 0.7:
                x = rng.choice(list(data)) if len(data) < 64 else next(iter(data))
                del data[x]
                tree.delete(x)
            elif r < 0.8:
                x = next(iter(data))
                data[x] = rng.randrange(1 << 16)
                tree.update_value(x, data[x])
            else:
                lo, hi = sorted(rng.randrange(1 << cfg.k) for _ in range(2))
                want = spec.eval([v for key, v in sorted(data.items()) if lo <= key <= hi])
                got = tree.range_aggregate(lo, hi)
                if got != want:
                    return f"{name}/{mode} op {i}: range [{lo},{hi}] gave {got}, expected {want}"
            rep = tree.check_invariants(local=True)
            if not rep.ok:
                return f"{name}/{mode} op {i}: {rep.first}"
            if i % 100 == 0 and tree.root_aggregate != spec.eval(list(
                    v for _, v in sorted(data.items()))):
                return f"{name}/{mode} op {i}: root aggregate differs from full evaluation"
        rep = tree.check_invariants()
        if not rep.ok:
            return f"{name}/{mode}: {rep.first}"
    return None


def _check_suffix(rng: random.Random, trials: int) -> Optional[str]:
    for trial in range(trials):
        n = rng.randrange(1, 200)
        text = bytes(rng.choice(b"acgt") for _ in range(n))
        idx = SparseSuffixIndex(text)
        present: list[int] = []
        for _ in range(2 * n):
            if rng.random() < 0.65 or not present:
                p = rng.randrange(1, n + 1)
                if p in present:
                    continue
                idx.insert(p)
                present.append(p)
            else:
                p = present.pop(rng.randrange(len(present)))
                idx.delete(p)
        problems = idx.check()
        if problems:
            return f"suffix trial {trial}: {problems[0]}"
        savl = SavlTree(text)
        for p in present:
            savl.insert(p)
        ssa, slcp = brute_force_ssa(text, present)
        if savl.ssa() != ssa or savl.slcp() != slcp:
            return f"suffix trial {trial}: tree walk disagrees with direct sorting"
        if savl.visits > 3 * len(present):
            return f"suffix trial {trial}: {savl.visits} visits for {len(present)} nodes"
    return None


def cmd_verify(cfg: RunConfig) -> int:
    rng = random.Random(cfg.seed)
    params = cfg.params()
    report: dict = {"seed": cfg.seed, "ops": cfg.ops, "checks": {}}
    failed = None

    ops = _gen_tree_ops(rng, cfg.ops, cfg.k)
    res = replay_tree_ops(ops, params, cfg.inject_fault)
    report["checks"]["tree_oracle"] = res[1] if res else "ok"
    if res:
        prefix = ops[:res[0] + 1]
        small = minimize_ops(prefix, lambda o: replay_tree_ops(
            o, params, cfg.inject_fault, full_every=1) is not None)
        failed = {"check": "tree_oracle", "violation": res[1],
                  "config": json.loads(cfg.to_json()), "ops": small}

    checks = [
        ("compressed_differential",
         lambda: _check_compressed(cfg, rng, min(cfg.ops, 10000))),
        ("aggregates_batch",
         lambda: _check_aggregates(cfg, rng, min(cfg.ops, 5000), "batch", cfg.inject_fault)),
        ("aggregates_merge",
         lambda: _check_aggregates(cfg, rng, min(cfg.ops, 5000), "merge", cfg.inject_fault)),
        ("suffix_cross_check", lambda: _check_suffix(rng, 20)),
    ]
    for name, run in checks:
        msg = run()
        report["checks"][name] = msg or "ok"
        if msg and failed is None:
            failed = {"check": name, "violation": msg,
                      "config": json.loads(cfg.to_json())}
    report["ok"] = failed is None
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", cfg.output)
    if failed is not None:
        repro = Path(cfg.output).with_suffix(".repro.json") if cfg.output \
            else Path("verify_repro.json")
        repro.write_text(json.dumps(failed, indent=1) + "\n")
        print(f"violation in {failed['check']}: {failed['violation']} "
              f"(repro written to {repro})", file=sys.stderr)
        return 1
    return 0


# -- bench ------------------------------------------------------------------------------------


def bench_size(n: int, cfg: RunConfig, keys: Optional[list] = None) -> dict:
    if keys is None:
        keys = random_keys(n, cfg.k, cfg.seed + n)
    rng = np.random.default_rng(cfg.seed)
    queries = rng.integers(0, 1 << min(cfg.k, 63), size=cfg.queries, dtype=np.uint64).tolist()
    tree = BTree(cfg.params())
    t0 = time.perf_counter()
    for x in keys:
        tree.insert(x)
    insert_ns = (time.perf_counter() - t0) / max(1, n) * 1e9
    ins_counters = dict(tree.counters)
    pred_runs = []
    for _ in range(cfg.reps):
        t0 = time.perf_counter()
        for y in queries:
            tree.predecessor(y)
        pred_runs.append((time.perf_counter() - t0) / max(1, len(queries)) * 1e9)
    victims = keys[: min(len(keys), 10000)]
    tree.counters.clear()
    t0 = time.perf_counter()
    for x in victims:
        tree.delete(x)
    delete_ns = (time.perf_counter() - t0) / max(1, len(victims)) * 1e9
    out = {
        "n": n,
        "insert_ns_per_op": round(insert_ns, 1),
        "predecessor_ns_per_op": round(statistics.median(pred_runs), 1),
        "predecessor_ns_runs": [round(x, 1) for x in pred_runs],
        "delete_ns_per_op": round(delete_ns, 1),
        "leaves_touched_max": max(ins_counters.get("leaves_touched_max", 0),
                                  tree.counters.get("leaves_touched_max", 0)),
        "leaves_touched_mean_insert": round(ins_counters.get("leaves_touched", 0) / max(1, n), 3),
        "rotations_insert": ins_counters.get("rotations", 0),
        "splits": ins_counters.get("splits", 0),
        "q": tree.q,
        "b": tree.b,
    }
    if cfg.aggregate:
        m = min(n, 1 << 16)
        agg = AggregateBTree(cfg.params(value_width=cfg.k), spec=cfg.aggregate, mode=cfg.mode)
        t0 = time.perf_counter()
        for x in keys[:m]:
            agg.insert(x, x)
        for x in keys[: m // 4]:
            agg.delete(x)
        ops = m + m // 4
        out["aggregate"] = {
            "ops": ops,
            "ns_per_op": round((time.perf_counter() - t0) / ops * 1e9, 1),
            "block_evals_per_op": round(agg.counters["block_evals"] / ops, 3),
            "block_evals_max_per_op": agg.counters["op_evals_max"],
            "fix_visits_max": max(agg.fix_visits, default=0),
        }
    return out


def cmd_bench(cfg: RunConfig) -> int:
    sizes = cfg.sizes or list(BENCH_SIZES)
    if cfg.input is not None:
        keys = read_keys(cfg.input, cfg.format, cfg.k)
        results = [bench_size(len(keys), cfg, keys)]
    else:
        results = [bench_size(n, cfg) for n in sizes]
    report = {"config": json.loads(cfg.to_json()), "results": results}
    _emit(json.dumps(report, indent=2) + "\n", cfg.output)
    return 0


# -- entry point ---------------------------------------------------------------------------------


COMMANDS = {"build": cmd_build, "stats": cmd_stats, "dump": cmd_dump,
            "verify": cmd_verify, "bench": cmd_bench}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbtree", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--t", type=int, default=16, help="internal node degree")
    ap.add_argument("--q", type=int, default=None, help="sibling window (default from --n0)")
    ap.add_argument("--b", type=int, default=None, help="leaf capacity (default from --n0)")
    ap.add_argument("--k", type=int, default=32, help="key width in bits")
    ap.add_argument("--n0", type=int, default=1 << 20, help="capacity hint")
    ap.add_argument("--aggregate", choices=sorted(AGGREGATES), default=None)
    ap.add_argument("--mode", choices=["batch", "merge"], default="merge")
    ap.add_argument("--compressed", nargs="?", const="gamma", choices=["gamma", "delta"],
                    default=None, help="difference-coded leaves")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--in", dest="input", default=None,
                    help="key file, or raw text when --positions is given")
    ap.add_argument("--positions", default=None, help="suffix starts, one per line")
    ap.add_argument("--out", dest="output", default=None)
    ap.add_argument("--format", choices=["text", "binary"], default=None,
                    help="key file format (bench defaults to binary)")
    ap.add_argument("--random", type=int, default=None, metavar="N",
                    help="use N seeded random keys instead of a file")
    ap.add_argument("--ops", type=int, default=20000, help="verify: operations per check")
    ap.add_argument("--sizes", type=int, nargs="+", default=None, help="bench: key counts")
    ap.add_argument("--queries", type=int, default=100000)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--inject-fault", choices=["separator", "aggregate"], default=None,
                    help="corrupt the structure on purpose (verify self-test)")
    return ap


def parse_config(argv=None) -> RunConfig:
    ns = make_parser().parse_args(argv)
    data = vars(ns)
    if data["format"] is None:
        data["format"] = "binary" if data["command"] == "bench" else "text"
    return RunConfig(**data)


def main(argv=None) -> int:
    cfg = parse_config(argv)
    try:
        return COMMANDS[cfg.command](cfg)
    except (OSError, ValueError) as exc:
        print(f"sbtree {cfg.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
