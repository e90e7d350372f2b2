"""Range aggregates over the load-balanced tree.

Each leaf owns a *block*: a contiguous range of global positions described
by ``(off, size, agg)``.  The block starts ``off`` positions after the leaf's
first key (``off`` may be negative) and holds ``size`` positions whose
aggregate is ``agg``.  Blocks of consecutive leaves tile ``[0, n)`` in order.

Rotations only move leaf boundaries, so they are absorbed by adjusting one
offset instead of re-evaluating blocks.  Offsets drift; two strategies keep
every block within a constant number of leaves of its owner:

``batch``
    on a leaf split (or whenever a block goes out of bounds) the blocks of
    the split leaf, the new leaf and the ``q`` nearest leaves are reset to
    coincide with their leaves.

``merge``
    an out-of-bounds block is fixed by merging two adjacent blocks at one
    point, emptying a block elsewhere and shifting the blocks in between
    by one leaf.  Only cached aggregates are combined, no block is
    re-evaluated.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

from .btree import BTree, InvariantReport, Leaf, TreeParams
from .packed import Comparator


@dataclass(frozen=True)
class AggregateSpec:
    """An associative merge with identity, and a batch evaluator."""

    name: str
    identity: Any
    merge: Callable[[Any, Any], Any]
    eval_fn: Callable[[Sequence], Any]

    def eval(self, values: Sequence):
        return self.eval_fn(values) if len(values) else self.identity


SUM = AggregateSpec("sum", 0, operator.add, sum)
MIN = AggregateSpec("min", math.inf, min, min)
MAX = AggregateSpec("max", -math.inf, max, max)
AGGREGATES = {a.name: a for a in (SUM, MIN, MAX)}


class AggregateBTree(BTree):
    """B+ tree whose nodes cache an aggregate over satellite values.

    ``range_aggregate(lo, hi)`` combines the values of all keys in
    ``[lo, hi]``.
    """

    def __init__(self, params: Optional[TreeParams] = None,
                 spec: AggregateSpec | str = MIN, mode: str = "merge",
                 cmp: Optional[Comparator] = None, **kw):
        if params is None:
            kw.setdefault("value_width", kw.get("k", 32))
            params = TreeParams(**kw)
        elif kw:
            raise TypeError("pass either params or keyword overrides")
        if params.value_width is None:
            raise ValueError("aggregate tree needs value_width")
        if mode not in ("batch", "merge"):
            raise ValueError("mode must be 'batch' or 'merge'")
        self.spec = AGGREGATES[spec] if isinstance(spec, str) else spec
        self.mode = mode
        super().__init__(params, cmp)
        self.root.agg = self.spec.identity
        self._block_dirty: dict = {}
        self._pending_split: Optional[tuple[Leaf, Leaf]] = None
        self.fix_visits: list[int] = []
        self.rebalance_gaps: list[int] = []
        self._last_reset: dict = {}
        self._op_evals = 0
        self.inject_fault = False

    # -- helpers ------------------------------------------------------------

    def _mark(self, leaf: Leaf) -> None:
        self._block_dirty[leaf] = None
        self._dirty.add(leaf)

    def _eval(self, vals):
        self.counters["block_evals"] += 1
        self._op_evals += 1
        return self.spec.eval(vals)

    def _collect(self, leaf: Leaf, rel: int, count: int) -> list:
        """Values at positions ``[rel, rel+count)`` counted from the first
        key of ``leaf``."""
        out: list = []
        x = leaf
        while rel < 0:
            x = x.prev
            rel += len(x.keys)
        while count:
            while rel >= len(x.keys):
                rel -= len(x.keys)
                x = x.next
            take = min(count, len(x.keys) - rel)
            out.extend(x.values.slice(rel, take))
            count -= take
            rel = 0
            x = x.next
        return out

    def _block_values(self, leaf: Leaf) -> list:
        return self._collect(leaf, leaf.off, leaf.size)

    def _reeval(self, leaf: Leaf) -> None:
        leaf.agg = self._eval(self._block_values(leaf))
        self._mark(leaf)

    def _block_at(self, leaf: Leaf, pos: int) -> tuple[Leaf, int]:
        """Owner of the non-empty block holding relative position ``pos``,
        and the signed number of leaves walked from ``leaf``."""
        x, base, steps = leaf, 0, 0
        while True:
            st = base + x.off
            if pos < st:
                x = x.prev
                base -= len(x.keys)
                steps -= 1
            elif pos >= st + x.size:
                base += len(x.keys)
                x = x.next
                steps += 1
            else:
                return x, steps

    def _shift_offsets(self, leaf: Leaf, steps: int, delta: int) -> None:
        # a position was added/removed in ``leaf`` but accounted to a block
        # ``steps`` leaves away; the boundaries in between move by ``delta``
        if steps < 0:
            x = leaf
            for _ in range(-steps):
                x.off += delta
                self._mark(x)
                x = x.prev
        else:
            x = leaf
            for _ in range(steps):
                x = x.next
                x.off -= delta
                self._mark(x)

    def block_valid(self, leaf: Leaf) -> bool:
        b = self.b
        return (leaf.size <= 2 * b and -b < leaf.off < b
                and leaf.off + leaf.size <= 2 * b)

    def _valid(self, s_leaf: int, start: int, end: int) -> bool:
        b = self.b
        off = start - s_leaf
        size = end - start
        return size <= 2 * b and -b < off < b and off + size <= 2 * b

    # -- event hooks ------------------------------------------------------------

    def _ev_pre_insert(self, leaf: Leaf, rank: int):
        if leaf.off <= rank <= leaf.off + leaf.size:
            return leaf, 0
        if leaf.next is None and rank == len(leaf.keys):
            return self._block_at(leaf, rank - 1)
        return self._block_at(leaf, rank)

    def _ev_insert(self, leaf: Leaf, rank: int, value, ctx) -> None:
        owner, steps = ctx
        owner.size += 1
        owner.agg = self.spec.merge(owner.agg, value)
        self.counters["agg_merges"] += 1
        self._mark(owner)
        self._shift_offsets(leaf, steps, 1)

    def _ev_pre_delete(self, leaf: Leaf, rank: int):
        return self._block_at(leaf, rank)

    def _ev_post_delete(self, leaf: Leaf, rank: int, ctx) -> None:
        owner, steps = ctx
        owner.size -= 1
        self._shift_offsets(leaf, steps, -1)
        self._reeval(owner)

    def _ev_shift_right(self, left: Leaf) -> None:
        left.next.off += 1
        self._mark(left.next)

    def _ev_shift_left(self, left: Leaf) -> None:
        left.next.off -= 1
        self._mark(left.next)

    def _ev_leaf_removed(self, leaf: Leaf) -> None:
        spec = self.spec
        if leaf.prev is not None:
            p = leaf.prev
            p.size += leaf.size
            p.agg = spec.merge(p.agg, leaf.agg)
            self._mark(p)
        else:
            nx = leaf.next
            nx.off = leaf.off
            nx.size += leaf.size
            nx.agg = spec.merge(leaf.agg, nx.agg)
            self._mark(nx)
        self._block_dirty.pop(leaf, None)

    def _ev_split(self, leaf: Leaf, new: Leaf) -> None:
        new.off = leaf.off + leaf.size - len(leaf.keys)
        new.size = 0
        new.agg = self.spec.identity
        self._mark(new)
        self._mark(leaf)
        self._pending_split = (leaf, new)

    def _refresh_extra(self, node) -> None:
        if node.is_leaf:
            return
        ch = node.children
        merge = self.spec.merge
        acc = ch[0].agg
        for c in ch[1:]:
            acc = merge(acc, c.agg)
        node.agg = acc
        first = ch[0]
        node.lead_off = first.off if first.is_leaf else first.lead_off

    def _ev_after_op(self) -> None:
        split = self._pending_split
        self._pending_split = None
        if split is not None and self.mode == "batch":
            self.batch_rebalance(split[0], split[1])
        guard = 0
        while self._block_dirty:
            leaf = next(iter(self._block_dirty))
            del self._block_dirty[leaf]
            if not self._alive(leaf) or self.block_valid(leaf):
                continue
            guard += 1
            if guard > 4 * self.q + 8:
                raise RuntimeError("block maintenance did not converge")
            if self.mode == "batch":
                self.batch_rebalance(leaf)
            else:
                self.fix_invalid_block(leaf)
        self.counters["op_evals_max"] = max(self.counters["op_evals_max"], self._op_evals)
        self._op_evals = 0

    def _commit(self) -> None:
        super()._commit()
        # deliberate corruption of the root aggregate, for exercising verify
        if self.inject_fault and self.n:
            self.root.agg = (self.root.agg + 1 if self.spec is SUM
                             else self.spec.merge(self.root.agg, -1))

    # -- resets -------------------------------------------------------------------

    def _reset_blocks(self, group: list[Leaf]) -> list[Leaf]:
        """Make the blocks of a contiguous run of leaves coincide with the
        leaves; the neighbouring blocks absorb the difference.

        The run is widened while a neighbour would end up with a negative
        size.  Returns the final run.
        """
        group = list(group)
        # positions relative to the first leaf of the run
        first = group[0]
        a = first.prev
        while a is not None and -len(a.keys) + a.off > 0:
            group.insert(0, a)
            a = a.prev
        last = group[-1]
        z = last.next
        while z is not None:
            s_next = len(z.keys)
            end_z = s_next + z.next.off if z.next is not None else len(z.keys)
            if end_z < 0:
                group.append(z)
                z = z.next
                continue
            break
        for x in group:
            x.off = 0
            x.size = len(x.keys)
            self._reeval(x)
        if a is not None:
            a.size = len(a.keys) - a.off
            self._reeval(a)
        if z is not None:
            end_z = len(z.keys) + (z.next.off if z.next is not None else 0)
            z.off = 0
            z.size = end_z
            self._reeval(z)
        return group

    def _nearest_run(self, seed: list[Leaf], extra: int) -> list[Leaf]:
        """``seed`` widened by the ``extra`` nearest leaves, alternating
        right then left."""
        run = list(seed)
        r, l = run[-1].next, run[0].prev
        while extra and (r is not None or l is not None):
            if r is not None:
                run.append(r)
                r = r.next
                extra -= 1
                if not extra:
                    break
            if l is not None:
                run.insert(0, l)
                l = l.prev
                extra -= 1
        return run

    def batch_rebalance(self, leaf: Leaf, new: Optional[Leaf] = None) -> list[Leaf]:
        seed = [leaf, new] if new is not None else [leaf]
        group = self._reset_blocks(self._nearest_run(seed, self.q))
        clock = self.counters["inserts"]
        last = self._last_reset.get(leaf)
        if last is not None:
            self.rebalance_gaps.append(clock - last)
        for x in group:
            self._last_reset[x] = clock
        self.counters["rebalances"] += 1
        return group

    def fix_invalid_block(self, leaf: Leaf) -> bool:
        """Repair the out-of-bounds block of ``leaf`` by one merge, one
        emptied block and unit shifts in between, looking at most ``q``
        leaves to each side.  Returns False when a local reset was needed."""
        q = self.q
        self.counters["fix_invocations"] += 1
        win = [leaf]
        x = leaf
        for _ in range(q):
            if x.prev is None:
                break
            x = x.prev
            win.insert(0, x)
        ix = len(win) - 1
        x = leaf
        for _ in range(q):
            if x.next is None:
                break
            x = x.next
            win.append(x)
        self.fix_visits.append(len(win))
        m = len(win)
        # leaf starts and block ranges relative to the window's first leaf
        S = [0] * m
        for i in range(1, m):
            S[i] = S[i - 1] + len(win[i - 1].keys)
        st = [S[i] + win[i].off for i in range(m)]
        en = [st[i] + win[i].size for i in range(m)]
        V = self._valid
        ok_shl = [i + 1 < m and V(S[i], st[i + 1], en[i + 1]) for i in range(m)]
        ok_shr = [i > 0 and V(S[i], st[i - 1], en[i - 1]) for i in range(m)]
        ok_mgr = [i + 1 < m and V(S[i], st[i], en[i + 1]) for i in range(m)]
        ok_mgl = [i > 0 and V(S[i], st[i - 1], en[i]) for i in range(m)]
        ok_eend = [V(S[i], en[i], en[i]) for i in range(m)]
        ok_estart = [V(S[i], st[i], st[i]) for i in range(m)]
        # prefix counts of failures for O(1) run checks
        bad_shl = [0]
        bad_shr = [0]
        for i in range(m):
            bad_shl.append(bad_shl[-1] + (not ok_shl[i]))
            bad_shr.append(bad_shr[-1] + (not ok_shr[i]))
        choice = None
        for span in range(1, m):
            for lo in range(max(0, ix - span), min(ix, m - 1 - span) + 1):
                hi = lo + span
                # merge at lo, empty at hi, blocks between take their right neighbour's range
                if ok_mgr[lo] and ok_eend[hi] and bad_shl[hi] - bad_shl[lo + 1] == 0:
                    choice = ("merge_left", lo, hi)
                    break
                # empty at lo, merge at hi, blocks between take their left neighbour's range
                if ok_estart[lo] and ok_mgl[hi] and bad_shr[hi] - bad_shr[lo + 1] == 0:
                    choice = ("merge_right", lo, hi)
                    break
            if choice is not None:
                break
        if choice is None:
            self.counters["fix_fallbacks"] += 1
            self._reset_blocks([leaf])
            return False
        kind, lo, hi = choice
        merge = self.spec.merge
        old = [(st[i], en[i], win[i].agg) for i in range(m)]
        ident = self.spec.identity
        if kind == "merge_left":
            plan = [(old[lo][0], old[lo + 1][1], merge(old[lo][2], old[lo + 1][2]))]
            plan += [old[i + 1] for i in range(lo + 1, hi)]
            plan.append((old[hi][1], old[hi][1], ident))
        else:
            plan = [(old[lo][0], old[lo][0], ident)]
            plan += [old[i - 1] for i in range(lo + 1, hi)]
            plan.append((old[hi - 1][0], old[hi][1], merge(old[hi - 1][2], old[hi][2])))
        for i, (s, e, agg) in zip(range(lo, hi + 1), plan):
            node = win[i]
            node.off = s - S[i]
            node.size = e - s
            node.agg = agg
            self._dirty.add(node)
        self.counters["agg_merges"] += 1
        self.counters["fix_success"] += 1
        return True

    # -- updates --------------------------------------------------------------------

    def insert(self, key, value=None) -> None:
        if value is None:
            raise ValueError("aggregate tree needs a value")
        self.counters["inserts"] += 1
        super().insert(key, value)

    insert_with_value = insert

    def delete_with_value(self, key) -> Any:
        value = self.access_key(key)
        self.delete(key)
        return value

    def update_value(self, key, value) -> None:
        """Replace the value of (the last occurrence of) ``key``."""
        leaf, r = self._find(key)
        if not r or not self._eq(key, leaf.keys.get(r - 1)):
            raise KeyError(key)
        vw = self.params.value_width
        if not 0 <= value < (1 << vw):
            raise ValueError(f"value {value} does not fit in {vw} bits")
        self._begin()
        leaf.values.set(r - 1, value)
        owner, _ = self._block_at(leaf, r - 1)
        self._reeval(owner)
        self._commit()

    set_value = update_value

    # -- queries --------------------------------------------------------------------

    @property
    def root_aggregate(self):
        return self.root.agg

    def access_node(self, node) -> Any:
        return node.agg

    def range_aggregate_ranks(self, a: int, c: int):
        """Aggregate of the values at global positions ``[a, c)``."""
        a = max(a, 0)
        c = min(c, self.n)
        if a >= c:
            return self.spec.identity
        return self._range(self.root, 0, 0, self.n, a, c)

    def _range(self, node, s_node, lo, hi, a, c):
        ident = self.spec.identity
        if hi <= a or lo >= c or lo >= hi:
            return ident
        if a <= lo and hi <= c:
            return node.agg
        if node.is_leaf:
            p, e = max(lo, a), min(hi, c)
            return self._eval(self._collect(node, p - s_node, e - p))
        merge = self.spec.merge
        acc = ident
        ch = node.children
        s = s_node
        starts = []
        for child in ch:
            starts.append(s)
            s += child.count if not child.is_leaf else len(child.keys)
        for i, child in enumerate(ch):
            cl = starts[i] + (child.off if child.is_leaf else child.lead_off)
            if i == 0:
                cl = lo
            if i + 1 < len(ch):
                nxt = ch[i + 1]
                ch_hi = starts[i + 1] + (nxt.off if nxt.is_leaf else nxt.lead_off)
            else:
                ch_hi = hi
            if ch_hi <= a:
                continue
            if cl >= c:
                break
            acc = merge(acc, self._range(child, starts[i], cl, ch_hi, a, c))
        return acc

    def range_aggregate(self, lo_key, hi_key):
        """Aggregate of the values of all keys in ``[lo_key, hi_key]``."""
        if self._lt(hi_key, lo_key):
            return self.spec.identity
        return self.range_aggregate_ranks(self.rank(lo_key, strict=True),
                                          self.rank(hi_key))

    # -- checking -----------------------------------------------------------------------

    def check_invariants(self, local: bool = False) -> InvariantReport:
        report = super().check_invariants(local=local)
        if local:
            for leaf in self.last_touched:
                if self._alive(leaf) and self.mode == "merge" and not self.block_valid(leaf):
                    report.add(f"block out of bounds: off={leaf.off} size={leaf.size}")
            return report
        spec = self.spec
        s = 0
        expect = 0
        for leaf in self.leaves():
            start = s + leaf.off
            if start != expect:
                report.add(f"blocks do not tile: block starts at {start}, expected {expect}")
                break
            if leaf.size < 0:
                report.add("negative block size")
                break
            expect = start + leaf.size
            if self.mode == "merge" and not self.block_valid(leaf):
                report.add(f"block out of bounds: off={leaf.off} size={leaf.size}")
            s += len(leaf.keys)
        else:
            if expect != self.n:
                report.add(f"blocks cover {expect} positions, tree holds {self.n}")
        if not report.ok:
            return report
        for leaf in self.leaves():
            if spec.eval(self._block_values(leaf)) != leaf.agg:
                report.add("cached block aggregate differs from its values")
                break
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                continue
            acc = node.children[0].agg
            for c in node.children[1:]:
                acc = spec.merge(acc, c.agg)
            first = node.children[0]
            lead = first.off if first.is_leaf else first.lead_off
            if acc != node.agg or lead != node.lead_off:
                report.add(f"internal aggregate stale at level {node.level}")
                break
            stack.extend(node.children)
        allv = [v for _, v in self.items()]
        if spec.eval(allv) != self.root.agg:
            report.add("root aggregate differs from a full evaluation")
        return report
