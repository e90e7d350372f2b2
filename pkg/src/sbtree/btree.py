"""Load-balancing B+ tree over fixed-width keys.

Leaves are packed circular buffers of capacity ``b``.  A full leaf does not
split while a non-full leaf lies within ``q - 1`` positions of it in the leaf
list; instead one boundary key per intermediate leaf is rotated toward the
non-full leaf.  Leaves are deleted only when empty.  Together this keeps at
most two non-full leaves in every run of ``q`` consecutive leaves, so the
leaf arrays hold ``n*k + O(n*k/q)`` bits.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

from .packed import WORD_BITS, Comparator, PackedKeyBuffer
from .varcode import DiffLeaf


@dataclass(frozen=True)
class TreeParams:
    """Tree geometry.  ``q`` and ``b`` default from the capacity hint ``n0``
    and stay frozen afterwards."""

    t: int = 16
    k: int = 32
    n0: int = 1 << 20
    q: Optional[int] = None
    b: Optional[int] = None
    w: int = WORD_BITS
    value_width: Optional[int] = None
    compressed: Optional[str] = None

    def __post_init__(self):
        if not 1 <= self.k <= self.w:
            raise ValueError("key width k must be in [1, w]")
        lg = max(1, math.ceil(math.log2(max(2, self.n0))))
        if self.q is None:
            object.__setattr__(self, "q", max(3, lg))
        if self.b is None:
            object.__setattr__(self, "b", max(2, math.ceil(self.w * lg / self.k)))
        if self.t < 3:
            raise ValueError("degree t must be >= 3")
        if self.q < 3:
            raise ValueError("window q must be >= 3")
        if self.b < 2:
            raise ValueError("leaf capacity b must be >= 2")
        if not 1 <= self.k <= self.w:
            raise ValueError("key width k must be in [1, w]")
        if self.value_width is not None and not 1 <= self.value_width <= self.w:
            raise ValueError("value width must be in [1, w]")
        if self.compressed not in (None, "gamma", "delta"):
            raise ValueError("compressed must be None, 'gamma' or 'delta'")


class Leaf:
    __slots__ = ("keys", "values", "prev", "next", "parent",
                 "off", "size", "agg", "__weakref__")
    level = 0
    is_leaf = True

    def __init__(self, keys, values=None):
        self.keys = keys
        self.values = values
        self.prev: Optional[Leaf] = None
        self.next: Optional[Leaf] = None
        self.parent: Optional[Internal] = None
        # block descriptor, used by the aggregate tree
        self.off = 0
        self.size = 0
        self.agg = None

    @property
    def count(self) -> int:
        return len(self.keys)

    def max_key(self):
        return self.keys.last()

    # keys and values move together through these
    def insert_at(self, rank, key, value):
        self.keys.insert_at(rank, key)
        if self.values is not None:
            self.values.insert_at(rank, value)

    def remove_at(self, rank):
        key = self.keys.remove_at(rank)
        value = self.values.remove_at(rank) if self.values is not None else None
        return key, value

    def push_front(self, key, value):
        self.keys.push_front(key)
        if self.values is not None:
            self.values.push_front(value)

    def push_back(self, key, value):
        self.keys.push_back(key)
        if self.values is not None:
            self.values.push_back(value)

    def pop_front(self):
        key = self.keys.pop_front()
        return key, (self.values.pop_front() if self.values is not None else None)

    def pop_back(self):
        key = self.keys.pop_back()
        return key, (self.values.pop_back() if self.values is not None else None)

    def value_at(self, rank):
        return self.values.get(rank) if self.values is not None else None

    def __repr__(self):
        return f"Leaf({self.keys.to_list()})"


class Internal:
    __slots__ = ("children", "seps", "count", "agg", "lead_off", "parent",
                 "level", "__weakref__")
    is_leaf = False

    def __init__(self, children: list, level: int):
        self.children = children
        # seps[i] = max key below children[i]; seps[:-1] are the routing separators
        self.seps: list = [None] * len(children)
        self.count = 0
        self.agg = None
        self.lead_off = 0
        self.parent: Optional[Internal] = None
        self.level = level
        for c in children:
            c.parent = self

    def __repr__(self):
        return f"Internal(level={self.level}, seps={self.seps})"


def node_count(node) -> int:
    return len(node.keys) if node.is_leaf else node.count


def node_max(node):
    return node.keys.last() if node.is_leaf else node.seps[-1]


@dataclass
class TreeStats:
    n_keys: int
    n_leaves: int
    n_internal: int
    height: int
    bits_leaf_arrays: int
    bits_leaves: int
    bits_internal: int
    bits_total: int
    occupancy_ratio: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class InvariantReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Optional[str]:
        return self.violations[0] if self.violations else None

    def add(self, msg: str) -> None:
        self.violations.append(msg)

    def __bool__(self) -> bool:
        return self.ok


class BTree:
    """Dynamic predecessor structure over k-bit keys.

    ``cmp`` optionally replaces integer order with ``cmp(query, stored)``;
    it must be a total order consistent over the stored keys.
    """

    def __init__(self, params: Optional[TreeParams] = None,
                 cmp: Optional[Comparator] = None, **kw):
        if params is None:
            params = TreeParams(**kw)
        elif kw:
            raise TypeError("pass either params or keyword overrides")
        self.params = params
        self.t, self.q, self.b, self.k = params.t, params.q, params.b, params.k
        self.cmp = cmp
        if params.compressed and cmp is not None:
            raise ValueError("compressed leaves need natural integer order")
        self._min_deg = (self.t + 1) // 2
        self.root = self._new_leaf()
        self.head = self.root
        self.n = 0
        self.counters: Counter = Counter()
        self.last_touched: list[Leaf] = []
        self._touched: dict = {}
        self._dirty: set = set()

    # -- construction helpers ---------------------------------------------

    def _new_leaf(self) -> Leaf:
        p = self.params
        if p.compressed:
            keys = DiffLeaf(self.b, self.k, p.compressed)
        else:
            keys = PackedKeyBuffer(self.b, self.k)
        values = (PackedKeyBuffer(self.b, p.value_width)
                  if p.value_width is not None else None)
        return Leaf(keys, values)

    def __len__(self) -> int:
        return self.n

    @property
    def height(self) -> int:
        return self.root.level + 1

    def leaves(self) -> Iterator[Leaf]:
        x = self.head
        while x is not None:
            yield x
            x = x.next

    def __iter__(self) -> Iterator[int]:
        for leaf in self.leaves():
            yield from leaf.keys.to_list()

    def keys(self) -> list[int]:
        return list(self)

    def items(self) -> Iterator[tuple[int, Any]]:
        for leaf in self.leaves():
            ks = leaf.keys.to_list()
            vs = leaf.values.to_list() if leaf.values is not None else [None] * len(ks)
            yield from zip(ks, vs)

    # -- comparisons ----------------------------------------------------------

    def _lt(self, a, b) -> bool:
        return a < b if self.cmp is None else self.cmp(a, b) < 0

    def _eq(self, a, b) -> bool:
        return a == b if self.cmp is None else self.cmp(a, b) == 0

    def _route(self, node: Internal, key, right: bool = False) -> int:
        """Smallest child i with key <= max_i (key < max_i when ``right``)."""
        seps = node.seps
        if self.cmp is None:
            i = bisect_right(seps, key) if right else bisect_left(seps, key)
        else:
            cmp = self.cmp
            lo, hi = 0, len(seps)
            while lo < hi:
                mid = (lo + hi) >> 1
                c = cmp(key, seps[mid])
                if c > 0 or (right and c == 0):
                    lo = mid + 1
                else:
                    hi = mid
            i = lo
        return min(i, len(seps) - 1)

    # -- navigation -----------------------------------------------------------

    def locate_leaf(self, key) -> tuple[Leaf, list[tuple[Internal, int]]]:
        """Leaf whose key range admits ``key`` plus the root-to-leaf path."""
        node = self.root
        path = []
        while not node.is_leaf:
            i = self._route(node, key)
            path.append((node, i))
            node = node.children[i]
        return node, path

    def _find(self, key) -> tuple[Leaf, int]:
        node = self.root
        if self.cmp is None:
            # inlined _route for the common integer order
            while not node.is_leaf:
                seps = node.seps
                i = bisect_left(seps, key)
                node = node.children[i if i < len(seps) else i - 1]
            return node, node.keys.rank_of(key)
        while not node.is_leaf:
            node = node.children[self._route(node, key)]
        return node, node.keys.rank_of(key, self.cmp)

    def predecessor(self, key):
        """Largest stored key <= ``key``, or None."""
        leaf, r = self._find(key)
        if r:
            return leaf.keys.get(r - 1)
        if leaf.prev is not None:
            return leaf.prev.keys.last()
        return None

    def successor(self, key):
        """Smallest stored key >= ``key``, or None."""
        node = self.root
        while not node.is_leaf:
            node = node.children[self._route(node, key)]
        r = node.keys.rank_lt(key, self.cmp)
        if r < len(node.keys):
            return node.keys.get(r)
        if node.next is not None:
            return node.next.keys.first()
        return None

    def __contains__(self, key) -> bool:
        leaf, r = self._find(key)
        return bool(r) and self._eq(key, leaf.keys.get(r - 1))

    def access_key(self, key):
        """Satellite value stored with ``key``."""
        leaf, r = self._find(key)
        if not r or not self._eq(key, leaf.keys.get(r - 1)):
            raise KeyError(key)
        return leaf.value_at(r - 1)

    def rank(self, key, strict: bool = False) -> int:
        """Number of stored keys <= key (< key when ``strict``)."""
        node = self.root
        acc = 0
        while not node.is_leaf:
            i = self._route(node, key, right=not strict)
            for c in node.children[:i]:
                acc += node_count(c)
            node = node.children[i]
        if strict:
            return acc + node.keys.rank_lt(key, self.cmp)
        return acc + node.keys.rank_of(key, self.cmp)

    def select(self, i: int) -> tuple[Leaf, int]:
        """Leaf and local slot of the key with global rank ``i`` (0-based)."""
        if not 0 <= i < self.n:
            raise IndexError(i)
        node = self.root
        while not node.is_leaf:
            for c in node.children:
                cnt = node_count(c)
                if i < cnt:
                    node = c
                    break
                i -= cnt
        return node, i

    def key_at(self, i: int):
        leaf, j = self.select(i)
        return leaf.keys.get(j)

    def value_at(self, i: int):
        leaf, j = self.select(i)
        return leaf.value_at(j)

    # -- event hooks (aggregate tree overrides) -----------------------------------

    def _ev_pre_insert(self, leaf: Leaf, rank: int):
        return None

    def _ev_insert(self, leaf: Leaf, rank: int, value, ctx) -> None:
        pass

    def _ev_pre_delete(self, leaf: Leaf, rank: int):
        return None

    def _ev_post_delete(self, leaf: Leaf, rank: int, ctx) -> None:
        pass

    def _ev_shift_right(self, left: Leaf) -> None:
        """A key moved from the end of ``left`` to the front of ``left.next``."""

    def _ev_shift_left(self, left: Leaf) -> None:
        """A key moved from the front of ``left.next`` to the end of ``left``."""

    def _ev_leaf_removed(self, leaf: Leaf) -> None:
        pass

    def _ev_split(self, leaf: Leaf, new: Leaf) -> None:
        pass

    def _ev_after_op(self) -> None:
        pass

    def _refresh_extra(self, node) -> None:
        pass

    # -- bookkeeping ----------------------------------------------------------------

    def _touch(self, leaf: Leaf) -> None:
        self._touched[leaf] = None
        self._dirty.add(leaf)

    def _begin(self) -> None:
        self._touched = {}

    def _commit(self) -> None:
        self._ev_after_op()
        self._propagate()
        self.last_touched = list(self._touched)
        nt = len(self.last_touched)
        self.counters["ops"] += 1
        self.counters["leaves_touched"] += nt
        if nt > self.counters["leaves_touched_max"]:
            self.counters["leaves_touched_max"] = nt

    def _alive(self, node) -> bool:
        return node is self.root or node.parent is not None

    def _refresh(self, v: Internal) -> None:
        seps = []
        cnt = 0
        for c in v.children:
            if c.is_leaf:
                k = c.keys
                seps.append(k.last())
                cnt += len(k)
            else:
                seps.append(c.seps[-1])
                cnt += c.count
        v.seps = seps
        v.count = cnt
        self._refresh_extra(v)

    def _propagate(self) -> None:
        """Recompute maxima, counts and aggregates above the dirty nodes,
        level by level, so shared ancestors are refreshed once.

        Internal nodes whose child list changed are rebuilt in full; for the
        others only the entries of changed children are rewritten.
        """
        if not self._dirty:
            return
        full = set()
        changed: dict = defaultdict(dict)
        for node in self._dirty:
            if node.is_leaf:
                changed[0][node] = None
            else:
                full.add(node)
                changed[node.level][node] = None
        self._dirty = set()
        for lvl in range(0, self.root.level + 1):
            for node in changed.get(lvl, ()):
                if not self._alive(node):
                    continue
                if node.is_leaf:
                    self._refresh_extra(node)
                elif node in full:
                    self._refresh(node)
                else:
                    self._refresh_partial(node, changed[lvl][node])
                parent = node.parent
                if parent is not None:
                    kids = changed[lvl + 1].get(parent)
                    if kids is None:
                        changed[lvl + 1][parent] = kids = []
                    kids.append(node)

    def _refresh_partial(self, v: Internal, kids) -> None:
        ch = v.children
        seps = v.seps
        for c in kids:
            i = ch.index(c)
            seps[i] = c.keys.last() if c.is_leaf else c.seps[-1]
        cnt = 0
        for c in ch:
            cnt += len(c.keys) if c.is_leaf else c.count
        v.count = cnt
        self._refresh_extra(v)

    # -- sibling window -----------------------------------------------------------

    def _nearest_nonfull(self, leaf: Leaf) -> Optional[tuple[Leaf, int, int]]:
        """Nearest non-full leaf within distance q-1, alternating right/left.

        Returns ``(target, direction, distance)`` with direction +1 or -1.
        """
        b = self.b
        r = l = leaf
        for d in range(1, self.q):
            if r is not None:
                r = r.next
                if r is not None and len(r.keys) < b:
                    return r, 1, d
            if l is not None:
                l = l.prev
                if l is not None and len(l.keys) < b:
                    return l, -1, d
            if r is None and l is None:
                break
        return None

    def _leaf_insert(self, leaf: Leaf, rank: int, key, value) -> None:
        ctx = self._ev_pre_insert(leaf, rank)
        leaf.insert_at(rank, key, value)
        self._ev_insert(leaf, rank, value, ctx)

    def _move_right(self, g: Leaf) -> None:
        key, value = g.pop_back()
        g.next.push_front(key, value)
        self.counters["rotations"] += 1
        self._ev_shift_right(g)

    def _move_left(self, g: Leaf) -> None:
        """Move the first key of ``g.next`` to the end of ``g``."""
        key, value = g.next.pop_front()
        g.push_back(key, value)
        self.counters["rotations"] += 1
        self._ev_shift_left(g)

    # -- insertion -------------------------------------------------------------

    def insert(self, key, value=None) -> None:
        if not 0 <= key < (1 << self.k):
            raise ValueError(f"key {key} does not fit in {self.k} bits")
        vw = self.params.value_width
        if vw is not None:
            value = 0 if value is None else value
            if not 0 <= value < (1 << vw):
                raise ValueError(f"value {value} does not fit in {vw} bits")
        self._begin()
        leaf, r = self._find(key)
        if self.params.compressed and r and leaf.keys.get(r - 1) == key:
            raise ValueError(f"duplicate key {key} in compressed mode")
        b = self.b
        self._touch(leaf)
        if len(leaf.keys) < b:
            self._leaf_insert(leaf, r, key, value)
        else:
            found = self._nearest_nonfull(leaf)
            if found is None:
                self._split_insert(leaf, r, key, value)
            else:
                self._rotate_insert(leaf, r, key, value, *found)
        self.n += 1
        self._commit()

    def _rotate_insert(self, leaf, r, key, value, target, direction, dist):
        chain = [leaf]
        x = leaf
        for _ in range(dist):
            x = x.next if direction > 0 else x.prev
            chain.append(x)
            self._touch(x)
        if direction > 0:
            for i in range(dist - 1, 0, -1):
                self._move_right(chain[i])
            if r == len(leaf.keys):
                self._leaf_insert(chain[1], 0, key, value)
                return
            self._move_right(leaf)
            self._leaf_insert(leaf, r, key, value)
        else:
            for i in range(dist - 1, 0, -1):
                self._move_left(chain[i + 1])
            if r == 0:
                g = chain[1]
                self._leaf_insert(g, len(g.keys), key, value)
                return
            self._move_left(chain[1])
            self._leaf_insert(leaf, r - 1, key, value)

    def _split_insert(self, leaf: Leaf, r: int, key, value) -> None:
        b = self.b
        left_size = (b + 1) // 2
        new = self._new_leaf()
        if r < left_size:
            kchunk = leaf.keys.cut_back(b - left_size + 1)
        else:
            kchunk = leaf.keys.cut_back(b - left_size)
        new.keys.paste_back(kchunk)
        if leaf.values is not None:
            new.values.paste_back(leaf.values.cut_back(len(new.keys)))
        # link
        new.prev, new.next = leaf, leaf.next
        if leaf.next is not None:
            leaf.next.prev = new
        leaf.next = new
        self._touch(new)
        self.counters["splits"] += 1
        self._attach_after(leaf, new)
        self._ev_split(leaf, new)
        if r < left_size:
            self._leaf_insert(leaf, r, key, value)
        else:
            self._leaf_insert(new, r - left_size, key, value)

    def _attach_after(self, node, new) -> None:
        parent = node.parent
        if parent is None:
            root = Internal([node, new], node.level + 1)
            self.root = root
            self._dirty.add(root)
            return
        i = parent.children.index(node)
        parent.children.insert(i + 1, new)
        parent.seps.insert(i + 1, None)
        new.parent = parent
        self._dirty.add(parent)
        if len(parent.children) > self.t:
            self._split_internal(parent)

    def _split_internal(self, v: Internal) -> None:
        mid = (len(v.children) + 1) // 2
        right = Internal(v.children[mid:], v.level)
        v.children = v.children[:mid]
        v.seps = v.seps[:mid]
        self._dirty.add(v)
        self._dirty.add(right)
        self.counters["internal_splits"] += 1
        self._attach_after(v, right)

    # -- deletion ------------------------------------------------------------------

    def delete(self, key) -> None:
        """Remove one occurrence of ``key``; KeyError if absent."""
        leaf, r = self._find(key)
        if not r or not self._eq(key, leaf.keys.get(r - 1)):
            raise KeyError(key)
        self._begin()
        self._touch(leaf)
        pos = r - 1
        was_full = len(leaf.keys) == self.b
        ctx = self._ev_pre_delete(leaf, pos)
        leaf.remove_at(pos)
        self._ev_post_delete(leaf, pos, ctx)
        self.n -= 1
        found = self._nearest_nonfull(leaf) if was_full else None
        if found is not None:
            target, direction, dist = found
            chain = [leaf]
            x = leaf
            for _ in range(dist):
                x = x.next if direction > 0 else x.prev
                chain.append(x)
                self._touch(x)
            for i in range(dist):
                if direction > 0:
                    self._move_left(chain[i])
                else:
                    self._move_right(chain[i + 1])
            if not len(target.keys):
                self._remove_leaf(target)
        elif not len(leaf.keys) and leaf is not self.root:
            self._remove_leaf(leaf)
        self._commit()

    def _remove_leaf(self, leaf: Leaf) -> None:
        self._ev_leaf_removed(leaf)
        if leaf.prev is not None:
            leaf.prev.next = leaf.next
            self._touch(leaf.prev)
        else:
            self.head = leaf.next
        if leaf.next is not None:
            leaf.next.prev = leaf.prev
            self._touch(leaf.next)
        leaf.prev = leaf.next = None
        self.counters["leaf_deletes"] += 1
        self._detach(leaf)

    def _detach(self, node) -> None:
        parent = node.parent
        i = parent.children.index(node)
        del parent.children[i]
        del parent.seps[i]
        node.parent = None
        self._dirty.add(parent)
        self._rebalance(parent)

    def _rebalance(self, v: Internal) -> None:
        if v is self.root:
            if len(v.children) == 1:
                child = v.children[0]
                child.parent = None
                self.root = child
            return
        if len(v.children) >= self._min_deg:
            return
        parent = v.parent
        i = parent.children.index(v)
        left = parent.children[i - 1] if i > 0 else None
        right = parent.children[i + 1] if i + 1 < len(parent.children) else None
        self._dirty.add(v)
        if left is not None and len(left.children) > self._min_deg:
            c = left.children.pop()
            left.seps.pop()
            v.children.insert(0, c)
            v.seps.insert(0, None)
            c.parent = v
            self._dirty.add(left)
        elif right is not None and len(right.children) > self._min_deg:
            c = right.children.pop(0)
            right.seps.pop(0)
            v.children.append(c)
            v.seps.append(None)
            c.parent = v
            self._dirty.add(right)
        elif left is not None:
            for c in v.children:
                c.parent = left
            left.children.extend(v.children)
            left.seps.extend(v.seps)
            v.children = []
            self._dirty.add(left)
            self.counters["internal_merges"] += 1
            self._detach(v)
        else:
            for c in right.children:
                c.parent = v
            v.children.extend(right.children)
            v.seps.extend(right.seps)
            right.children = []
            self.counters["internal_merges"] += 1
            self._detach(right)

    # -- checking -------------------------------------------------------------------

    def _check_window(self, fullness: list[bool], report: InvariantReport,
                      offset: int = 0) -> None:
        q = self.q
        nonfull = [i for i, f in enumerate(fullness) if not f]
        for a, c in zip(nonfull, nonfull[2:]):
            if c - a < q:
                report.add(f"window: leaves {a + offset}, {c + offset} and one between "
                           f"are non-full within {q} consecutive leaves")
                return

    def check_invariants(self, local: bool = False) -> InvariantReport:
        """Verify structure, order, separators, counts and the window property.

        With ``local`` only the leaves touched by the last operation (and the
        windows around them) plus their root paths are checked.
        """
        report = InvariantReport()
        if local:
            self._check_local(report)
            return report
        # structural pass, top-down
        leaf_depths = set()
        leaves_in_order: list[Leaf] = []
        stack = [(self.root, 1)]
        if self.root.parent is not None:
            report.add("root has a parent")
        while stack:
            node, depth = stack.pop()
            if node.is_leaf:
                leaf_depths.add(depth)
                leaves_in_order.append(node)
                if node.keys.capacity != self.b:
                    report.add("leaf capacity differs from b")
                continue
            ch = node.children
            if node is not self.root and not self._min_deg <= len(ch) <= self.t:
                report.add(f"internal degree {len(ch)} outside [{self._min_deg}, {self.t}]")
            if node is self.root and len(ch) < 2:
                report.add("internal root with fewer than 2 children")
            if len(node.seps) != len(ch):
                report.add("separator array length mismatch")
            for i, c in enumerate(ch):
                if c.parent is not node:
                    report.add("broken parent link")
                if c.level != node.level - 1:
                    report.add("level mismatch")
                if i < len(node.seps) and not self._eq(node.seps[i], node_max(c)):
                    report.add(f"separator {i} of node at level {node.level} is "
                               f"{node.seps[i]}, child max is {node_max(c)}")
            if node.count != sum(node_count(c) for c in ch):
                report.add("subtree count mismatch")
            for c in reversed(ch):
                stack.append((c, depth + 1))
        if len(leaf_depths) > 1:
            report.add(f"leaves at different depths {sorted(leaf_depths)}")
        # linked list agrees with the tree order
        linked = list(self.leaves())
        if len(linked) != len(leaves_in_order) or any(
                a is not b for a, b in zip(linked, leaves_in_order)):
            report.add("leaf list disagrees with tree order")
        prev = None
        for leaf in linked:
            if leaf.prev is not prev:
                report.add("broken prev link")
            if not len(leaf.keys) and leaf is not self.root:
                report.add("empty non-root leaf")
            prev = leaf
        # global order
        last = None
        total = 0
        for leaf in linked:
            ks = leaf.keys.to_list()
            total += len(ks)
            for x in ks:
                if last is not None and self._lt(x, last):
                    report.add(f"order violated at key {x}")
                    break
                last = x
        if total != self.n:
            report.add(f"size {self.n} but {total} keys stored")
        self._check_window([len(l.keys) == self.b for l in linked], report)
        return report

    def _check_local(self, report: InvariantReport) -> None:
        q = self.q
        touched = [l for l in dict.fromkeys(self.last_touched) if self._alive(l)]
        if not touched:
            return
        # one run covering every touched leaf plus q-1 leaves on both sides;
        # the leaves touched by one operation lie within q+2 of each other
        ids = set(map(id, touched))
        anchor = touched[0]
        left = right = anchor
        x = anchor
        for _ in range(q + 2):
            x = x.prev
            if x is None:
                break
            if id(x) in ids:
                left = x
        x = anchor
        for _ in range(q + 2):
            x = x.next
            if x is None:
                break
            if id(x) in ids:
                right = x
        for _ in range(q - 1):
            if left.prev is None:
                break
            left = left.prev
        b = self.b
        fullness = []
        seen = 0
        x = left
        tail = -1
        while x is not None and tail < q - 1:
            fullness.append(len(x.keys) == b)
            if id(x) in ids:
                seen += 1
            if tail >= 0 or x is right:
                tail += 1
            x = x.next
        if seen != len(ids):
            report.add("touched leaves are not within one window run")
            return
        self._check_window(fullness, report)
        ancestors = {}
        for leaf in touched:
            ks = leaf.keys.to_list()
            if self.cmp is None:
                ordered = ks == sorted(ks)
            else:
                ordered = not any(self._lt(b, a) for a, b in zip(ks, ks[1:]))
            if not ordered:
                report.add("leaf keys out of order")
            if leaf.prev is not None and len(leaf.prev.keys) and ks and \
                    self._lt(ks[0], leaf.prev.keys.last()):
                report.add("order violated across leaves")
            if leaf.next is not None and ks and self._lt(leaf.next.keys.first(), ks[-1]):
                report.add("order violated across leaves")
            if not ks and leaf is not self.root:
                report.add("empty non-root leaf")
            node = leaf
            while node.parent is not None:
                ancestors.setdefault(id(node.parent), (node.parent, []))[1].append(node)
                node = node.parent
            if node is not self.root:
                report.add("touched leaf not connected to root")
        # separators of children on touched paths; counts of whole nodes
        for p, on_path in ancestors.values():
            ch = p.children
            if len(p.seps) != len(ch):
                report.add(f"separator array length mismatch at level {p.level}")
                continue
            for c in dict.fromkeys(on_path):
                i = ch.index(c)
                if not self._eq(p.seps[i], node_max(c)):
                    report.add(f"separator mismatch at level {p.level}")
            if p.count != sum(len(c.keys) if c.is_leaf else c.count for c in ch):
                report.add("subtree count mismatch")
            if p is not self.root and not self._min_deg <= len(ch) <= self.t:
                report.add("internal degree out of bounds")

    # -- accounting ------------------------------------------------------------------

    def stats(self) -> TreeStats:
        p = self.params
        w = p.w
        n_leaves = 0
        key_bits = 0
        for leaf in self.leaves():
            n_leaves += 1
            key_bits += leaf.keys.model_bits()
        value_bits = n_leaves * self.b * p.value_width if p.value_width else 0
        bits_leaves = key_bits + value_bits + n_leaves * 4 * w
        n_internal = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                n_internal += 1
                stack.extend(node.children)
        bits_internal = n_internal * (self.t * w + (self.t - 1) * self.k + 2 * w)
        occ = self.n / (n_leaves * self.b) if n_leaves else 0.0
        return TreeStats(
            n_keys=self.n, n_leaves=n_leaves, n_internal=n_internal,
            height=self.height, bits_leaf_arrays=key_bits, bits_leaves=bits_leaves,
            bits_internal=bits_internal, bits_total=bits_leaves + bits_internal,
            occupancy_ratio=occ)
