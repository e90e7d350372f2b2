"""Sparse suffix sorting over a static text.

Positions are 1-based.  Suffixes compare in unsigned byte order; a suffix
that is a proper prefix of another sorts first (no sentinel).

``SparseSuffixIndex`` keeps the chosen suffix starts in an aggregate tree
whose satellite value at rank ``i`` is the lcp with the preceding suffix;
min over a rank range answers lcp queries between any two stored suffixes.

``SavlTree`` is an unbalanced binary search tree of suffixes where each node
stores ``(d, m)``: the larger of its lcps with the nearest ancestor it hangs
left of (``cla``) and right of (``cra``).  ``savl_slcp`` recovers the full
lcp array from those pairs with one Euler tour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .aggregates import MIN, AggregateBTree
from .btree import TreeParams

LEFT, RIGHT, BOTTOM = "L", "R", None


def _lcp_from(text: bytes, a: int, b: int, l: int = 0) -> int:
    """lcp of text[a:] and text[b:] (0-based), known to be at least ``l``."""
    lim = len(text) - max(a, b)
    step = 8
    while l < lim:
        c = min(step, lim - l)
        if text[a + l:a + l + c] == text[b + l:b + l + c]:
            l += c
            step <<= 1
            continue
        for x in range(c):
            if text[a + l + x] != text[b + l + x]:
                return l + x
    return lim if l > lim else l


def naive_lcp(text: bytes, i: int, j: int) -> int:
    """Character-by-character lcp of the suffixes starting at 1-based i, j."""
    n = len(text)
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError("positions are 1-based and must lie in [1, n]")
    l = 0
    while i - 1 + l < n and j - 1 + l < n and text[i - 1 + l] == text[j - 1 + l]:
        l += 1
    return l


def suffix_compare(text: bytes, i: int, j: int, skip: int = 0) -> tuple[int, int]:
    """Three-way comparison of suffixes i and j plus their lcp.  The first
    ``skip`` characters are assumed equal."""
    if i == j:
        return 0, len(text) - i + 1
    n = len(text)
    l = _lcp_from(text, i - 1, j - 1, skip)
    ei, ej = i - 1 + l >= n, j - 1 + l >= n
    if ei:
        return -1, l
    if ej:
        return 1, l
    return (-1 if text[i - 1 + l] < text[j - 1 + l] else 1), l


def brute_force_ssa(text: bytes, positions) -> tuple[list[int], list[int]]:
    """Sorted positions and lcp-with-predecessor array, by direct sorting."""
    ssa = sorted(positions, key=lambda p: text[p - 1:])
    if not ssa:
        return [], []
    slcp = [0] + [naive_lcp(text, a, c) for a, c in zip(ssa, ssa[1:])]
    return ssa, slcp


class SuffixOrder:
    """Comparator ``cmp(query, stored)`` over suffix start positions.

    In accelerated mode it remembers the lcp of the query with the tightest
    lower and upper pivots seen since ``reset()``; every key compared later
    in the same descent lies between them, so ``min`` of the two lcps can be
    skipped.  Call ``reset()`` before each new search.
    """

    def __init__(self, text: bytes, accelerated: bool = True):
        self.text = text
        self.accelerated = accelerated
        self.char_skips = 0
        self.comparisons = 0
        self.reset()

    def reset(self) -> None:
        self._query = None
        self._lo = 0
        self._hi = 0

    def __call__(self, query: int, stored: int) -> int:
        self.comparisons += 1
        if not self.accelerated:
            return suffix_compare(self.text, query, stored)[0]
        if query != self._query:
            self._query = query
            self._lo = self._hi = 0
        skip = min(self._lo, self._hi)
        self.char_skips += skip
        c, l = suffix_compare(self.text, query, stored, skip)
        if c > 0:
            self._lo = l
        elif c < 0:
            self._hi = l
        return c


class SparseSuffixIndex:
    """Dynamic set of suffix starts with their lcp array.

    ``insert``/``delete`` keep the satellite value of every stored suffix
    equal to its lcp with the preceding stored suffix.
    """

    def __init__(self, text: bytes, accelerated: bool = True, mode: str = "merge",
                 t: int = 16, n0: Optional[int] = None, q: Optional[int] = None,
                 b: Optional[int] = None):
        if isinstance(text, str):
            text = text.encode()
        self.text = bytes(text)
        n = len(self.text)
        k = max(1, n.bit_length())
        params = TreeParams(t=t, k=k, n0=n0 or max(2, n), q=q, b=b, value_width=k)
        self.order = SuffixOrder(self.text, accelerated)
        self.tree = AggregateBTree(params, spec=MIN, mode=mode, cmp=self.order)

    def __len__(self) -> int:
        return len(self.tree)

    def _check(self, p: int) -> None:
        if not 1 <= p <= len(self.text):
            raise IndexError(f"position {p} outside [1, {len(self.text)}]")

    def __contains__(self, p: int) -> bool:
        self.order.reset()
        return p in self.tree

    def lcp(self, i: int, j: int) -> int:
        return suffix_compare(self.text, i, j)[1]

    def insert(self, p: int) -> None:
        self._check(p)
        if p in self:
            raise ValueError(f"position {p} already stored")
        tree, order = self.tree, self.order
        order.reset()
        pred = tree.predecessor(p)
        order.reset()
        succ = tree.successor(p)
        order.reset()
        tree.insert(p, self.lcp(pred, p) if pred is not None else 0)
        if succ is not None:
            order.reset()
            tree.update_value(succ, self.lcp(p, succ))

    def delete(self, p: int) -> None:
        self._check(p)
        if p not in self:
            raise KeyError(p)
        tree, order = self.tree, self.order
        order.reset()
        r = tree.rank(p, strict=True)
        v_p = tree.value_at(r)
        succ = tree.key_at(r + 1) if r + 1 < len(tree) else None
        v_s = tree.value_at(r + 1) if succ is not None else None
        order.reset()
        tree.delete(p)
        if succ is not None:
            # lcp(pred, succ) = min(lcp(pred, p), lcp(p, succ)); 0 without pred
            order.reset()
            tree.update_value(succ, min(v_p, v_s))

    def lcp_query(self, p1: int, p2: int) -> int:
        """lcp of two stored suffixes via a range minimum over the lcp array."""
        if p1 not in self or p2 not in self:
            raise KeyError((p1, p2))
        if p1 == p2:
            return len(self.text) - p1 + 1
        self.order.reset()
        i = self.tree.rank(p1, strict=True)
        self.order.reset()
        j = self.tree.rank(p2, strict=True)
        if i > j:
            i, j = j, i
        return self.tree.range_aggregate_ranks(i + 1, j + 1)

    def dump(self) -> tuple[list[int], list[int]]:
        items = list(self.tree.items())
        return [p for p, _ in items], [v for _, v in items]

    def check(self) -> list[str]:
        """Structural checks plus agreement with direct sorting."""
        problems = list(self.tree.check_invariants().violations)
        ssa, slcp = self.dump()
        exp_ssa, exp_slcp = brute_force_ssa(self.text, ssa)
        if ssa != exp_ssa:
            problems.append("stored order differs from sorted suffixes")
        elif slcp != exp_slcp:
            problems.append("lcp values differ from direct computation")
        return problems


@dataclass
class SavlNode:
    pos: int
    d: Optional[str] = BOTTOM
    m: int = 0
    left: Optional["SavlNode"] = None
    right: Optional["SavlNode"] = None


def lemma_resolve(L: int, m: int, d: Optional[str]) -> tuple[int, int]:
    """(lcp with cla, lcp with cra) of a node from its ``(d, m)`` pair and
    ``L = lcp(cla, cra)``."""
    if d == LEFT:
        return m, L
    if d == RIGHT:
        return L, m
    return 0, 0


class SavlTree:
    """Unbalanced suffix search tree annotated with ``(d, m)`` pairs."""

    def __init__(self, text: bytes, accelerated: bool = True):
        if isinstance(text, str):
            text = text.encode()
        self.text = bytes(text)
        self.accelerated = accelerated
        self.root: Optional[SavlNode] = None
        self.size = 0
        self.visits = 0
        self.rules: list[Optional[str]] = []

    def __len__(self) -> int:
        return self.size

    def insert(self, p: int) -> SavlNode:
        n = len(self.text)
        if not 1 <= p <= n:
            raise IndexError(f"position {p} outside [1, {n}]")
        node = SavlNode(p)
        if self.root is None:
            self.root = node
            self.size = 1
            return node
        # running lcps with the last node passed on the left / on the right
        la = ra = 0
        x = self.root
        while True:
            skip = min(la, ra) if self.accelerated else 0
            c, l = suffix_compare(self.text, p, x.pos, skip)
            if c == 0:
                raise ValueError(f"position {p} already stored")
            if c < 0:
                la = l
                if x.left is None:
                    x.left = node
                    break
                x = x.left
            else:
                ra = l
                if x.right is None:
                    x.right = node
                    break
                x = x.right
        if la == 0 and ra == 0:
            node.d, node.m = BOTTOM, 0
        elif la >= ra:
            node.d, node.m = LEFT, la
        else:
            node.d, node.m = RIGHT, ra
        self.size += 1
        return node

    def ssa(self) -> list[int]:
        out = []
        stack = []
        x = self.root
        while stack or x is not None:
            while x is not None:
                stack.append(x)
                x = x.left
            x = stack.pop()
            out.append(x.pos)
            x = x.right
        return out

    def slcp(self) -> list[int]:
        """lcp array from the ``(d, m)`` pairs, by one Euler tour.

        Also records ``self.visits`` and a per-rank rule label in
        ``self.rules``.
        """
        m = self.size
        out: list[Optional[int]] = [None] * m
        rules: list[Optional[str]] = [None] * m
        self.visits = 0
        if self.root is None:
            self.rules = []
            return []
        rank = 0
        # frame: node, L, has_cla, has_cra, is_left_child, stage, la, ra
        stack = [[self.root, 0, False, False, False, 0, 0, 0]]
        while stack:
            fr = stack[-1]
            node, L, has_la, has_ra, is_left = fr[0], fr[1], fr[2], fr[3], fr[4]
            self.visits += 1
            if fr[5] == 0:
                fr[6], fr[7] = lemma_resolve(L, node.m, node.d)
                fr[5] = 1
                if node.left is not None:
                    stack.append([node.left, fr[7], True, has_ra, True, 0, 0, 0])
                    continue
            if fr[5] == 1:
                la, ra = fr[6], fr[7]
                r = rank
                rank += 1
                if node.left is None:
                    self._write(out, r, ra)
                    if not has_ra:
                        rules[r] = "E"
                    elif node.d == RIGHT and has_la:
                        rules[r] = "R"
                    else:
                        rules[r] = "A"
                if node.right is None and r + 1 < m:
                    self._write(out, r + 1, la)
                    rules[r + 1] = "L" if (is_left and node.d == LEFT) else "D"
                fr[5] = 2
                if node.right is not None:
                    stack.append([node.right, la, has_la, True, False, 0, 0, 0])
                    continue
            stack.pop()
        self.rules = rules
        return out

    @staticmethod
    def _write(out: list, idx: int, value: int) -> None:
        if out[idx] is not None:
            raise AssertionError(f"lcp entry {idx} written twice")
        out[idx] = value


def savl_insert(tree: SavlTree, p: int) -> SavlNode:
    return tree.insert(p)


def savl_ssa(tree: SavlTree) -> list[int]:
    return tree.ssa()


def savl_slcp(tree: SavlTree) -> list[int]:
    return tree.slcp()
