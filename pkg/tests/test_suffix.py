import itertools
import random

import pytest
from hypothesis import given, strategies as st

from sbtree.suffix import (BOTTOM, LEFT, RIGHT, SavlTree, SparseSuffixIndex, SuffixOrder,
                           brute_force_ssa, lemma_resolve, naive_lcp, savl_insert, savl_slcp,
                           savl_ssa, suffix_compare)

TEXT = b"caatcacggtcggac"
SSA = [2, 14, 6, 3, 15, 1, 5, 11, 7, 13, 12, 8, 9, 4, 10]
SLCP = [0, 1, 2, 1, 0, 1, 2, 1, 3, 0, 1, 2, 1, 0, 2]
RULES = list("EALLADRALALLRDA")


def random_text(rng, n, alphabet=b"ab"):
    return bytes(rng.choice(alphabet) for _ in range(n))


def savl_of(text, positions):
    tree = SavlTree(text)
    for p in positions:
        savl_insert(tree, p)
    return tree


def walk_with_ancestors(root):
    """Yield (node, cla, cra) for every node."""
    stack = [(root, None, None)]
    while stack:
        node, cla, cra = stack.pop()
        yield node, cla, cra
        if node.left is not None:
            stack.append((node.left, node, cra))
        if node.right is not None:
            stack.append((node.right, cla, node))


# -- lcp ------------------------------------------------------------------------------------------

def test_naive_lcp_examples():
    assert naive_lcp(TEXT, 2, 14) == 1
    assert naive_lcp(TEXT, 7, 11) == 3
    for i in range(1, len(TEXT) + 1):
        assert naive_lcp(TEXT, i, i) == len(TEXT) - i + 1
    with pytest.raises(IndexError):
        naive_lcp(TEXT, 0, 3)
    with pytest.raises(IndexError):
        naive_lcp(TEXT, 1, 16)


@given(st.binary(min_size=1, max_size=60), st.data())
def test_suffix_compare_matches_slicing(text, data):
    n = len(text)
    i = data.draw(st.integers(1, n))
    j = data.draw(st.integers(1, n))
    c, l = suffix_compare(text, i, j)
    a, b = text[i - 1:], text[j - 1:]
    assert c == (a > b) - (a < b)
    assert l == naive_lcp(text, i, j)
    # any valid skip gives the same answer
    s = data.draw(st.integers(0, l))
    assert suffix_compare(text, i, j, s) == (c, l)


def test_long_repeats():
    text = b"a" * 5000 + b"b" + b"a" * 5000
    assert suffix_compare(text, 1, 5002) == (1, 5000)  # proper prefix sorts first
    assert suffix_compare(text, 5002, 1) == (-1, 5000)
    assert naive_lcp(text, 2, 5002) == 4999


def test_brute_force_edge_cases():
    assert brute_force_ssa(TEXT, []) == ([], [])
    assert brute_force_ssa(TEXT, range(1, 16)) == (SSA, SLCP)


# -- dynamic index ------------------------------------------------------------------------------------

def build_index(text, positions, **kw):
    idx = SparseSuffixIndex(text, **kw)
    for p in positions:
        idx.insert(p)
    return idx


@pytest.mark.parametrize("accelerated", [True, False])
@pytest.mark.parametrize("mode", ["merge", "batch"])
def test_example_table(accelerated, mode):
    idx = build_index(TEXT, range(1, 16), accelerated=accelerated, mode=mode)
    assert idx.dump() == (SSA, SLCP)
    assert idx.check() == []


def test_example_table_with_small_leaves():
    idx = build_index(TEXT, range(1, 16), t=3, q=3, b=2)
    assert idx.dump() == (SSA, SLCP)
    assert idx.tree.height > 1
    assert idx.check() == []


def test_delete_merges_neighbouring_lcps():
    idx = build_index(TEXT, range(1, 16), t=3, q=3, b=2)
    idx.delete(7)
    ssa, slcp = idx.dump()
    exp_ssa = [p for p in SSA if p != 7]
    assert ssa == exp_ssa
    # the suffix after 7 now follows 11: min(3, 0)
    assert slcp[exp_ssa.index(13)] == min(SLCP[8], SLCP[9]) == 0
    assert (ssa, slcp) == brute_force_ssa(TEXT, exp_ssa)


def test_duplicates_and_bounds():
    idx = build_index(TEXT, [3, 5])
    with pytest.raises(ValueError):
        idx.insert(3)
    with pytest.raises(IndexError):
        idx.insert(16)
    with pytest.raises(KeyError):
        idx.delete(4)


def test_delete_first_resets_lcp():
    idx = build_index(TEXT, range(1, 16))
    idx.delete(2)
    ssa, slcp = idx.dump()
    assert ssa[0] == 14 and slcp[0] == 0


@pytest.mark.parametrize("seed", range(3))
def test_random_index_matches_brute_force(seed):
    rng = random.Random(seed)
    text = random_text(rng, 2000, b"acgt" if seed else b"ab")
    pos = rng.sample(range(1, len(text) + 1), 500)
    idx = build_index(text, pos)
    assert idx.dump() == brute_force_ssa(text, pos)
    live = set(pos)
    for p in rng.sample(pos, 200):
        idx.delete(p)
        live.discard(p)
    for p in rng.sample(sorted(set(range(1, len(text) + 1)) - live), 100):
        idx.insert(p)
        live.add(p)
    assert idx.dump() == brute_force_ssa(text, live)
    assert idx.check() == []


def test_accelerated_comparator_skips_characters():
    rng = random.Random(4)
    text = b"ab" * 400 + random_text(rng, 200)
    pos = rng.sample(range(1, len(text) + 1), 300)
    fast = build_index(text, pos)
    slow = build_index(text, pos, accelerated=False)
    assert fast.dump() == slow.dump()
    assert fast.order.char_skips > 0
    assert slow.order.char_skips == 0


def test_comparator_reset():
    order = SuffixOrder(TEXT)
    # 11 and 7 share "cgg"; 11 < 7 in suffix order
    assert order(7, 11) == 1
    order.reset()
    assert order(11, 7) == -1
    order.reset()
    assert order(11, 11) == 0
    assert order.comparisons == 3


def test_lcp_query_on_example():
    idx = build_index(TEXT, range(1, 16), t=3, q=3, b=2)
    for i in range(1, 15):
        assert idx.lcp_query(SSA[i - 1], SSA[i]) == SLCP[i]
    assert idx.lcp_query(7, 11) == 3
    for p in range(1, 16):
        assert idx.lcp_query(p, p) == len(TEXT) - p + 1
    for a, c in itertools.combinations(range(1, 16), 2):
        assert idx.lcp_query(a, c) == naive_lcp(TEXT, a, c)
    with pytest.raises(KeyError):
        idx.lcp_query(1, 99)


def test_lcp_query_all_pairs_random():
    rng = random.Random(5)
    text = random_text(rng, 400)
    pos = rng.sample(range(1, 401), 120)
    idx = build_index(text, pos, t=4, q=3, b=3)
    for a, c in itertools.combinations(pos, 2):
        assert idx.lcp_query(a, c) == naive_lcp(text, a, c)


# -- SAVL ------------------------------------------------------------------------------------------------

def test_savl_example_annotations():
    tree = savl_of(TEXT, range(1, 16))
    nodes = {node.pos: node for node, _, _ in walk_with_ancestors(tree.root)}
    assert (nodes[11].m, nodes[11].d) == (3, LEFT)
    assert (nodes[14].m, nodes[14].d) == (2, LEFT)
    assert (nodes[4].m, nodes[4].d) == (0, BOTTOM)
    assert savl_ssa(tree) == SSA


def test_savl_first_insertion():
    tree = SavlTree(TEXT)
    node = tree.insert(6)
    assert tree.root is node and (node.d, node.m) == (BOTTOM, 0)


def test_savl_example_slcp_and_rules():
    tree = savl_of(TEXT, range(1, 16))
    assert savl_slcp(tree) == SLCP
    assert tree.rules == RULES
    assert tree.visits <= 3 * len(tree)


def test_savl_trivial_shapes():
    assert savl_slcp(SavlTree(TEXT)) == []
    assert savl_ssa(SavlTree(TEXT)) == []
    tree = savl_of(TEXT, [9])
    assert savl_slcp(tree) == [0]
    assert tree.rules == ["E"]


def test_savl_rejects_duplicates():
    tree = savl_of(TEXT, [1, 2])
    with pytest.raises(ValueError):
        tree.insert(2)
    with pytest.raises(IndexError):
        tree.insert(0)


def test_lemma_resolve_examples():
    assert lemma_resolve(1, 3, LEFT) == (3, 1)
    assert lemma_resolve(4, 2, RIGHT) == (4, 2)
    assert lemma_resolve(7, 0, BOTTOM) == (0, 0)
    # node 11 of the example: cla = 7, cra = 5
    tree = savl_of(TEXT, range(1, 16))
    for node, cla, cra in walk_with_ancestors(tree.root):
        if node.pos == 11:
            assert (cla.pos, cra.pos) == (7, 5)
            L = naive_lcp(TEXT, cla.pos, cra.pos)
            assert L == 1
            assert lemma_resolve(L, node.m, node.d) == (
                naive_lcp(TEXT, 11, 7), naive_lcp(TEXT, 11, 5)) == (3, 1)


def check_resolve_everywhere(text, tree):
    for node, cla, cra in walk_with_ancestors(tree.root):
        L = naive_lcp(text, cla.pos, cra.pos) if cla and cra else 0
        la = naive_lcp(text, node.pos, cla.pos) if cla else 0
        ra = naive_lcp(text, node.pos, cra.pos) if cra else 0
        assert lemma_resolve(L, node.m, node.d) == (la, ra)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("order", ["increasing", "random"])
def test_savl_random_matches_brute_force(seed, order):
    rng = random.Random(seed)
    text = random_text(rng, rng.randint(1, 300), b"ab" if seed % 2 else b"abc")
    pos = rng.sample(range(1, len(text) + 1), rng.randint(1, len(text)))
    if order == "increasing":
        pos.sort()
    tree = savl_of(text, pos)
    exp_ssa, exp_slcp = brute_force_ssa(text, pos)
    assert savl_ssa(tree) == exp_ssa
    assert savl_slcp(tree) == exp_slcp
    assert tree.visits <= 3 * len(pos)
    check_resolve_everywhere(text, tree)


@given(st.binary(min_size=1, max_size=40), st.data())
def test_structures_agree(text, data):
    n = len(text)
    pos = data.draw(st.lists(st.integers(1, n), unique=True, min_size=1, max_size=n))
    exp = brute_force_ssa(text, pos)
    tree = savl_of(text, pos)
    idx = build_index(text, pos, t=3, q=3, b=2)
    assert (savl_ssa(tree), savl_slcp(tree)) == exp == idx.dump()
    check_resolve_everywhere(text, tree)


def test_savl_unaccelerated_matches():
    rng = random.Random(7)
    text = random_text(rng, 200)
    pos = rng.sample(range(1, 201), 150)
    a = savl_of(text, pos)
    b = SavlTree(text, accelerated=False)
    for p in pos:
        b.insert(p)
    assert [(x.pos, x.d, x.m) for x, _, _ in walk_with_ancestors(a.root)] == \
        [(x.pos, x.d, x.m) for x, _, _ in walk_with_ancestors(b.root)]
