import math
import random

import pytest
from hypothesis import given, strategies as st

from sbtree.varcode import (BitReader, BitWriter, DiffLeaf, TruncatedStream, chunk_table,
                            delta_decode, delta_encode, delta_len, diffleaf_bits,
                            diffleaf_insert, diffleaf_remove, diffleaf_search,
                            gamma_decode, gamma_encode, gamma_len)


def test_gamma_examples():
    assert gamma_encode(1) == "1"
    assert gamma_encode(5) == "00101"
    assert gamma_encode(2) == "010"


def test_delta_examples():
    assert delta_encode(1) == "1"
    assert delta_encode(17) == "00101" + "0001"


def test_code_lengths():
    for x in (1, 2, 3, 7, 8, 1000, 2**40 + 3):
        assert len(gamma_encode(x)) == gamma_len(x) == 2 * int(math.log2(x)) + 1
        assert len(delta_encode(x)) == delta_len(x)


def test_zero_is_rejected():
    with pytest.raises(ValueError):
        gamma_encode(0)
    with pytest.raises(ValueError):
        delta_encode(0)


def test_truncated_stream():
    with pytest.raises(TruncatedStream):
        gamma_decode(BitReader.from_str("001"))
    with pytest.raises(TruncatedStream):
        gamma_decode(BitReader.from_str("000"))
    with pytest.raises(TruncatedStream):
        delta_decode(BitReader.from_str("0010"))
    with pytest.raises(TruncatedStream):
        BitReader.from_str("").read(1)


@given(st.lists(st.integers(1, 10**6), min_size=1, max_size=50))
def test_roundtrip_mixed_stream(xs):
    w = BitWriter()
    for i, x in enumerate(xs):
        (w.write_gamma if i % 2 else w.write_delta)(x)
    r = BitReader(*w.getvalue())
    out = [(r.read_gamma() if i % 2 else r.read_delta()) for i in range(len(xs))]
    assert out == xs
    assert r.remaining() == 0


def test_roundtrip_random_range():
    rng = random.Random(3)
    for _ in range(2000):
        x = rng.randint(1, 10**6)
        assert gamma_decode(BitReader.from_str(gamma_encode(x))) == x
        assert delta_decode(BitReader.from_str(delta_encode(x))) == x


def test_chunk_table_entry():
    # "1" "010" "011" "00100" -> 1, 2, 3, 4 then a straddling prefix
    bits = "1" + "010" + "011" + "00100" + "0001"
    vals, ends = chunk_table("gamma")[int(bits, 2)]
    assert vals == (1, 2, 3, 4)
    assert ends == (1, 4, 7, 12)


def leaf_of(keys, code="gamma", width=32):
    leaf = DiffLeaf(len(keys) + 8, width, code)
    for k in keys:
        leaf.push_back(k)
    return leaf


def test_search_examples():
    leaf = leaf_of([10, 12, 19])
    assert diffleaf_search(leaf, 12) == 2
    assert diffleaf_search(leaf, 5) == 0
    assert diffleaf_search(leaf, 100) == 3


def test_insert_splits_gap():
    leaf = leaf_of([10, 20])
    assert leaf.nbits == gamma_len(10)
    diffleaf_insert(leaf, 15)
    assert leaf.to_list() == [10, 15, 20]
    assert leaf.nbits == 2 * gamma_len(5)


def test_remove_fuses_gaps():
    leaf = leaf_of([10, 15, 20])
    diffleaf_remove(leaf, 15)
    assert leaf.to_list() == [10, 20]
    assert leaf.nbits == gamma_len(10)


def test_bits_examples():
    assert diffleaf_bits(leaf_of([7], width=32)) == 32
    assert diffleaf_bits(leaf_of([10, 11, 12], width=32)) == 32 + 2


def test_duplicates_and_missing_rejected():
    leaf = leaf_of([1, 5])
    with pytest.raises(ValueError):
        diffleaf_insert(leaf, 5)
    with pytest.raises(KeyError):
        diffleaf_remove(leaf, 3)
    with pytest.raises(ValueError):
        leaf.insert_at(1, 9)


@pytest.mark.parametrize("code", ["gamma", "delta"])
def test_random_ops_match_sorted_set(code):
    rng = random.Random(11)
    leaf = DiffLeaf(10**5, 24, code)
    ref = set()
    for _ in range(10**4):
        x = rng.randrange(1 << 24)
        # keep the leaf near a few hundred keys so sequential decoding stays cheap
        if rng.random() < (0.6 if len(ref) < 300 else 0.4):
            if x in ref:
                continue
            diffleaf_insert(leaf, x)
            ref.add(x)
        elif ref:
            y = rng.choice(sorted(ref))
            ref.discard(y)
            diffleaf_remove(leaf, y)
    srt = sorted(ref)
    assert leaf.to_list() == srt
    assert leaf.bits() == leaf.recount_bits()
    q = rng.randrange(1 << 24)
    assert diffleaf_search(leaf, q) == sum(v <= q for v in srt)


@given(st.sets(st.integers(0, 2**16 - 1), max_size=40), st.integers(0, 2**16))
def test_search_matches_uncompressed(keys, q):
    srt = sorted(keys)
    leaf = leaf_of(srt, code="delta", width=16)
    assert leaf.rank_of(q) == sum(v <= q for v in srt)
    assert leaf.rank_lt(q) == sum(v < q for v in srt)
    assert [leaf.get(i) for i in range(len(srt))] == srt


@given(st.sets(st.integers(0, 2**20), min_size=1, max_size=30), st.integers(0, 30))
def test_cut_paste_without_reencoding(keys, cut):
    srt = sorted(keys)
    cut = min(cut, len(srt))
    a = leaf_of(srt)
    b = DiffLeaf(64, 32)
    b.paste_back(a.cut_back(cut))
    assert a.to_list() + b.to_list() == srt
    assert a.bits() == a.recount_bits() and b.bits() == b.recount_bits()


def test_capacity_bits_grow_and_shrink():
    leaf = DiffLeaf(1000, 32)
    for k in range(0, 50000, 50):
        leaf.push_back(k)
    grown = leaf.capacity_bits
    assert grown >= leaf.nbits
    while len(leaf) > 2:
        leaf.pop_back()
    assert leaf.capacity_bits < grown
