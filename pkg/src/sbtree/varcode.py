"""Elias gamma/delta codes and difference-coded leaf arrays.

Bit streams are MSB-first: the first bit written is the most significant
bit of the backing integer.  A stream of ``n`` bits is the pair
``(value, n)`` with ``0 <= value < 2**n``.

gamma(x), x >= 1:  floor(lg x) zeros, then x in floor(lg x)+1 bits.
delta(x), x >= 1:  gamma(floor(lg x)+1), then the low floor(lg x) bits of x.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterator, Optional

CHUNK_BITS = 16


class TruncatedStream(ValueError):
    """A code ran past the end of the bit stream."""


# -- single codes ----------------------------------------------------------

def gamma_code(x: int) -> tuple[int, int]:
    """Return ``(bits, length)`` of the gamma code of ``x``."""
    if x < 1:
        raise ValueError("gamma code needs x >= 1")
    nb = x.bit_length()
    return x, 2 * nb - 1


def delta_code(x: int) -> tuple[int, int]:
    if x < 1:
        raise ValueError("delta code needs x >= 1")
    nb = x.bit_length()
    g, glen = gamma_code(nb)
    low = nb - 1
    return (g << low) | (x & ((1 << low) - 1)), glen + low


def gamma_len(x: int) -> int:
    return 2 * x.bit_length() - 1


def delta_len(x: int) -> int:
    nb = x.bit_length()
    return gamma_len(nb) + nb - 1


def _to_str(code: tuple[int, int]) -> str:
    bits, n = code
    return format(bits, f"0{n}b") if n else ""


def gamma_encode(x: int) -> str:
    return _to_str(gamma_code(x))


def delta_encode(x: int) -> str:
    return _to_str(delta_code(x))


class BitWriter:
    def __init__(self):
        self.value = 0
        self.length = 0

    def write(self, bits: int, n: int) -> None:
        self.value = (self.value << n) | bits
        self.length += n

    def write_gamma(self, x: int) -> None:
        self.write(*gamma_code(x))

    def write_delta(self, x: int) -> None:
        self.write(*delta_code(x))

    def getvalue(self) -> tuple[int, int]:
        return self.value, self.length

    def to_str(self) -> str:
        return _to_str((self.value, self.length))


class BitReader:
    def __init__(self, value: int, length: int, cursor: int = 0):
        self.value = value
        self.length = length
        self.cursor = cursor

    @classmethod
    def from_str(cls, s: str) -> "BitReader":
        return cls(int(s, 2) if s else 0, len(s))

    def remaining(self) -> int:
        return self.length - self.cursor

    def read(self, n: int) -> int:
        if n > self.length - self.cursor:
            raise TruncatedStream(f"need {n} bits, {self.remaining()} left")
        self.cursor += n
        return (self.value >> (self.length - self.cursor)) & ((1 << n) - 1)

    def peek(self, n: int) -> int:
        """Next ``n`` bits, zero padded past the end of the stream."""
        rem = self.length - self.cursor
        if n <= rem:
            return (self.value >> (rem - n)) & ((1 << n) - 1)
        return (self.value & ((1 << rem) - 1)) << (n - rem)

    def _zeros(self) -> int:
        rem = self.length - self.cursor
        tail = self.value & ((1 << rem) - 1)
        if not tail:
            raise TruncatedStream("no terminating 1 bit")
        return rem - tail.bit_length()

    def read_gamma(self) -> int:
        z = self._zeros()
        if 2 * z + 1 > self.remaining():
            raise TruncatedStream("gamma code truncated")
        self.cursor += z
        return self.read(z + 1)

    def read_delta(self) -> int:
        nb = self.read_gamma()
        return (1 << (nb - 1)) | self.read(nb - 1)


def gamma_decode(reader: BitReader) -> int:
    return reader.read_gamma()


def delta_decode(reader: BitReader) -> int:
    return reader.read_delta()


# -- chunk decode tables -----------------------------------------------------

@lru_cache(maxsize=None)
def chunk_table(code: str) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    """For every 16-bit chunk: the complete codes it holds and their end offsets.

    Entry ``t[c] = (values, ends)``; ``ends[i]`` is the bit offset just past
    the ``i``-th code.  A code running past the chunk end is left out, so the
    caller resumes at ``ends[-1]`` (or decodes the straddler bit by bit).
    """
    read = "read_gamma" if code == "gamma" else "read_delta"
    table = []
    for c in range(1 << CHUNK_BITS):
        r = BitReader(c, CHUNK_BITS)
        vals: list[int] = []
        ends: list[int] = []
        while True:
            try:
                vals.append(getattr(r, read)())
            except TruncatedStream:
                break
            ends.append(r.cursor)
        table.append((tuple(vals), tuple(ends)))
    return tuple(table)


# -- difference-coded leaf -----------------------------------------------------

_CODES: dict[str, tuple[Callable[[int], tuple[int, int]], Callable[[int], int]]] = {
    "gamma": (gamma_code, gamma_len),
    "delta": (delta_code, delta_len),
}


class DiffLeaf:
    """Strictly increasing integer keys: the first key plain in ``k`` bits,
    every further key as the coded gap to its predecessor.

    Offers the same surface as :class:`~sbtree.packed.PackedKeyBuffer` so it
    can back a tree leaf.  ``capacity`` bounds the number of keys, while the
    bit storage grows and shrinks with the content.
    """

    __slots__ = ("capacity", "width", "code", "first_key", "stream", "nbits",
                 "_count", "_last", "capacity_bits", "_encode", "_codelen",
                 "moved", "words_touched")

    def __init__(self, capacity: int, width: int, code: str = "gamma"):
        if code not in _CODES:
            raise ValueError(f"unknown code {code!r}")
        self.capacity = capacity
        self.width = width
        self.code = code
        self._encode, self._codelen = _CODES[code]
        self.first_key: Optional[int] = None
        self.stream = 0
        self.nbits = 0
        self._count = 0
        self._last: Optional[int] = None
        self.capacity_bits = 64
        self.moved = 0
        self.words_touched = 0

    # -- stream surgery --------------------------------------------------

    def _splice(self, pos: int, cut: int, bits: int, n: int) -> None:
        """Replace stream bits [pos, pos+cut) by the ``n``-bit string ``bits``."""
        tail_len = self.nbits - pos - cut
        tail = self.stream & ((1 << tail_len) - 1)
        head = self.stream >> (self.nbits - pos)
        self.stream = (((head << n) | bits) << tail_len) | tail
        self.nbits = pos + n + tail_len
        self.words_touched += (tail_len + 63) // 64
        while self.nbits > self.capacity_bits:
            self.capacity_bits *= 2
        while self.capacity_bits > 64 and self.nbits < self.capacity_bits // 4:
            self.capacity_bits //= 2

    def _gaps(self, start_pos: int = 0) -> Iterator[tuple[int, int]]:
        """Yield ``(gap, end_pos)`` for the codes from ``start_pos`` onward."""
        table = chunk_table(self.code)
        reader = BitReader(self.stream, self.nbits, start_pos)
        read = reader.read_gamma if self.code == "gamma" else reader.read_delta
        while reader.cursor < self.nbits:
            if reader.remaining() >= CHUNK_BITS:
                vals, ends = table[reader.peek(CHUNK_BITS)]
                if vals:
                    base = reader.cursor
                    for v, e in zip(vals, ends):
                        yield v, base + e
                    reader.cursor = base + ends[-1]
                    continue
            # code straddles the chunk end or the stream is short
            v = read()
            yield v, reader.cursor

    def _seek(self, j: int) -> tuple[int, int]:
        """Position of the code for key ``j`` (j >= 1) and the value of key j-1."""
        key = self.first_key
        pos = 0
        if j == 1:
            return 0, key
        i = 1
        for gap, end in self._gaps():
            key += gap
            i += 1
            pos = end
            if i == j:
                return pos, key
        raise IndexError(j)

    def _code_at(self, pos: int) -> tuple[int, int]:
        r = BitReader(self.stream, self.nbits, pos)
        v = r.read_gamma() if self.code == "gamma" else r.read_delta()
        return v, r.cursor - pos

    # -- key-store surface --------------------------------------------------

    def __len__(self) -> int:
        return self._count

    def is_full(self) -> bool:
        return self._count == self.capacity

    def __iter__(self) -> Iterator[int]:
        if not self._count:
            return
        key = self.first_key
        yield key
        for gap, _ in self._gaps():
            key += gap
            yield key

    def to_list(self) -> list[int]:
        return list(self)

    def get(self, i: int) -> int:
        if not 0 <= i < self._count:
            raise IndexError(i)
        if i == self._count - 1:
            return self._last
        if i == 0:
            return self.first_key
        pos, prev = self._seek(i)
        return prev + self._code_at(pos)[0]

    __getitem__ = get

    def first(self) -> int:
        return self.get(0)

    def last(self) -> int:
        return self.get(self._count - 1)

    def rank_of(self, key: int, cmp=None) -> int:
        """Number of stored keys <= ``key`` (sequential chunked decode)."""
        if not self._count or key < self.first_key:
            return 0
        if key >= self._last:
            return self._count
        r = 1
        cur = self.first_key
        for gap, _ in self._gaps():
            cur += gap
            if cur > key:
                return r
            r += 1
        return r

    def rank_lt(self, key: int, cmp=None) -> int:
        return self.rank_of(key - 1)

    def search(self, key: int) -> int:
        return self.rank_of(key)

    def insert_at(self, rank: int, key: int) -> None:
        n = self._count
        if n == self.capacity:
            from .packed import BufferFull
            raise BufferFull("insert into full leaf")
        if not 0 <= rank <= n:
            raise IndexError(rank)
        if key < 0 or key >> self.width:
            raise ValueError(f"key {key} does not fit in {self.width} bits")
        enc = self._encode
        if n == 0:
            self.first_key = self._last = key
        elif rank == 0:
            if key >= self.first_key:
                raise ValueError("keys must be strictly increasing")
            self._splice(0, 0, *enc(self.first_key - key))
            self.first_key = key
        elif rank == n:
            if key <= self._last:
                raise ValueError("keys must be strictly increasing")
            self._splice(self.nbits, 0, *enc(key - self._last))
            self._last = key
        else:
            pos, prev = self._seek(rank)
            gap, glen = self._code_at(pos)
            nxt = prev + gap
            if not prev < key < nxt:
                raise ValueError("keys must be strictly increasing")
            a, alen = enc(key - prev)
            b, blen = enc(nxt - key)
            self._splice(pos, glen, (a << blen) | b, alen + blen)
        self._count = n + 1
        self.moved += 1

    def remove_at(self, rank: int) -> int:
        n = self._count
        if not 0 <= rank < n:
            raise IndexError(rank)
        if n == 1:
            key = self.first_key
            self.first_key = self._last = None
            self.stream = self.nbits = 0
        elif rank == 0:
            key = self.first_key
            gap, glen = self._code_at(0)
            self._splice(0, glen, 0, 0)
            self.first_key = key + gap
        elif rank == n - 1:
            key = self._last
            pos, prev = self._seek(rank)
            self._splice(pos, self.nbits - pos, 0, 0)
            self._last = prev
        else:
            pos, prev = self._seek(rank)
            g1, l1 = self._code_at(pos)
            g2, l2 = self._code_at(pos + l1)
            key = prev + g1
            self._splice(pos, l1 + l2, *self._encode(g1 + g2))
        self._count = n - 1
        self.moved += 1
        return key

    def insert(self, key: int) -> None:
        r = self.rank_of(key)
        if r and self.get(r - 1) == key:
            raise ValueError(f"duplicate key {key}")
        self.insert_at(r, key)

    def remove(self, key: int) -> None:
        r = self.rank_of(key)
        if not r or self.get(r - 1) != key:
            raise KeyError(key)
        self.remove_at(r - 1)

    def push_front(self, key: int) -> None:
        self.insert_at(0, key)

    def push_back(self, key: int) -> None:
        self.insert_at(self._count, key)

    def pop_front(self) -> int:
        from .packed import BufferEmpty
        if not self._count:
            raise BufferEmpty("pop_front on empty leaf")
        return self.remove_at(0)

    def pop_back(self) -> int:
        from .packed import BufferEmpty
        if not self._count:
            raise BufferEmpty("pop_back on empty leaf")
        return self.remove_at(self._count - 1)

    def cut_back(self, count: int) -> tuple[int, int, int, int]:
        """Detach the last ``count`` keys as a stream chunk (no re-encoding)."""
        n = self._count
        if not 0 <= count <= n:
            raise IndexError(count)
        if count == 0:
            return (0, 0, 0, 0)
        last = self._last
        if count == n:
            chunk = (self.first_key, self.stream, self.nbits, count)
            self.first_key = self._last = None
            self.stream = self.nbits = 0
            self._count = 0
            return chunk + (last,)
        j = n - count
        pos, prev = self._seek(j)
        gap, glen = self._code_at(pos)
        tail_start = pos + glen
        tail_len = self.nbits - tail_start
        tail = self.stream & ((1 << tail_len) - 1)
        self._splice(pos, self.nbits - pos, 0, 0)
        self._last = prev
        self._count = j
        return (prev + gap, tail, tail_len, count, last)

    def paste_back(self, chunk) -> None:
        if not chunk[3]:
            return
        first, tail, tail_len, count, last = chunk
        if self._count + count > self.capacity:
            from .packed import BufferFull
            raise BufferFull("paste overflows leaf")
        if self._count == 0:
            self.first_key = first
            self.stream, self.nbits = tail, tail_len
            while self.nbits > self.capacity_bits:
                self.capacity_bits *= 2
        else:
            if first <= self._last:
                raise ValueError("keys must be strictly increasing")
            g, glen = self._encode(first - self._last)
            self._splice(self.nbits, 0, (g << tail_len) | tail, glen + tail_len)
        self._last = last
        self._count += count

    # -- space --------------------------------------------------------------

    def bits(self) -> int:
        """Exact stored bits: ``k`` for the plain first key plus the gap codes."""
        return self.width + self.nbits if self._count else 0

    def recount_bits(self) -> int:
        keys = self.to_list()
        return (self.width + sum(self._codelen(b - a) for a, b in zip(keys, keys[1:]))
                if keys else 0)

    def model_bits(self) -> int:
        return self.bits()

    def __repr__(self) -> str:
        return f"DiffLeaf({self.to_list()!r}, code={self.code!r})"


def diffleaf_bits(leaf: DiffLeaf) -> int:
    return leaf.bits()


def diffleaf_search(leaf: DiffLeaf, key: int) -> int:
    return leaf.rank_of(key)


def diffleaf_insert(leaf: DiffLeaf, key: int) -> None:
    leaf.insert(key)


def diffleaf_remove(leaf: DiffLeaf, key: int) -> None:
    leaf.remove(key)
