"""Fixed-width packed circular buffers used as B tree leaf arrays.

Slots are packed little-endian into a ``bytearray``; a slot may straddle
byte (and word) boundaries.  Bulk shifts read a whole run of slots as one
integer, shift it by one slot width and write it back, so an interior
insertion costs O(b*k/w) word operations instead of O(b) slot moves.
"""

from __future__ import annotations

import sys
from typing import Callable, Iterator, Optional

import numpy as np

WORD_BITS = 64
_DTYPES = {8: "<u1", 16: "<u2", 32: "<u4", 64: "<u8"}
_VIEW_CODES = {8: "B", 16: "H", 32: "I", 64: "Q"}

# cmp(query, stored) -> negative / zero / positive
Comparator = Callable[[int, int], int]


class BufferFull(OverflowError):
    pass


class BufferEmpty(IndexError):
    pass


class PackedKeyBuffer:
    """Circular buffer of ``capacity`` slots of ``width`` bits each.

    Logical slot ``i`` lives in physical slot ``(head + i) % capacity``.
    """

    __slots__ = ("capacity", "width", "head", "_len", "_buf", "_mask", "_view",
                 "moved", "words_touched")

    def __init__(self, capacity: int, width: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if not 1 <= width <= WORD_BITS:
            raise ValueError(f"width must be in [1, {WORD_BITS}]")
        self.capacity = capacity
        self.width = width
        self.head = 0
        self._len = 0
        # one spare byte so that reads of the last slot never run off the end;
        # slots beyond the logical length hold stale bits and are never read
        self._buf = bytearray((capacity * width + 7) // 8 + 1)
        self._mask = (1 << width) - 1
        # byte-aligned widths get a typed view for single-slot reads; the
        # buffer is only ever overwritten in place, so the view stays valid
        code = _VIEW_CODES.get(width)
        self._view = (memoryview(self._buf)[:capacity * width // 8].cast(code)
                      if code is not None and sys.byteorder == "little" else None)
        # instrumentation
        self.moved = 0
        self.words_touched = 0

    # -- raw bit access -------------------------------------------------

    def _rd(self, bitpos: int, nbits: int) -> int:
        b0 = bitpos >> 3
        b1 = (bitpos + nbits + 7) >> 3
        self.words_touched += (b1 - b0 + 7) >> 3
        v = int.from_bytes(self._buf[b0:b1], "little") >> (bitpos & 7)
        return v & ((1 << nbits) - 1)

    def _wr(self, bitpos: int, nbits: int, value: int) -> None:
        b0 = bitpos >> 3
        b1 = (bitpos + nbits + 7) >> 3
        self.words_touched += (b1 - b0 + 7) >> 3
        sh = bitpos & 7
        old = int.from_bytes(self._buf[b0:b1], "little")
        m = ((1 << nbits) - 1) << sh
        self._buf[b0:b1] = ((old & ~m) | (value << sh)).to_bytes(b1 - b0, "little")

    def _phys(self, i: int) -> int:
        p = self.head + i
        return p - self.capacity if p >= self.capacity else p

    def _read_run(self, lo: int, count: int) -> int:
        """Logical slots [lo, lo+count) as one integer, slot lo in the low bits."""
        if count <= 0:
            return 0
        w = self.width
        p = self._phys(lo)
        first = min(count, self.capacity - p)
        v = self._rd(p * w, first * w)
        if first < count:
            v |= self._rd(0, (count - first) * w) << (first * w)
        return v

    def _write_run(self, lo: int, count: int, value: int) -> None:
        if count <= 0:
            return
        w = self.width
        p = self._phys(lo)
        first = min(count, self.capacity - p)
        self._wr(p * w, first * w, value & ((1 << (first * w)) - 1))
        if first < count:
            self._wr(0, (count - first) * w, value >> (first * w))

    # -- element access -------------------------------------------------

    def __len__(self) -> int:
        return self._len

    def is_full(self) -> bool:
        return self._len == self.capacity

    def get(self, i: int) -> int:
        if not 0 <= i < self._len:
            raise IndexError(f"slot {i} out of range for length {self._len}")
        p = self.head + i
        if p >= self.capacity:
            p -= self.capacity
        self.words_touched += 1
        if self._view is not None:
            return self._view[p]
        bitpos = p * self.width
        v = int.from_bytes(self._buf[bitpos >> 3:(bitpos + self.width + 7) >> 3], "little")
        return (v >> (bitpos & 7)) & self._mask

    __getitem__ = get

    def set(self, i: int, value: int) -> None:
        if not 0 <= i < self._len:
            raise IndexError(f"slot {i} out of range for length {self._len}")
        self._wr(self._phys(i) * self.width, self.width, value & self._mask)

    def first(self) -> int:
        return self.get(0)

    def last(self) -> int:
        return self.get(self._len - 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.slice(0, self._len))

    def to_list(self) -> list[int]:
        return self.slice(0, self._len)

    def slice(self, lo: int, count: int) -> list[int]:
        """Decode logical slots [lo, lo+count)."""
        if count <= 0:
            return []
        if lo < 0 or lo + count > self._len:
            raise IndexError("slice out of range")
        w = self.width
        if w in (8, 16, 32, 64):
            # byte-aligned slots: view the bytes directly, at most two pieces
            nb = w >> 3
            p = self._phys(lo)
            first = min(count, self.capacity - p)
            raw = self._buf[p * nb:(p + first) * nb]
            if first < count:
                raw += self._buf[:(count - first) * nb]
            self.words_touched += (count * w + 63) >> 6
            return np.frombuffer(raw, dtype=_DTYPES[w]).tolist()
        return self._unpack(self._read_run(lo, count), count)

    def _unpack(self, run: int, count: int) -> list[int]:
        w = self.width
        if w % 8 == 0 and w in (8, 16, 32, 64):
            raw = run.to_bytes(count * (w // 8), "little")
            return np.frombuffer(raw, dtype=f"<u{w // 8}").tolist()
        m = self._mask
        return [(run >> (i * w)) & m for i in range(count)]

    # -- end operations, O(1) words --------------------------------------

    def push_back(self, value: int) -> None:
        if self._len == self.capacity:
            raise BufferFull("push_back on full buffer")
        self._len += 1
        self.set(self._len - 1, value)

    def push_front(self, value: int) -> None:
        if self._len == self.capacity:
            raise BufferFull("push_front on full buffer")
        self.head = self.head - 1 if self.head else self.capacity - 1
        self._len += 1
        self.set(0, value)

    def pop_back(self) -> int:
        if not self._len:
            raise BufferEmpty("pop_back on empty buffer")
        v = self.get(self._len - 1)
        self._len -= 1
        return v

    def pop_front(self) -> int:
        if not self._len:
            raise BufferEmpty("pop_front on empty buffer")
        v = self.get(0)
        self.head = self._phys(1)
        self._len -= 1
        if not self._len:
            self.head = 0
        return v

    # -- interior operations, shorter side moved ---------------------------

    def insert_at(self, rank: int, value: int) -> None:
        n = self._len
        if n == self.capacity:
            raise BufferFull("insert into full buffer")
        if not 0 <= rank <= n:
            raise IndexError(f"rank {rank} out of range for length {n}")
        if n - rank <= rank:
            run = self._read_run(rank, n - rank)
            self._len = n + 1
            self._write_run(rank + 1, n - rank, run)
            self.moved += n - rank
        else:
            run = self._read_run(0, rank)
            self.head = self.head - 1 if self.head else self.capacity - 1
            self._len = n + 1
            self._write_run(0, rank, run)
            self.moved += rank
        self.set(rank, value)

    def remove_at(self, rank: int) -> int:
        n = self._len
        if not 0 <= rank < n:
            raise IndexError(f"rank {rank} out of range for length {n}")
        v = self.get(rank)
        if n - 1 - rank <= rank:
            run = self._read_run(rank + 1, n - 1 - rank)
            self._write_run(rank, n - 1 - rank, run)
            self._len = n - 1
            self.moved += n - 1 - rank
        else:
            run = self._read_run(0, rank)
            self._write_run(1, rank, run)
            self.head = self._phys(1)
            self._len = n - 1
            self.moved += rank
        if not self._len:
            self.head = 0
        return v

    # -- bulk transfer (leaf splits) --------------------------------------

    def cut_back(self, count: int) -> tuple[int, int]:
        """Detach the last ``count`` slots; returns an opaque chunk."""
        if not 0 <= count <= self._len:
            raise IndexError("cut larger than buffer")
        lo = self._len - count
        run = self._read_run(lo, count)
        self._len = lo
        if not self._len:
            self.head = 0
        return run, count

    def paste_back(self, chunk: tuple[int, int]) -> None:
        run, count = chunk
        if self._len + count > self.capacity:
            raise BufferFull("paste overflows buffer")
        lo = self._len
        self._len += count
        self._write_run(lo, count, run)

    @classmethod
    def from_values(cls, capacity: int, width: int, values) -> "PackedKeyBuffer":
        buf = cls(capacity, width)
        for v in values:
            buf.push_back(v)
        return buf

    # -- search ---------------------------------------------------------

    def _bsearch(self, key: int, cmp: Optional[Comparator], strict: bool) -> int:
        lo, hi = 0, self._len
        head, cap, w, buf, mask = self.head, self.capacity, self.width, self._buf, self._mask
        probes = 0
        view = self._view
        if view is not None and cmp is None:
            while lo < hi:
                mid = (lo + hi) >> 1
                p = head + mid
                if p >= cap:
                    p -= cap
                probes += 1
                if (view[p] < key) if strict else (view[p] <= key):
                    lo = mid + 1
                else:
                    hi = mid
            self.words_touched += probes
            return lo
        while lo < hi:
            mid = (lo + hi) >> 1
            p = head + mid
            if p >= cap:
                p -= cap
            bitpos = p * w
            v = (int.from_bytes(buf[bitpos >> 3:(bitpos + w + 7) >> 3], "little")
                 >> (bitpos & 7)) & mask
            probes += 1
            if cmp is None:
                go_right = v < key if strict else v <= key
            else:
                c = cmp(key, v)
                go_right = c > 0 if strict else c >= 0
            if go_right:
                lo = mid + 1
            else:
                hi = mid
        self.words_touched += probes
        return lo

    def rank_of(self, key: int, cmp: Optional[Comparator] = None) -> int:
        """Number of stored keys <= ``key``."""
        return self._bsearch(key, cmp, False)

    def rank_lt(self, key: int, cmp: Optional[Comparator] = None) -> int:
        """Number of stored keys < ``key``."""
        return self._bsearch(key, cmp, True)

    def model_bits(self) -> int:
        return self.capacity * self.width

    def __repr__(self) -> str:
        return f"PackedKeyBuffer({self.to_list()!r}, capacity={self.capacity}, width={self.width})"


# Satellite values share the geometry; only the ordering contract differs.
SatelliteBuffer = PackedKeyBuffer
