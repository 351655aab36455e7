"""Sparse direct-address substring hash tables.

Buckets are grouped 32 at a time.  Each group carries a 32-bit occupancy
word; ids are laid out bucket by bucket in one contiguous ``entries`` array
and each non-empty bucket records where its segment starts.  A bucket is
located by reading its group's occupancy word and popcounting the bits
below it, so no collision handling is ever needed.

When the group directory would be huge (very wide substrings) only the
non-empty groups are kept and located by binary search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._kernels import direct_ranks, gather_fresh
from .ball import ring_masks

GROUP_BITS = 5
GROUP_SIZE = 1 << GROUP_BITS
MAX_KEY_BITS = 64
# Direct directories above this many groups (s > 27) cost >32 MiB per table.
DIRECT_GROUP_LIMIT = 1 << 22

_U64 = np.uint64


def num_groups(s: int) -> int:
    return 1 << (s - GROUP_BITS) if s >= GROUP_BITS else 1


@dataclass(frozen=True)
class TableStats:
    non_empty_buckets: int
    max_bucket_size: int
    total_entries: int
    estimated_bytes: int
    non_empty_groups: int = 0


def table_memory_bytes(s: int, non_empty_groups: int, non_empty_buckets: int, entries: int) -> int:
    """Memory of a sparse table under the 32-bucket group layout.

    Every group costs a 64-bit array pointer plus a 32-bit occupancy word.
    A group that owns a backing array adds three 32-bit bookkeeping fields,
    every non-empty bucket a 32-bit segment start and every entry a 32-bit id.
    """
    return (
        num_groups(s) * (8 + 4)
        + non_empty_groups * 12
        + non_empty_buckets * 4
        + entries * 4
    )


class SubstringTable:
    """Immutable table mapping an ``s``-bit substring value to code ids."""

    def __init__(
        self,
        s: int,
        group_ids: np.ndarray,
        occupancy: np.ndarray,
        offsets: np.ndarray,
        entries: np.ndarray,
    ):
        if not 0 <= s <= MAX_KEY_BITS:
            raise ValueError(f"substring width must be in [0, {MAX_KEY_BITS}], got {s}")
        self.s = s
        self.group_ids = np.asarray(group_ids, dtype=_U64)
        self.occupancy = np.asarray(occupancy, dtype=np.uint32)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.entries = np.asarray(entries, dtype=np.uint32)
        self._check_layout()

        counts = np.bitwise_count(self.occupancy).astype(np.int64)
        group_rank = np.zeros(len(counts), dtype=np.int64)
        np.cumsum(counts[:-1], out=group_rank[1:])
        self.bucket_keys = _expand_keys(self.group_ids, self.occupancy)
        self.direct = num_groups(s) <= DIRECT_GROUP_LIMIT
        if self.direct:
            g = num_groups(s)
            self._dir_occ = np.zeros(g, dtype=np.uint32)
            self._dir_rank = np.zeros(g, dtype=np.int64)
            idx = self.group_ids.astype(np.int64)
            self._dir_occ[idx] = self.occupancy
            self._dir_rank[idx] = group_rank
        for arr in (self.group_ids, self.occupancy, self.offsets, self.entries, self.bucket_keys):
            arr.flags.writeable = False

    def _check_layout(self) -> None:
        nb = int(np.bitwise_count(self.occupancy).sum())
        if len(self.group_ids) != len(self.occupancy):
            raise ValueError("group ids and occupancy words must align")
        if len(self.group_ids) and (
            np.any(np.diff(self.group_ids.astype(np.int64)) <= 0)
            or int(self.group_ids[-1]) >= num_groups(self.s)
        ):
            raise ValueError("group ids must be strictly increasing and in range")
        if np.any(self.occupancy == 0):
            raise ValueError("listed groups must have a non-empty bucket")
        if self.s < GROUP_BITS and len(self.occupancy) and int(self.occupancy[0]) >> (1 << self.s):
            raise ValueError("occupancy bits beyond 2**s buckets")
        if len(self.offsets) != nb + 1 or self.offsets[0] != 0 or self.offsets[-1] != len(self.entries):
            raise ValueError("offsets must have one start per non-empty bucket plus an end")
        if nb and np.any(np.diff(self.offsets) <= 0):
            raise ValueError("every non-empty bucket needs at least one entry")

    @classmethod
    def from_values(cls, values: np.ndarray, s: int, ids: np.ndarray | None = None) -> "SubstringTable":
        """Build from substring values; ``ids`` defaults to ``0..len(values)-1``."""
        values = np.asarray(values, dtype=_U64).reshape(-1)
        if ids is None:
            ids = np.arange(len(values), dtype=np.uint32)
        else:
            ids = np.asarray(ids)
            if len(ids) != len(values):
                raise ValueError("values and ids must have equal length")
            if len(ids) and (ids.min() < 0 or ids.max() >= 2**32):
                raise ValueError("ids must fit in 32 bits")
            ids = ids.astype(np.uint32)
        if not 0 <= s <= MAX_KEY_BITS:
            raise ValueError(f"substring width must be in [0, {MAX_KEY_BITS}], got {s}")
        if len(values) and s < 64 and int(values.max()) >> s:
            raise ValueError(f"substring value {int(values.max())} does not fit in {s} bits")

        order = _stable_order(values, s)
        sorted_vals = values[order]
        entries = ids[order]
        if len(values):
            starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
        else:
            starts = np.zeros(0, dtype=np.int64)
        keys = sorted_vals[starts]
        offsets = np.r_[starts, len(values)].astype(np.int64)

        groups = keys >> _U64(GROUP_BITS)
        bit = (keys & _U64(GROUP_SIZE - 1)).astype(np.uint32)
        if len(keys):
            gstarts = np.flatnonzero(np.r_[True, groups[1:] != groups[:-1]])
            occupancy = np.bitwise_or.reduceat(np.left_shift(np.uint32(1), bit), gstarts)
            group_ids = groups[gstarts]
        else:
            occupancy = np.zeros(0, dtype=np.uint32)
            group_ids = np.zeros(0, dtype=_U64)
        return cls(s, group_ids, occupancy, offsets, entries)

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def non_empty_buckets(self) -> int:
        return len(self.bucket_keys)

    def _check_key(self, value: int) -> int:
        value = int(value)
        if value < 0 or value >> self.s:
            raise ValueError(f"value {value} does not fit in {self.s} bits")
        return value

    def bucket_lookup(self, value: int) -> np.ndarray:
        """Ids stored under ``value`` in insertion order (a read-only view)."""
        value = self._check_key(value)
        if self.direct:
            g, bit = value >> GROUP_BITS, value & (GROUP_SIZE - 1)
            word = int(self._dir_occ[g])
            if not (word >> bit) & 1:
                return self.entries[:0]
            rank = int(self._dir_rank[g]) + (word & ((1 << bit) - 1)).bit_count()
        else:
            rank = int(np.searchsorted(self.bucket_keys, _U64(value)))
            if rank == len(self.bucket_keys) or int(self.bucket_keys[rank]) != value:
                return self.entries[:0]
        return self.entries[self.offsets[rank] : self.offsets[rank + 1]]

    def _ranks(self, keys: np.ndarray) -> np.ndarray:
        """Bucket ranks of the non-empty buckets among ``keys``."""
        if self.direct:
            return direct_ranks(keys, self._dir_occ, self._dir_rank)
        pos = np.searchsorted(self.bucket_keys, keys)
        inside = pos < len(self.bucket_keys)
        pos = pos[inside]
        return pos[self.bucket_keys[pos] == keys[inside]]

    def gather(self, ranks: np.ndarray) -> np.ndarray:
        """Concatenate the id segments of the given buckets, in the given order."""
        starts = self.offsets[ranks]
        lens = self.offsets[ranks + 1] - starts
        total = int(lens.sum())
        if total == 0:
            return self.entries[:0]
        shift = np.repeat(starts - (np.cumsum(lens) - lens), lens)
        return self.entries[np.arange(total) + shift]

    def _ring_ranks(self, center: int, radius: int) -> np.ndarray:
        c = _U64(center)
        if math.comb(self.s, radius) <= len(self.bucket_keys):
            return self._ranks(ring_masks(self.s, radius) ^ c)
        d = np.bitwise_count(self.bucket_keys ^ c)
        return np.flatnonzero(d == radius)

    def probe_ring(self, center: int, radius: int) -> tuple[np.ndarray, int]:
        """Ids in every bucket exactly ``radius`` bits from ``center``.

        Returns ``(ids, lookups)`` where ``lookups`` is the number of buckets
        on the ring.  When the ring is larger than the set of non-empty
        buckets, the non-empty buckets are filtered by distance instead of
        enumerating the ring; the returned ids and count are unchanged.
        """
        if radius < 0 or radius > self.s:
            return self.entries[:0], 0
        lookups = math.comb(self.s, radius)
        if len(self.bucket_keys) == 0:
            return self.entries[:0], lookups
        return self.gather(self._ring_ranks(center, radius)), lookups

    def probe_ring_unmarked(self, center: int, radius: int, marks: np.ndarray) -> tuple[np.ndarray, int, int]:
        """Like :meth:`probe_ring` but returns only ids not set in ``marks``, and sets them.

        Returns ``(fresh ids, ids retrieved before filtering, lookups)``.
        """
        if radius < 0 or radius > self.s:
            return np.zeros(0, dtype=np.int64), 0, 0
        lookups = math.comb(self.s, radius)
        if len(self.bucket_keys) == 0:
            return np.zeros(0, dtype=np.int64), 0, lookups
        fresh, candidates = gather_fresh(self._ring_ranks(center, radius), self.offsets, self.entries, marks)
        return fresh, int(candidates), lookups

    def probe_ball(self, center: int, radius: int) -> tuple[np.ndarray, int]:
        """Ids in every bucket within ``radius`` bits of ``center``; see :meth:`probe_ring`."""
        parts, lookups = [], 0
        for r in range(min(radius, self.s) + 1):
            ids, count = self.probe_ring(center, r)
            parts.append(ids)
            lookups += count
        if not parts:
            return self.entries[:0], 0
        return np.concatenate(parts), lookups

    def stats(self) -> TableStats:
        sizes = np.diff(self.offsets)
        return TableStats(
            non_empty_buckets=self.non_empty_buckets,
            max_bucket_size=int(sizes.max()) if len(sizes) else 0,
            total_entries=self.n,
            estimated_bytes=table_memory_bytes(
                self.s, len(self.group_ids), self.non_empty_buckets, self.n
            ),
            non_empty_groups=len(self.group_ids),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubstringTable):
            return NotImplemented
        return (
            self.s == other.s
            and np.array_equal(self.group_ids, other.group_ids)
            and np.array_equal(self.occupancy, other.occupancy)
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.entries, other.entries)
        )


def _stable_order(values: np.ndarray, s: int) -> np.ndarray:
    """Stable argsort as LSD radix passes over 16-bit digits."""
    order = None
    for shift in range(0, max(s, 1), 16):
        digit = ((values >> _U64(shift)) & _U64(0xFFFF)).astype(np.uint16)
        if order is None:
            order = np.argsort(digit, kind="stable")
        else:
            order = order[np.argsort(digit[order], kind="stable")]
    return order


def _expand_keys(group_ids: np.ndarray, occupancy: np.ndarray) -> np.ndarray:
    """Sorted bucket values of all set occupancy bits."""
    out = []
    step = 1 << 18
    for lo in range(0, len(occupancy), step):
        occ = occupancy[lo : lo + step].astype("<u4")
        bits = np.unpackbits(occ.view(np.uint8).reshape(-1, 4), axis=1, bitorder="little")
        gi, bi = np.nonzero(bits)
        out.append((group_ids[lo + gi] << _U64(GROUP_BITS)) | bi.astype(_U64))
    return np.concatenate(out) if out else np.zeros(0, dtype=_U64)


def build_table(pairs: Iterable[tuple[int, int]], s: int) -> SubstringTable:
    """Build a table from ``(value, id)`` pairs."""
    pairs = list(pairs)
    values = np.array([int(v) for v, _ in pairs], dtype=object)
    for v in values:
        if v < 0 or v >> s:
            raise ValueError(f"value {v} does not fit in {s} bits")
    ids = np.array([int(i) for _, i in pairs], dtype=np.int64)
    if len(np.unique(ids)) != len(ids):
        raise ValueError("ids must be unique")
    return SubstringTable.from_values(values.astype(_U64), s, ids)


def bucket_lookup(table: SubstringTable, value: int) -> np.ndarray:
    return table.bucket_lookup(value)


def table_stats(table: SubstringTable) -> TableStats:
    return table.stats()
