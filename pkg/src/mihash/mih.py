"""Multi-index hashing: exact r-neighbor and k-nearest-neighbor search.

Every code is indexed once per substring.  If two codes are within ``r``
bits then, by pigeonhole, some substring pair is within ``r // m`` bits,
and with ``r = m * r_sub + a`` only the first ``a + 1`` tables need the full
substring radius while the rest can use ``r_sub - 1``.  Candidates pulled
from the tables are deduplicated and checked against the full code.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .codes import BinaryCode, CodeDatabase, Partition, consecutive_partition, distances, substring_values
from .table import MAX_KEY_BITS, SubstringTable


@dataclass(frozen=True)
class RadiusSplit:
    r: int
    m: int
    r_sub: int
    a: int

    def table_radius(self, j: int) -> int:
        """Search radius of table ``j``; -1 means the table is skipped."""
        return self.r_sub if j <= self.a else self.r_sub - 1

    @property
    def radii(self) -> tuple[int, ...]:
        return tuple(self.table_radius(j) for j in range(self.m))


def split_radius(r: int, m: int) -> RadiusSplit:
    if r < 0 or m < 1:
        raise ValueError(f"need r >= 0 and m >= 1, got r={r}, m={m}")
    r_sub, a = divmod(r, m)
    return RadiusSplit(r, m, r_sub, a)


@dataclass
class SearchTrace:
    lookups: int = 0
    candidates: int = 0
    unique_candidates: int = 0
    distance_evaluations: int = 0
    final_radius: int | None = None


@dataclass(frozen=True, eq=False)
class Neighbors:
    """Result ids with their distances, ordered by (distance, id)."""

    ids: np.ndarray
    distances: np.ndarray

    @classmethod
    def sorted(cls, ids: np.ndarray, dists: np.ndarray) -> "Neighbors":
        ids = np.asarray(ids, dtype=np.int64)
        dists = np.asarray(dists, dtype=np.int64)
        order = np.lexsort((ids, dists))
        return cls(ids[order], dists[order])

    @classmethod
    def empty(cls) -> "Neighbors":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return zip(self.ids.tolist(), self.distances.tolist())

    def pairs(self) -> list[tuple[int, int]]:
        return list(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Neighbors):
            return NotImplemented
        return np.array_equal(self.ids, other.ids) and np.array_equal(self.distances, other.distances)

    def __repr__(self) -> str:
        return f"Neighbors({self.pairs()!r})"


class _Scratch:
    """Per-thread duplicate marks, cleared by resetting only what was marked."""

    def __init__(self, n: int):
        self.marks = np.zeros(n, dtype=bool)
        self.touched: list[np.ndarray] = []

    def record(self, fresh: np.ndarray) -> None:
        self.touched.append(fresh)

    def clear(self) -> None:
        for ids in self.touched:
            self.marks[ids] = False
        self.touched.clear()


def default_num_tables(b: int, n: int) -> int:
    """``round(b / log2 n)`` clamped to ``[1, b]``, and wide enough that substrings fit 64 bits."""
    from .costmodel import choose_num_tables

    m = choose_num_tables(b, max(n, 2))
    return min(b, max(m, math.ceil(b / MAX_KEY_BITS)))


class MihIndex:
    def __init__(self, db: CodeDatabase, partition: Partition, tables: list[SubstringTable]):
        if partition.b != db.b:
            raise ValueError(f"partition covers {partition.b} bits, database has {db.b}")
        if len(tables) != partition.m:
            raise ValueError("need one table per substring")
        for j, t in enumerate(tables):
            if t.s != partition.lengths[j]:
                raise ValueError(f"table {j} is keyed on {t.s} bits, substring has {partition.lengths[j]}")
            if t.n != db.n:
                raise ValueError(f"table {j} holds {t.n} entries, database has {db.n}")
        self.db = db
        self.partition = partition
        self.tables = tables
        self._local = threading.local()

    @property
    def n(self) -> int:
        return self.db.n

    @property
    def b(self) -> int:
        return self.db.b

    @property
    def m(self) -> int:
        return self.partition.m

    def _scratch(self) -> _Scratch:
        scratch = getattr(self._local, "scratch", None)
        if scratch is None:
            scratch = self._local.scratch = _Scratch(self.n)
        return scratch

    def _query_words(self, q: BinaryCode) -> tuple[np.ndarray, list[int]]:
        if q.b != self.b:
            raise ValueError(f"query has {q.b} bits, index has {self.b}")
        words = q.words.reshape(1, -1)
        subs = [int(substring_values(words, self.partition, j)[0]) for j in range(self.m)]
        return q.words, subs

    def range_search(self, q: BinaryCode, r: int) -> tuple[Neighbors, SearchTrace]:
        if not 0 <= r <= self.b:
            raise ValueError(f"radius must be in [0, {self.b}], got {r}")
        qwords, subs = self._query_words(q)
        trace = SearchTrace()
        split = split_radius(r, self.m)
        scratch = self._scratch()
        found_ids, found_d = [], []
        try:
            for j, table in enumerate(self.tables):
                radius = split.table_radius(j)
                if radius < 0:
                    continue
                for ring in range(min(radius, table.s) + 1):
                    fresh, candidates, lookups = table.probe_ring_unmarked(subs[j], ring, scratch.marks)
                    scratch.record(fresh)
                    trace.lookups += lookups
                    trace.candidates += candidates
                    if len(fresh):
                        d = distances(self.db.words[fresh], qwords)
                        keep = d <= r
                        found_ids.append(fresh[keep])
                        found_d.append(d[keep])
                    trace.unique_candidates += len(fresh)
                    trace.distance_evaluations += len(fresh)
        finally:
            scratch.clear()
        trace.final_radius = r
        if not found_ids:
            return Neighbors.empty(), trace
        return Neighbors.sorted(np.concatenate(found_ids), np.concatenate(found_d)), trace

    def knn_search(self, q: BinaryCode, k: int) -> tuple[Neighbors, SearchTrace]:
        """Grow the search radius one bit at a time until ``k`` guaranteed neighbors are found.

        Step ``(r_sub, a)`` probes the ring of radius ``r_sub`` in table ``a``;
        afterwards every code within ``m * r_sub + a`` bits has been seen.
        """
        if k > self.n:
            raise ValueError(f"k={k} exceeds database size {self.n}")
        if k < 0:
            raise ValueError("k must be non-negative")
        qwords, subs = self._query_words(q)
        trace = SearchTrace()
        if k == 0:
            trace.final_radius = 0
            return Neighbors.empty(), trace
        m, b = self.m, self.b
        max_s = max(self.partition.lengths)
        counts = np.zeros(b + 1, dtype=np.int64)
        found_ids, found_d = [], []
        scratch = self._scratch()
        r_sub = a = r = 0
        try:
            while True:
                table = self.tables[a]
                fresh, candidates, lookups = table.probe_ring_unmarked(subs[a], r_sub, scratch.marks)
                scratch.record(fresh)
                trace.lookups += lookups
                trace.candidates += candidates
                if len(fresh):
                    d = distances(self.db.words[fresh], qwords)
                    counts += np.bincount(d, minlength=b + 1)
                    found_ids.append(fresh)
                    found_d.append(d)
                trace.unique_candidates += len(fresh)
                trace.distance_evaluations += len(fresh)
                a += 1
                if a >= m:
                    a = 0
                    r_sub += 1
                r += 1
                if counts[:r].sum() >= k or r_sub > max_s:
                    break
        finally:
            scratch.clear()
        trace.final_radius = r - 1
        ids = np.concatenate(found_ids)
        d = np.concatenate(found_d).astype(np.int64)
        return _top_k(ids, d, k), trace


def _top_k(ids: np.ndarray, d: np.ndarray, k: int) -> Neighbors:
    """The ``k`` smallest (distance, id) pairs."""
    if k < len(d):
        kth = np.partition(d, k - 1)[k - 1]
        below = np.flatnonzero(d < kth)
        at = np.flatnonzero(d == kth)
        at = at[np.argsort(ids[at], kind="stable")][: k - len(below)]
        sel = np.concatenate([below, at])
        ids, d = ids[sel], d[sel]
    return Neighbors.sorted(ids, d)


def build_index(db: CodeDatabase, partition: Partition | None = None, m: int | None = None) -> MihIndex:
    """Index ``db`` once per substring of ``partition``.

    Without a partition, consecutive substrings are used with ``m`` tables
    (``round(b / log2 n)`` by default).
    """
    if partition is None:
        partition = consecutive_partition(db.b, m if m is not None else default_num_tables(db.b, db.n))
    if partition.b != db.b:
        raise ValueError(f"partition covers {partition.b} bits, database has {db.b}")
    if max(partition.lengths) > MAX_KEY_BITS:
        raise ValueError(f"substrings longer than {MAX_KEY_BITS} bits are not supported; use more tables")
    tables = [
        SubstringTable.from_values(substring_values(db.words, partition, j), partition.lengths[j])
        for j in range(partition.m)
    ]
    return MihIndex(db, partition, tables)


def range_search(index: MihIndex, q: BinaryCode, r: int) -> tuple[Neighbors, SearchTrace]:
    return index.range_search(q, r)


def knn_search(index: MihIndex, q: BinaryCode, k: int) -> tuple[Neighbors, SearchTrace]:
    return index.knn_search(q, k)


def expected_lookups(split: RadiusSplit, lengths: tuple[int, ...]) -> int:
    """Buckets probed by a range search: the sum of ball sizes over active tables."""
    from .ball import ball_size

    return sum(ball_size(s, split.table_radius(j)) for j, s in enumerate(lengths))
