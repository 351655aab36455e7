"""Exhaustive linear scan: the speed baseline and the exactness oracle."""

from __future__ import annotations

import numpy as np

from .codes import BinaryCode, CodeDatabase, distances
from .mih import Neighbors, _top_k

CHUNK = 1 << 20


def _check(db: CodeDatabase, q: BinaryCode) -> None:
    if q.b != db.b:
        raise ValueError(f"query has {q.b} bits, database has {db.b}")


def scan_distances(db: CodeDatabase, q: BinaryCode) -> np.ndarray:
    """Distance from ``q`` to every code, computed in cache-sized chunks."""
    _check(db, q)
    out = np.empty(db.n, dtype=np.uint16)
    for lo in range(0, db.n, CHUNK):
        out[lo : lo + CHUNK] = distances(db.words[lo : lo + CHUNK], q.words)
    return out


def scan_range(db: CodeDatabase, q: BinaryCode, r: int) -> Neighbors:
    d = scan_distances(db, q)
    ids = np.flatnonzero(d <= r)
    if not len(ids):
        return Neighbors.empty()
    return Neighbors.sorted(ids, d[ids])


def scan_knn(db: CodeDatabase, q: BinaryCode, k: int) -> Neighbors:
    if k > db.n:
        raise ValueError(f"k={k} exceeds database size {db.n}")
    if k < 0:
        raise ValueError("k must be non-negative")
    d = scan_distances(db, q)
    if k == 0:
        return Neighbors.empty()
    if k == 1:
        i = int(np.argmin(d))
        return Neighbors(np.array([i], dtype=np.int64), np.array([d[i]], dtype=np.int64))
    return _top_k(np.arange(db.n, dtype=np.int64), d.astype(np.int64), k)
