"""Compiled inner loops for bucket probing.

Each probe turns a batch of bucket keys into the ids stored under them,
skipping ids already marked by the current query.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def direct_ranks(keys, dir_occ, dir_rank):
    """Bucket ranks of the non-empty buckets among ``keys`` (direct directory)."""
    out = np.empty(len(keys), dtype=np.int64)
    n = 0
    for i in range(len(keys)):
        key = keys[i]
        word = np.uint64(dir_occ[key >> np.uint64(5)])
        bit = key & np.uint64(31)
        if (word >> bit) & np.uint64(1):
            below = word & ((np.uint64(1) << bit) - np.uint64(1))
            # popcount of a 32-bit word
            below = below - ((below >> np.uint64(1)) & np.uint64(0x55555555))
            below = (below & np.uint64(0x33333333)) + ((below >> np.uint64(2)) & np.uint64(0x33333333))
            below = (((below + (below >> np.uint64(4))) & np.uint64(0x0F0F0F0F)) * np.uint64(0x01010101)) & np.uint64(0xFFFFFFFF)
            out[n] = dir_rank[key >> np.uint64(5)] + np.int64(below >> np.uint64(24))
            n += 1
    return out[:n]


@njit(cache=True, nogil=True)
def gather_fresh(ranks, offsets, entries, marks):
    """Ids of the given buckets not yet marked; marks them.  Returns ``(fresh, candidates)``."""
    total = 0
    for i in range(len(ranks)):
        r = ranks[i]
        total += offsets[r + 1] - offsets[r]
    out = np.empty(total, dtype=np.int64)
    n = 0
    for i in range(len(ranks)):
        r = ranks[i]
        for p in range(offsets[r], offsets[r + 1]):
            e = entries[p]
            if not marks[e]:
                marks[e] = True
                out[n] = e
                n += 1
    return out[:n], total
