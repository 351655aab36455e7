"""Enumeration of s-bit values inside a Hamming ball or on a Hamming ring.

Rings are produced by flipping every combination of ``radius`` bit
positions, combinations in lexicographic order of their positions.  Balls
are rings 0, 1, ..., radius chained together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class BallSpec:
    s: int
    center: int
    radius: int

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("substring width must be non-negative")
        if not 0 <= self.center < (1 << self.s):
            raise ValueError(f"center {self.center} does not fit in {self.s} bits")
        if self.radius < 0 or self.radius > self.s:
            raise ValueError(f"radius must be in [0, {self.s}], got {self.radius}")


def ball_size(s: int, r: int) -> int:
    """Number of s-bit values within distance ``r`` of a point; 0 for ``r < 0``."""
    if r < 0:
        return 0
    return sum(math.comb(s, z) for z in range(min(r, s) + 1))


def enumerate_ring(spec: BallSpec) -> Iterator[int]:
    center = spec.center
    for positions in combinations(range(spec.s), spec.radius):
        mask = 0
        for p in positions:
            mask |= 1 << p
        yield center ^ mask


def enumerate_ball(spec: BallSpec) -> Iterator[int]:
    for r in range(spec.radius + 1):
        yield from enumerate_ring(BallSpec(spec.s, spec.center, r))


def _ring_masks(s: int, r: int) -> np.ndarray:
    # Lex order: combinations containing the lowest free position come first.
    @lru_cache(maxsize=None)
    def build(start: int, k: int) -> np.ndarray:
        if k == 0:
            return np.zeros(1, dtype=np.uint64)
        if s - start < k:
            return np.zeros(0, dtype=np.uint64)
        with_start = build(start + 1, k - 1) | np.uint64(1 << start)
        return np.concatenate([with_start, build(start + 1, k)])

    return build(0, r)


@lru_cache(maxsize=128)
def ring_masks(s: int, r: int) -> np.ndarray:
    """XOR masks with exactly ``r`` of the low ``s`` bits set, in ring order.

    ``center ^ ring_masks(s, r)`` equals ``list(enumerate_ring(...))``.
    """
    if not 0 <= r <= s <= 64:
        raise ValueError(f"need 0 <= r <= s <= 64, got s={s}, r={r}")
    masks = _ring_masks(s, r)
    masks.flags.writeable = False
    return masks
