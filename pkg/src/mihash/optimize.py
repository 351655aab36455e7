"""Greedy correlation-based assignment of bits to substrings.

Strongly correlated bits placed in the same substring waste table
resolution: buckets collapse onto fewer distinct values.  The greedy
assignment spreads correlated bits across substrings.
"""

from __future__ import annotations

import numpy as np

from .codes import CodeDatabase, Partition


def estimate_correlations(sample: CodeDatabase) -> np.ndarray:
    """Absolute Pearson correlation between every pair of bit positions.

    Constant bits have zero correlation with every other bit; the diagonal is 1.
    """
    if sample.n < 2:
        raise ValueError("need at least two codes to estimate correlations")
    x = sample.bit_matrix().astype(np.float64)
    x -= x.mean(axis=0)
    cov = x.T @ x
    std = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = cov / np.outer(std, std)
    corr[~np.isfinite(corr)] = 0.0
    corr = np.clip(np.abs(corr), 0.0, 1.0)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return corr


def _quotas(b: int, m: int) -> list[int]:
    base, extra = divmod(b, m)
    return [base + (1 if j < extra else 0) for j in range(m)]


def greedy_assign(corr: np.ndarray, m: int, seed: int = 0, constant: np.ndarray | None = None) -> Partition:
    """Assign bits one at a time so that bits within a substring are weakly correlated.

    Substring 0 gets a random bit; substring ``j`` then gets the free bit most
    correlated with substring ``j - 1``'s bit.  After that substrings take
    turns picking the free bit whose largest correlation with their current
    bits is smallest.  Ties go to the lowest bit index.  Constant bits are
    handed out last, round-robin; unless given, a bit counts as constant when
    its correlation with every other bit is exactly zero.
    """
    corr = np.asarray(corr, dtype=np.float64)
    b = corr.shape[0]
    if corr.shape != (b, b):
        raise ValueError("correlation matrix must be square")
    if not 1 <= m <= b:
        raise ValueError(f"need 1 <= m <= b, got m={m}, b={b}")
    quota = _quotas(b, m)
    off = corr.copy()
    np.fill_diagonal(off, 0.0)
    if constant is None:
        constant = ~off.any(axis=1)
    constant = np.asarray(constant, dtype=bool)

    free = ~constant
    subs: list[list[int]] = [[] for _ in range(m)]
    # Largest correlation of each bit with the bits already in substring j.
    worst = np.zeros((m, b))

    def place(bit: int, j: int) -> None:
        subs[j].append(bit)
        free[bit] = False
        np.maximum(worst[j], off[bit], out=worst[j])

    pool = np.flatnonzero(free)
    if len(pool):
        rng = np.random.default_rng(seed)
        place(int(pool[rng.integers(len(pool))]), 0)
        for j in range(1, m):
            if not free.any():
                break
            prev = subs[j - 1][0]
            scores = np.where(free, off[prev], -np.inf)
            place(int(np.argmax(scores)), j)

    while free.any():
        progressed = False
        for j in range(m):
            if len(subs[j]) >= quota[j] or not free.any():
                continue
            scores = np.where(free, worst[j], np.inf)
            place(int(np.argmin(scores)), j)
            progressed = True
        if not progressed:
            break

    leftovers = [int(i) for i in np.flatnonzero(constant)]
    j = 0
    for bit in leftovers:
        while len(subs[j]) >= quota[j]:
            j = (j + 1) % m
        subs[j].append(bit)
        j = (j + 1) % m
    return Partition(b, tuple(tuple(sub) for sub in subs))


def within_substring_correlation(corr: np.ndarray, partition: Partition) -> float:
    """Mean over substrings of the largest correlation between two of its bits."""
    vals = []
    for sub in partition.assignment:
        if len(sub) < 2:
            vals.append(0.0)
            continue
        block = np.asarray(corr)[np.ix_(sub, sub)].copy()
        np.fill_diagonal(block, 0.0)
        vals.append(float(block.max()))
    return float(np.mean(vals))
