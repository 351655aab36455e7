"""Analytic search-cost model for multi-index hashing on uniform codes.

Exact counts are Python integers; bounds are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .ball import ball_size as _ball_size
from .table import num_groups


def ball_size(s: int, r: int) -> int:
    """Number of ``s``-bit buckets within Hamming distance ``r`` of a point."""
    if r < 0 or r > s:
        raise ValueError(f"need 0 <= r <= s, got s={s}, r={r}")
    return _ball_size(s, r)


def entropy(eps: float) -> float:
    """Bernoulli entropy in bits; 0 at the endpoints."""
    if eps < 0 or eps > 1:
        raise ValueError(f"eps must be in [0, 1], got {eps}")
    if eps in (0, 1):
        return 0.0
    return -eps * math.log2(eps) - (1 - eps) * math.log2(1 - eps)


def binomial_sum_bound(eta: int, eps: float) -> float:
    """``2**(H(eps) * eta)``, an upper bound on the binomial sum up to ``floor(eps * eta)``."""
    if not 0 < eps <= 0.5:
        raise ValueError(f"eps must be in (0, 1/2], got {eps}")
    if eta < 1:
        raise ValueError("eta must be >= 1")
    return 2.0 ** (entropy(eps) * eta)


def _check_divides(b: int, s: int) -> int:
    if s < 1 or s > b or b % s:
        raise ValueError(f"substring length {s} must divide code length {b}")
    return b // s


def lookup_count(b: int, s: int, r: int) -> tuple[int, float]:
    """Lookups to find all r-neighbors with ``b / s`` tables: ``(exact, bound)``.

    The bound holds for ``r <= b / 2``.
    """
    m = _check_divides(b, s)
    if not 0 <= r <= b:
        raise ValueError(f"radius must be in [0, {b}], got {r}")
    exact = m * _ball_size(s, (s * r) // b)
    bound = m * 2.0 ** (entropy(r / b) * s)
    return exact, bound


@dataclass(frozen=True)
class CostPoint:
    s: int
    lookups: int
    lookup_bound: float
    cost: float
    cost_bound: float


def _cost(b: int, s: int, r: int, n: float) -> tuple[float, float, float, float]:
    m = b // s if b % s == 0 else b / s
    exact = m * _ball_size(s, (s * r) // b)
    bound = m * 2.0 ** (entropy(r / b) * s)
    density = 1 + n / 2.0**s
    return exact, bound, density * exact, density * bound


def expected_cost(b: int, s: int, r: int, n: float) -> CostPoint:
    """Cost per query in lookup units: ``(1 + n / 2**s)`` times the lookup count."""
    _check_divides(b, s)
    exact, bound, cost, cost_bound = _cost(b, s, r, n)
    return CostPoint(s, int(exact), bound, cost, cost_bound)


def cost_curve(b: int, r: int, n: float, lengths: Iterable[int] | None = None) -> list[CostPoint]:
    """Cost at every substring length, including non-divisors of ``b``.

    For non-divisors the table count ``b / s`` is fractional, as in the
    continuous curves; ``lookups`` is then rounded down.
    """
    out = []
    for s in lengths if lengths is not None else range(1, b + 1):
        exact, bound, cost, cost_bound = _cost(b, s, r, n)
        out.append(CostPoint(s, int(exact), bound, cost, cost_bound))
    return out


def refined_cost(b: int, s: int, r: int, n: float) -> float:
    """Cost when the first ``a + 1`` tables use radius ``r // m`` and the rest one less."""
    m = _check_divides(b, s)
    r_sub, a = divmod(r, m)
    lookups = (a + 1) * _ball_size(s, r_sub) + (m - a - 1) * _ball_size(s, r_sub - 1)
    return (1 + n / 2.0**s) * lookups


def best_substring_length(b: int, r: int, n: float, divisors_only: bool = False, model: str = "cost") -> int:
    """Substring length minimizing the chosen model (``cost``, ``bound`` or ``refined``)."""
    candidates = [s for s in range(1, b + 1) if not divisors_only or b % s == 0]
    if model == "refined":
        candidates = [s for s in candidates if b % s == 0]
        return min(candidates, key=lambda s: refined_cost(b, s, r, n))
    index = 2 if model == "cost" else 3
    return min(candidates, key=lambda s: _cost(b, s, r, n)[index])


def cost_bound_at_log_n(b: int, r: int, n: float) -> float:
    """``2 * (b / log2 n) * n**H(r / b)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return 2 * (b / math.log2(n)) * n ** entropy(r / b)


def choose_num_tables(b: int, n: float) -> int:
    """Closest integer to ``b / log2 n``, clamped to ``[1, b]``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return min(b, max(1, math.floor(b / math.log2(n) + 0.5)))


def table_count_ratio(b: int, n: float) -> float:
    return b / math.log2(n)


@dataclass(frozen=True)
class LookupSummary:
    per_query: tuple[int, ...]
    mean: float
    median: float
    minimum: int
    maximum: int


def single_table_lookups(b: int, knn_radii: Sequence[int]) -> LookupSummary:
    """Lookups a single full-code hash table needs to reach each query's k-th neighbor."""
    if any(r < 0 or r > b for r in knn_radii):
        raise ValueError(f"radii must lie in [0, {b}]")
    per = tuple(_ball_size(b, r) for r in knn_radii)
    if not per:
        return LookupSummary((), 0.0, 0.0, 0, 0)
    ordered = sorted(per)
    mid = len(ordered) // 2
    median = ordered[mid] if len(ordered) % 2 else (ordered[mid - 1] + ordered[mid]) / 2
    return LookupSummary(per, sum(per) / len(per), float(median), ordered[0], ordered[-1])


def index_memory_bytes(b: int, m: int, n: int) -> int:
    """Memory of ``m`` fully occupied sparse tables plus the ids and the codes."""
    s = b // m
    return m * num_groups(s) * 24 + m * min(n, 2**s) * 4 + 4 * m * n + n * m * s // 8
