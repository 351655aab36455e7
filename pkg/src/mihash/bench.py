"""Query-time benchmarks against the linear-scan baseline.

Every method's answers are checked against the scan before any timing is
reported.  Timings are wall-clock per query on a single thread.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .codes import BinaryCode, CodeDatabase, Partition
from .mih import MihIndex, Neighbors, SearchTrace, build_index, default_num_tables
from .scan import scan_knn, scan_range

METHODS = ("mih", "scan")


class VerificationError(RuntimeError):
    """A method disagreed with the linear scan."""


@dataclass
class BenchConfig:
    dataset: CodeDatabase
    queries: CodeDatabase
    ks: Sequence[int] = ()
    radii: Sequence[int] = ()
    methods: Sequence[str] = ("mih",)
    m: int | None = None
    partition: Partition | None = None
    warmup: int = 10
    index: MihIndex | None = None


@dataclass
class BenchRow:
    method: str
    mode: str
    param: int
    queries: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    mean_lookups: float
    mean_unique_candidates: float
    speedup: float


@dataclass
class BenchReport:
    n: int
    b: int
    m: int
    lengths: tuple[int, ...]
    build_seconds: float
    warmup_queries: int
    rows: list[BenchRow] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(BenchRow.__dataclass_fields__)
        writer = csv.DictWriter(buf, fieldnames=["n", "b", "m"] + names, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({"n": self.n, "b": self.b, "m": self.m, **asdict(row)})
        return buf.getvalue()


def _runner(method: str, mode: str, index: MihIndex, db: CodeDatabase) -> Callable[[BinaryCode, int], tuple[Neighbors, SearchTrace | None]]:
    if method == "mih":
        search = index.knn_search if mode == "knn" else index.range_search
        return search
    if method == "scan":
        search = scan_knn if mode == "knn" else scan_range
        return lambda q, p: (search(db, q, p), None)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def same_answer(mode: str, got: Neighbors, want: Neighbors) -> bool:
    """kNN answers agree on the distance multiset; range answers on the id set."""
    if mode == "knn":
        return np.array_equal(np.sort(got.distances), np.sort(want.distances))
    return np.array_equal(np.sort(got.ids), np.sort(want.ids))


def _time(run, queries: list[BinaryCode], p: int) -> tuple[np.ndarray, float, float]:
    times = np.empty(len(queries))
    lookups = cands = 0
    for i, q in enumerate(queries):
        t0 = time.perf_counter()
        _, trace = run(q, p)
        times[i] = time.perf_counter() - t0
        if trace is not None:
            lookups += trace.lookups
            cands += trace.unique_candidates
    nq = max(len(queries), 1)
    return times, lookups / nq, cands / nq


def run_benchmark(config: BenchConfig) -> BenchReport:
    """Verify every method against the scan, then time each (mode, parameter)."""
    db, qdb = config.dataset, config.queries
    if qdb.b != db.b:
        raise ValueError(f"queries have {qdb.b} bits, dataset has {db.b}")
    for k in config.ks:
        if not 1 <= k <= db.n:
            raise ValueError(f"k={k} must be in [1, {db.n}]")
    for r in config.radii:
        if not 0 <= r <= db.b:
            raise ValueError(f"radius {r} must be in [0, {db.b}]")
    for method in config.methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {METHODS}")

    t0 = time.perf_counter()
    index = config.index or build_index(db, config.partition, config.m)
    build_seconds = time.perf_counter() - t0
    queries = list(qdb)
    warm = queries[: config.warmup]
    report = BenchReport(db.n, db.b, index.m, index.partition.lengths, build_seconds, len(warm))

    plan = [("knn", k) for k in config.ks] + [("range", r) for r in config.radii]
    for mode, p in plan:
        runners = {m: _runner(m, mode, index, db) for m in set(config.methods) | {"scan"}}
        truth = [runners["scan"](q, p)[0] for q in queries]
        for method in config.methods:
            if method == "scan":
                continue
            for i, q in enumerate(queries):
                if not same_answer(mode, runners[method](q, p)[0], truth[i]):
                    raise VerificationError(f"{method} {mode}={p} disagrees with scan on query {i}")

        for q in warm:
            for run in runners.values():
                run(q, p)
        base, _, _ = _time(runners["scan"], queries, p)
        base_mean = float(base.mean()) if len(base) else 0.0
        for method in config.methods:
            times, lookups, cands = _time(runners[method], queries, p)
            mean = float(times.mean()) if len(times) else 0.0
            report.rows.append(
                BenchRow(
                    method=method,
                    mode=mode,
                    param=p,
                    queries=len(queries),
                    mean_ms=mean * 1e3,
                    median_ms=float(np.median(times)) * 1e3 if len(times) else 0.0,
                    p95_ms=float(np.percentile(times, 95)) * 1e3 if len(times) else 0.0,
                    mean_lookups=lookups,
                    mean_unique_candidates=cands if method == "mih" else float(db.n),
                    speedup=base_mean / mean if mean > 0 else math.inf,
                )
            )
    return report


def select_num_tables(
    db: CodeDatabase,
    queries: CodeDatabase,
    k: int = 10,
    candidates: Sequence[int] | None = None,
) -> tuple[int, dict[int, float]]:
    """Time kNN search for a few table counts and return the fastest with all mean times.

    By default the candidates are the heuristic ``round(b / log2 n)`` and its
    two neighbours.
    """
    if candidates is None:
        h = default_num_tables(db.b, db.n) if db.n >= 2 else 1
        candidates = sorted({m for m in (h - 1, h, h + 1) if 1 <= m <= db.b and math.ceil(db.b / m) <= 64})
    timings = {}
    for m in candidates:
        index = build_index(db, m=m)
        for q in list(queries)[:5]:
            index.knn_search(q, k)
        times, _, _ = _time(index.knn_search, list(queries), k)
        timings[m] = float(times.mean())
    best = min(timings, key=lambda m: (timings[m], m))
    return best, timings


def scaling_slope(ns: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of log(time) against log(n)."""
    slope, _ = np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(times, dtype=float)), 1)
    return float(slope)


__all__ = [
    "BenchConfig",
    "BenchReport",
    "BenchRow",
    "VerificationError",
    "run_benchmark",
    "same_answer",
    "scaling_slope",
    "select_num_tables",
]
