"""End-to-end acceptance checks C1..C11.

Each test records one pass/fail line that is printed in the terminal
summary, then asserts.
"""

import gc
import math
import time

import numpy as np
import pytest

from mihash import costmodel as cm
from mihash.bench import scaling_slope
from mihash.codes import Partition, consecutive_partition
from mihash.io import (
    LshSpec,
    gen_block_correlated,
    gen_correlated_vectors,
    gen_uniform,
    index_from_bytes,
    index_to_bytes,
    lsh_encode,
)
from mihash.mih import build_index, default_num_tables
from mihash.optimize import estimate_correlations, greedy_assign
from mihash.scan import scan_knn, scan_range

from reference_values import NS, RATIOS, SELECTED_M

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def uniform_1e5():
    return gen_uniform(100_000, 64, seed=2024), gen_uniform(1000, 64, seed=2025)


@pytest.fixture(scope="module")
def range_run(uniform_1e5):
    """C1 and C4 share one pass over m, r and 500 queries."""
    db, queries = uniform_1e5
    queries = queries[:500]
    mismatches = lookup_errors = checked = 0
    for m in (2, 4, 8):
        index = build_index(db, m=m)
        s = 64 // m
        for q in queries:
            for r in (0, 1, 2, 4, 8, 16):
                found, trace = index.range_search(q, r)
                mismatches += found != scan_range(db, q, r)
                r_sub, a = divmod(r, m)
                want = (a + 1) * cm.ball_size(s, r_sub) + (m - a - 1) * (cm.ball_size(s, r_sub - 1) if r_sub else 0)
                lookup_errors += trace.lookups != want
                checked += 1
    return mismatches, lookup_errors, checked


def test_c1_range_equivalence(range_run, record):
    mismatches, _, checked = range_run
    record("C1", mismatches == 0, f"range search vs scan: {mismatches} mismatches in {checked} (m, r, query) cases")
    assert mismatches == 0


def test_c2_knn_equivalence(uniform_1e5, record):
    db, queries = uniform_1e5
    mismatches = checked = 0
    for m in (2, 4, 8):
        index = build_index(db, m=m)
        for q in queries:
            for k in (1, 10, 100):
                got = index.knn_search(q, k)[0]
                mismatches += not np.array_equal(np.sort(got.distances), np.sort(scan_knn(db, q, k).distances))
                checked += 1

    x = gen_correlated_vectors(101_000, 128, seed=7)
    spec = LshSpec.fit(x[:100_000], 64, seed=8)
    lsh_db, lsh_q = lsh_encode(x[:100_000], spec), lsh_encode(x[100_000:], spec)
    index = build_index(lsh_db)
    lsh_mismatches = 0
    for q in lsh_q:
        for k in (1, 10, 100):
            got = index.knn_search(q, k)[0]
            lsh_mismatches += not np.array_equal(np.sort(got.distances), np.sort(scan_knn(lsh_db, q, k).distances))
            checked += 1
    ok = mismatches == 0 and lsh_mismatches == 0
    record("C2", ok, f"kNN distance multisets vs scan: {mismatches} uniform + {lsh_mismatches} LSH mismatches in {checked} cases")
    assert ok


def test_c3_pigeonhole_properties(record):
    rng = np.random.default_rng(33)
    fail1 = fail2 = 0
    trials = 100_000
    for _ in range(trials):
        b = int(rng.integers(1, 257))
        m = int(rng.integers(1, min(b, 32) + 1))
        r = int(rng.integers(0, b + 1))
        perm = rng.permutation(b)
        labels = np.empty(b, dtype=np.int64)
        for j, sub in enumerate(consecutive_partition(b, m).assignment):
            labels[perm[list(sub)]] = j
        diff = np.zeros(b, dtype=np.int64)
        diff[rng.choice(b, size=int(rng.integers(0, r + 1)), replace=False)] = 1
        sub = np.bincount(labels, weights=diff, minlength=m)
        r_sub, a = divmod(r, m)
        fail1 += not (sub <= r_sub).any()
        radii = np.where(np.arange(m) <= a, r_sub, r_sub - 1)
        fail2 += not (sub <= radii).any()
    ok = fail1 == 0 and fail2 == 0
    record("C3", ok, f"{trials} random instances: first disjunction failed {fail1}x, refined disjunction failed {fail2}x")
    assert ok


def test_c4_lookup_closed_form(range_run, record):
    _, lookup_errors, checked = range_run
    record("C4", lookup_errors == 0, f"trace.lookups vs closed form: {lookup_errors} differences in {checked} cases")
    assert lookup_errors == 0


def test_c5_cost_model(record):
    a_ok = cm.ball_size(64, 7) == 704_494_193

    argmins = {n: cm.best_substring_length(240, 60, n) for n in (1e6, 1e9, 1e12)}
    offsets = {n: s - math.log2(n) for n, s in argmins.items()}
    b_ok = all(abs(o) <= 2 for o in offsets.values())

    c_fail = 0
    for eta in range(1, 129):
        for eps in np.round(np.arange(0.05, 0.501, 0.05), 2):
            exact = sum(math.comb(eta, k) for k in range(int(eps * eta) + 1))
            c_fail += cm.binomial_sum_bound(eta, eps) < exact
    for b in (64, 128, 240, 256):
        for s in (s for s in range(1, b + 1) if b % s == 0):
            for r in range(0, b // 2 + 1):
                for n in (0, 1e6, 1e9, 1e12):
                    p = cm.expected_cost(b, s, r, n)
                    c_fail += p.lookups > p.lookup_bound * (1 + 1e-12) or p.cost > p.cost_bound * (1 + 1e-12)
    c_ok = c_fail == 0

    detail = (
        f"(a) L(64,7)={cm.ball_size(64, 7):,} {'ok' if a_ok else 'WRONG'}; "
        f"(b) argmin s for b=240, r=60: "
        + ", ".join(f"n=1e{round(math.log10(n))}: s={s} (log2 n {math.log2(n):.2f}, off {offsets[n]:+.2f})" for n, s in argmins.items())
        + f" {'ok' if b_ok else 'OUTSIDE +-2'}; (c) {c_fail} bound violations"
    )
    record("C5", a_ok and b_ok and c_ok, detail)
    assert a_ok and c_ok
    assert b_ok, detail


def test_c6_table_count_heuristic(record):
    ratio_ok = matches = 0
    misses = []
    for b in (64, 128, 256):
        for n, want_ratio, want_m in zip(NS, RATIOS[b], SELECTED_M[b]):
            ratio_ok += f"{cm.table_count_ratio(b, n):.2f}" == f"{want_ratio:.2f}"
            m = cm.choose_num_tables(b, n)
            if m == want_m:
                matches += 1
            else:
                misses.append(f"b={b} n={n:g}: round={m} selected={want_m}")
    ok = ratio_ok == 36 and matches >= 30
    record("C6", ok, f"ratios {ratio_ok}/36 to two decimals; round() matches {matches}/36 (need 30); differs at " + "; ".join(misses))
    assert ratio_ok == 36
    assert matches >= 30, misses


@pytest.fixture(scope="module")
def big_64():
    db = gen_uniform(10_000_000, 64, seed=77)
    index = build_index(db)
    yield db, index
    del index, db
    gc.collect()


def _mean_time(fn, queries):
    for q in queries[:5]:
        fn(q)
    t0 = time.perf_counter()
    for q in queries:
        fn(q)
    return (time.perf_counter() - t0) / len(queries)


def test_c7_sublinear_scaling(big_64, record):
    queries = list(gen_uniform(300, 64, seed=78))
    ns, times, ms = [], [], []
    for n in (100_000, 1_000_000, 10_000_000):
        if n == 10_000_000:
            index = big_64[1]
        else:
            index = build_index(gen_uniform(n, 64, seed=79 + n % 7))
        ns.append(n)
        ms.append(index.m)
        times.append(_mean_time(lambda q: index.knn_search(q, 10), queries))
    slope = scaling_slope(ns, times)
    detail = f"k=10, m={ms}: mean ms {[round(t * 1e3, 3) for t in times]} at n={ns}; log-log slope {slope:.3f} (need < 0.8)"
    record("C7", slope < 0.8, detail)
    assert slope < 0.8, detail


def test_c8_speedup_over_scan(big_64, record):
    db, index = big_64
    queries = list(gen_uniform(100, 64, seed=80))
    for q in queries[:20]:
        assert index.knn_search(q, 1)[0].distances.tolist() == scan_knn(db, q, 1).distances.tolist()
    t_mih = _mean_time(lambda q: index.knn_search(q, 1), queries)
    t_scan = _mean_time(lambda q: scan_knn(db, q, 1), queries[:40])
    speedup = t_scan / t_mih
    detail = f"n=1e7, k=1, m={index.m}: MIH {t_mih * 1e3:.2f} ms, scan {t_scan * 1e3:.2f} ms, speedup {speedup:.1f}x (need >= 5)"
    record("C8", speedup >= 5, detail)
    assert speedup >= 5, detail


def test_c9_single_table_lookups(record):
    queries = list(gen_uniform(100, 128, seed=90))
    parts, ok = [], True
    for n in (100_000, 1_000_000, 10_000_000):
        db = gen_uniform(n, 128, seed=91)
        index = build_index(db)
        radii, lookups = [], []
        for q in queries:
            found, trace = index.knn_search(q, 10)
            radii.append(int(found.distances[-1]))
            lookups.append(trace.lookups)
        single = cm.single_table_lookups(128, radii).mean
        mih = float(np.mean(lookups))
        ok &= single >= 1e3 * n and single >= 1e3 * mih
        parts.append(f"n={n:.0e}: single {single:.2e}, /n {single / n:.1e}, /MIH {single / mih:.1e}")
        del index, db
        gc.collect()
    record("C9", ok, "b=128, k=10: " + "; ".join(parts))
    assert ok


def test_c10_substring_optimization(record):
    db = gen_block_correlated(100_000, 128, block=4, seed=100)
    queries = gen_block_correlated(1000, 128, block=4, seed=101)
    m = default_num_tables(128, db.n)
    greedy = greedy_assign(estimate_correlations(db[:20_000]), m, seed=0)
    means = {}
    for name, part in (("greedy", greedy), ("consecutive", consecutive_partition(128, m))):
        index = build_index(db, part)
        means[name] = float(np.mean([index.knn_search(q, 10)[1].unique_candidates for q in queries]))
    ok = means["greedy"] <= means["consecutive"]
    record("C10", ok, f"m={m}, k=10, 1000 queries: mean unique candidates greedy {means['greedy']:.0f} vs consecutive {means['consecutive']:.0f}")
    assert ok


def test_c11_serialization_round_trips(record):
    rng = np.random.default_rng(110)
    failures = 0
    for trial in range(100):
        b = int(rng.integers(8, 200))
        n = int(rng.integers(0, 3000))
        m = int(rng.integers(max(1, math.ceil(b / 64)), min(b, 12) + 1))
        db = gen_uniform(n, b, seed=trial)
        if rng.random() < 0.5:
            perm = rng.permutation(b)
            part = Partition(b, tuple(tuple(int(perm[p]) for p in sub) for sub in consecutive_partition(b, m).assignment))
        else:
            part = consecutive_partition(b, m)
        index = build_index(db, part)
        loaded = index_from_bytes(index_to_bytes(index))
        for q in gen_uniform(5, b, seed=1000 + trial):
            r = int(rng.integers(0, b // 4 + 1))
            (a, ta), (c, tc) = index.range_search(q, r), loaded.range_search(q, r)
            failures += a != c or ta.lookups != tc.lookups
            if n:
                k = int(rng.integers(1, min(n, 50) + 1))
                (a, ta), (c, tc) = index.knn_search(q, k), loaded.knn_search(q, k)
                failures += a != c or ta.lookups != tc.lookups
    record("C11", failures == 0, f"100 build/save/load/query round trips: {failures} differences")
    assert failures == 0
