import numpy as np
import pytest

from mihash.codes import BinaryCode, CodeDatabase, hamming_distance
from mihash.io import gen_uniform
from mihash.scan import scan_distances, scan_knn, scan_range


def full_sort(db, q):
    """Sort every (distance, id) pair with Python's sort."""
    return sorted((hamming_distance(q, c), i) for i, c in enumerate(db))


@pytest.fixture(scope="module")
def db():
    return gen_uniform(1000, 64, seed=21)


class TestScanRange:
    def test_absent_query_radius_zero(self, db):
        q = BinaryCode.from_int(0, 64)
        assert q not in set(db)
        assert len(scan_range(db, q, 0)) == 0

    def test_whole_space(self, db):
        found = scan_range(db, db[0], 64)
        assert sorted(found.ids.tolist()) == list(range(db.n))

    def test_hand_example(self):
        small = CodeDatabase.from_strings(["00000000", "00000111", "11000000"])
        found = scan_range(small, BinaryCode.from_string("00000001"), 2)
        assert found.pairs() == [(0, 1), (1, 2)]

    def test_sorted_and_nested(self, db):
        q = gen_uniform(1, 64, seed=1)[0]
        prev = set()
        for r in range(0, 40):
            found = scan_range(db, q, r)
            pairs = found.pairs()
            assert pairs == sorted(pairs, key=lambda p: (p[1], p[0]))
            ids = set(found.ids.tolist())
            assert prev <= ids
            prev = ids

    def test_length_mismatch(self, db):
        with pytest.raises(ValueError):
            scan_range(db, BinaryCode.from_int(0, 32), 1)


class TestScanKnn:
    def test_k_equals_n(self, db):
        q = db[5]
        want = full_sort(db, q)
        assert scan_knn(db, q, db.n).pairs() == [(i, d) for d, i in want]

    def test_unique_match(self, db):
        assert scan_knn(db, db[17], 1).pairs() == [(17, 0)]

    def test_full_sort_oracle(self, db):
        for q in gen_uniform(30, 64, seed=2):
            want = [(i, d) for d, i in full_sort(db, q)[:10]]
            assert scan_knn(db, q, 10).pairs() == want

    def test_prefix_property(self, db):
        q = gen_uniform(1, 64, seed=3)[0]
        prev = []
        for k in range(1, 60):
            d = scan_knn(db, q, k).distances.tolist()
            assert d[: len(prev)] == prev
            prev = d

    def test_k_one_breaks_ties_by_id(self):
        small = CodeDatabase.from_strings(["0011", "0101", "0001"])
        assert scan_knn(small, BinaryCode.from_string("0000"), 1).pairs() == [(2, 1)]

    def test_invalid_k(self, db):
        with pytest.raises(ValueError):
            scan_knn(db, db[0], db.n + 1)
        assert len(scan_knn(db, db[0], 0)) == 0

    def test_chunked_distances(self, db):
        big = gen_uniform(3_000_000, 64, seed=4)
        q = big[123]
        d = scan_distances(big, q)
        assert d[123] == 0 and d.shape == (3_000_000,)
        sample = np.random.default_rng(0).integers(0, big.n, size=50)
        assert [int(d[i]) for i in sample] == [hamming_distance(q, big[int(i)]) for i in sample]
