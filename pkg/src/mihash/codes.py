"""Binary codes, code databases and substring partitions.

Codes are packed LSB-first into little 64-bit words: bit ``i`` of a code is
bit ``i % 64`` of word ``i // 64``.  Padding bits above ``b - 1`` are zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_BITS = 4096
MAX_CODES = 2**32

WORD = np.uint64


def num_words(b: int) -> int:
    return (b + 63) // 64


def _tail_mask(b: int) -> int:
    rem = b % 64
    return (1 << rem) - 1 if rem else (1 << 64) - 1


def _check_bits(b: int) -> None:
    if not 1 <= b <= MAX_BITS:
        raise ValueError(f"code length must be in [1, {MAX_BITS}], got {b}")


class BinaryCode:
    """An immutable ``b``-bit code backed by packed 64-bit words."""

    __slots__ = ("b", "words")

    def __init__(self, words: Sequence[int] | np.ndarray, b: int):
        _check_bits(b)
        arr = np.array(words, dtype=WORD).reshape(-1)
        if arr.shape[0] != num_words(b):
            raise ValueError(f"{b}-bit code needs {num_words(b)} words, got {arr.shape[0]}")
        if int(arr[-1]) & ~_tail_mask(b):
            raise ValueError("padding bits beyond position b-1 must be zero")
        arr.flags.writeable = False
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "words", arr)

    def __setattr__(self, name, value):
        raise AttributeError("BinaryCode is immutable")

    @classmethod
    def from_int(cls, value: int, b: int) -> "BinaryCode":
        if value < 0 or value >> b:
            raise ValueError(f"value does not fit in {b} bits")
        mask = (1 << 64) - 1
        return cls([(value >> (64 * w)) & mask for w in range(num_words(b))], b)

    @classmethod
    def from_string(cls, bits: str) -> "BinaryCode":
        """Parse a bit string written most-significant bit first (``'1010'`` has bit 1 and bit 3 set)."""
        bits = bits.replace("_", "").replace(" ", "")
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"not a bit string: {bits!r}")
        return cls.from_int(int(bits, 2), len(bits))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BinaryCode":
        """Build from a sequence of 0/1 values where element ``i`` is bit ``i``."""
        bits = list(bits)
        return cls.from_int(sum(1 << i for i, v in enumerate(bits) if v), len(bits))

    def to_int(self) -> int:
        return sum(int(w) << (64 * i) for i, w in enumerate(self.words))

    def bit(self, i: int) -> int:
        if not 0 <= i < self.b:
            raise IndexError(i)
        return (int(self.words[i >> 6]) >> (i & 63)) & 1

    def complement(self) -> "BinaryCode":
        return BinaryCode.from_int(self.to_int() ^ ((1 << self.b) - 1), self.b)

    def __str__(self) -> str:
        return format(self.to_int(), f"0{self.b}b")

    def __repr__(self) -> str:
        return f"BinaryCode('{self}')"

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryCode):
            return NotImplemented
        return self.b == other.b and bool(np.array_equal(self.words, other.words))

    def __hash__(self) -> int:
        return hash((self.b, self.words.tobytes()))


class CodeDatabase:
    """``n`` codes of ``b`` bits stored as an ``(n, words)`` uint64 array.

    The id of a code is its row index.
    """

    def __init__(self, words: np.ndarray, b: int):
        _check_bits(b)
        words = np.ascontiguousarray(words, dtype=WORD)
        if words.ndim == 1 and words.shape[0] == 0:
            words = words.reshape(0, num_words(b))
        if words.ndim != 2 or words.shape[1] != num_words(b):
            raise ValueError(f"expected shape (n, {num_words(b)}), got {words.shape}")
        if words.shape[0] > MAX_CODES:
            raise ValueError("ids are 32-bit: at most 2**32 codes")
        if words.shape[0] and np.any(words[:, -1] & ~np.uint64(_tail_mask(b))):
            raise ValueError("padding bits beyond position b-1 must be zero")
        words.flags.writeable = False
        self.words = words
        self.b = b

    @classmethod
    def from_codes(cls, codes: Sequence[BinaryCode], b: int | None = None) -> "CodeDatabase":
        if not codes:
            if b is None:
                raise ValueError("cannot infer b from an empty sequence")
            return cls(np.zeros((0, num_words(b)), dtype=WORD), b)
        b = codes[0].b if b is None else b
        if any(c.b != b for c in codes):
            raise ValueError("all codes must share the same length")
        return cls(np.stack([c.words for c in codes]), b)

    @classmethod
    def from_strings(cls, strings: Sequence[str]) -> "CodeDatabase":
        return cls.from_codes([BinaryCode.from_string(s) for s in strings])

    @classmethod
    def from_bit_matrix(cls, bits: np.ndarray) -> "CodeDatabase":
        """Pack an ``(n, b)`` 0/1 matrix; column ``i`` becomes bit ``i``."""
        bits = np.asarray(bits)
        n, b = bits.shape
        w = num_words(b)
        padded = np.zeros((n, w * 64), dtype=np.uint8)
        padded[:, :b] = bits != 0
        packed = np.packbits(padded, axis=1, bitorder="little")
        return cls(packed.view("<u8").astype(WORD, copy=False).reshape(n, w), b)

    @property
    def n(self) -> int:
        return self.words.shape[0]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return CodeDatabase(self.words[i], self.b)
        return BinaryCode(self.words[i], self.b)

    def __iter__(self):
        for i in range(self.n):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeDatabase):
            return NotImplemented
        return self.b == other.b and bool(np.array_equal(self.words, other.words))

    def subset(self, ids) -> "CodeDatabase":
        return CodeDatabase(self.words[np.asarray(ids, dtype=np.int64)], self.b)

    def bit_matrix(self) -> np.ndarray:
        """Unpack to an ``(n, b)`` uint8 matrix of 0/1 values."""
        as_bytes = self.words.astype("<u8", copy=False).view(np.uint8)
        return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, : self.b]


@dataclass(frozen=True)
class Partition:
    """Assignment of the ``b`` bit positions to ``m`` disjoint substrings.

    ``assignment[j]`` lists the positions owned by substring ``j``; position
    ``assignment[j][i]`` becomes bit ``i`` of the substring value.
    """

    b: int
    assignment: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        assignment = tuple(tuple(int(p) for p in sub) for sub in self.assignment)
        object.__setattr__(self, "assignment", assignment)
        m = len(assignment)
        if not 1 <= m <= self.b:
            raise ValueError(f"need 1 <= m <= b, got m={m}, b={self.b}")
        flat = sorted(p for sub in assignment for p in sub)
        if flat != list(range(self.b)):
            raise ValueError("substrings must cover every bit position exactly once")
        lengths = [len(sub) for sub in assignment]
        if max(lengths) - min(lengths) > 1:
            raise ValueError(f"substring lengths differ by more than one bit: {lengths}")

    @property
    def m(self) -> int:
        return len(self.assignment)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(sub) for sub in self.assignment)

    def is_consecutive(self) -> bool:
        return self == consecutive_partition(self.b, self.m)

    def to_dict(self) -> dict:
        return {"b": self.b, "substrings": [list(sub) for sub in self.assignment]}

    @classmethod
    def from_dict(cls, data: dict) -> "Partition":
        return cls(int(data["b"]), tuple(tuple(sub) for sub in data["substrings"]))


def consecutive_partition(b: int, m: int) -> Partition:
    """Split ``b`` bits into ``m`` contiguous runs; the first ``b % m`` runs get the extra bit."""
    if not 1 <= m <= b:
        raise ValueError(f"need 1 <= m <= b, got m={m}, b={b}")
    base, extra = divmod(b, m)
    runs, start = [], 0
    for j in range(m):
        size = base + (1 if j < extra else 0)
        runs.append(tuple(range(start, start + size)))
        start += size
    return Partition(b, tuple(runs))


def popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x)


def hamming_distance(a: BinaryCode, b: BinaryCode) -> int:
    if a.b != b.b:
        raise ValueError(f"code length mismatch: {a.b} vs {b.b}")
    return int(popcount(a.words ^ b.words).sum())


def distances(words: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamming distances from query words ``q`` to each row of ``words``."""
    x = np.bitwise_count(words ^ q)
    if x.shape[1] == 1:
        return x[:, 0]
    return x.sum(axis=1, dtype=np.uint16)


def _runs(positions: Sequence[int]) -> list[tuple[int, int, int, int]]:
    """Group positions into (word, src_shift, length, dst_shift) runs that are
    contiguous in both the code and the substring and stay inside one word."""
    runs: list[list[int]] = []
    for dst, p in enumerate(positions):
        if runs:
            w, src, length, d0 = runs[-1]
            if p == w * 64 + src + length and (p >> 6) == w:
                runs[-1][2] += 1
                continue
        runs.append([p >> 6, p & 63, 1, dst])
    return [tuple(r) for r in runs]


def substring_values(words: np.ndarray, partition: Partition, j: int) -> np.ndarray:
    """Substring ``j`` of every row of ``words`` as uint64 (substrings wider than 64 bits are rejected)."""
    if not 0 <= j < partition.m:
        raise ValueError(f"substring index {j} out of range for m={partition.m}")
    if partition.lengths[j] > 64:
        raise ValueError("vectorized substrings are limited to 64 bits")
    words = np.atleast_2d(words)
    out = np.zeros(words.shape[0], dtype=WORD)
    for w, src, length, dst in _runs(partition.assignment[j]):
        mask = np.uint64((1 << length) - 1)
        out |= ((words[:, w] >> np.uint64(src)) & mask) << np.uint64(dst)
    return out


def extract_substring(code: BinaryCode, partition: Partition, j: int) -> int:
    """Value of substring ``j``: bit ``i`` is the code bit at the ``i``-th owned position."""
    if not 0 <= j < partition.m:
        raise ValueError(f"substring index {j} out of range for m={partition.m}")
    if partition.b != code.b:
        raise ValueError(f"partition covers {partition.b} bits, code has {code.b}")
    value = 0
    for w, src, length, dst in _runs(partition.assignment[j]):
        value |= ((int(code.words[w]) >> src) & ((1 << length) - 1)) << dst
    return value
