"""Binary file formats, synthetic datasets and LSH encoding.

All integers are little-endian.

Codes file::

    b"BMIH" | version u32 = 1 | b u32 | n u64 | n records of ceil(b/64) u64 words

Vector file::

    d u32 | n u32 | n * d float32, row-major

Index file::

    b"BMIX" | version u32 = 1 | b u32 | n u64 | m u32
    codes payload (as in the codes file)
    m partition blocks:  s_j u32 | s_j positions u32
    crc32 u32 of everything above
    m table blocks:      s u32 | groups u64 | buckets u64
                         group ids u64[groups] | occupancy u32[groups]
                         offsets u64[buckets + 1] | entries u32[n] | crc32 u32
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codes import WORD, CodeDatabase, Partition, num_words
from .mih import MihIndex
from .table import SubstringTable

CODES_MAGIC = b"BMIH"
INDEX_MAGIC = b"BMIX"
VERSION = 1
_CODES_HEADER = struct.Struct("<4sIIQ")
_INDEX_HEADER = struct.Struct("<4sIIQI")


class FormatError(ValueError):
    """A file does not follow the expected layout."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


# -- codes -----------------------------------------------------------------


def codes_to_bytes(db: CodeDatabase) -> bytes:
    header = _CODES_HEADER.pack(CODES_MAGIC, VERSION, db.b, db.n)
    return header + db.words.astype("<u8", copy=False).tobytes()


def codes_from_bytes(data: bytes) -> CodeDatabase:
    if len(data) < _CODES_HEADER.size:
        raise FormatError(f"file too short for header: {len(data)} < {_CODES_HEADER.size} bytes", 0)
    magic, version, b, n = _CODES_HEADER.unpack_from(data, 0)
    if magic != CODES_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CODES_MAGIC!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if not 1 <= b <= 4096:
        raise FormatError(f"invalid code length {b}", 8)
    w = num_words(b)
    expected = _CODES_HEADER.size + n * w * 8
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes for {n} codes of {b} bits, got {len(data)}", len(data))
    words = np.frombuffer(data, dtype="<u8", offset=_CODES_HEADER.size).reshape(n, w)
    _check_padding(words, b, _CODES_HEADER.size)
    return CodeDatabase(words.astype(WORD), b)


def _check_padding(words: np.ndarray, b: int, base: int) -> None:
    rem = b % 64
    if rem and len(words):
        bad = np.flatnonzero(words[:, -1] >> np.uint64(rem))
        if len(bad):
            w = words.shape[1]
            offset = base + (int(bad[0]) * w + w - 1) * 8
            raise FormatError(f"nonzero padding bits in record {int(bad[0])}", offset)


def write_codes(db: CodeDatabase, path: str | os.PathLike) -> None:
    Path(path).write_bytes(codes_to_bytes(db))


def read_codes(path: str | os.PathLike) -> CodeDatabase:
    return codes_from_bytes(Path(path).read_bytes())


# -- vectors ---------------------------------------------------------------


def write_vectors(vectors: np.ndarray, path: str | os.PathLike) -> None:
    vectors = np.asarray(vectors, dtype="<f4")
    n, d = vectors.shape
    Path(path).write_bytes(struct.pack("<II", d, n) + vectors.tobytes())


def read_vectors(path: str | os.PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise FormatError("vector file too short for header", 0)
    d, n = struct.unpack_from("<II", data, 0)
    expected = 8 + n * d * 4
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes for {n} vectors of dimension {d}, got {len(data)}", len(data))
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(n, d).astype(np.float32)


# -- index -----------------------------------------------------------------


def index_to_bytes(index: MihIndex) -> bytes:
    db, part = index.db, index.partition
    head = [_INDEX_HEADER.pack(INDEX_MAGIC, VERSION, db.b, db.n, part.m), db.words.astype("<u8").tobytes()]
    for sub in part.assignment:
        head.append(struct.pack("<I", len(sub)))
        head.append(np.asarray(sub, dtype="<u4").tobytes())
    head_bytes = b"".join(head)
    out = [head_bytes, struct.pack("<I", zlib.crc32(head_bytes))]
    for t in index.tables:
        block = b"".join(
            [
                struct.pack("<IQQ", t.s, len(t.group_ids), t.non_empty_buckets),
                t.group_ids.astype("<u8").tobytes(),
                t.occupancy.astype("<u4").tobytes(),
                t.offsets.astype("<u8").tobytes(),
                t.entries.astype("<u4").tobytes(),
            ]
        )
        out.append(block)
        out.append(struct.pack("<I", zlib.crc32(block)))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.data):
            raise FormatError(f"truncated {what}: need {size} bytes, {len(self.data) - self.pos} left", self.pos)
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str, what: str):
        st = struct.Struct(fmt)
        return st.unpack(self.take(st.size, what))

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * itemsize, what), dtype=dtype)


def index_from_bytes(data: bytes) -> MihIndex:
    rd = _Reader(data)
    magic, version, b, n, m = rd.unpack(_INDEX_HEADER.format, "header")
    if magic != INDEX_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {INDEX_MAGIC!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if not 1 <= b <= 4096 or not 1 <= m <= b:
        raise FormatError(f"invalid header: b={b}, m={m}", 8)
    w = num_words(b)
    codes_at = rd.pos
    words = rd.array("<u8", n * w, "codes").reshape(n, w)
    _check_padding(words, b, codes_at)
    assignment = []
    for j in range(m):
        (s,) = rd.unpack("<I", f"partition block {j}")
        if s > b:
            raise FormatError(f"substring {j} claims {s} bits", rd.pos - 4)
        assignment.append(tuple(int(p) for p in rd.array("<u4", s, f"partition block {j}")))
    head_end = rd.pos
    (crc,) = rd.unpack("<I", "header checksum")
    if crc != zlib.crc32(data[:head_end]):
        raise FormatError("header or codes section is corrupted (checksum mismatch)", head_end)
    try:
        partition = Partition(b, tuple(assignment))
        db = CodeDatabase(words.astype(WORD), b)
    except ValueError as exc:
        raise FormatError(f"invalid partition or codes: {exc}", codes_at) from exc

    tables = []
    for j in range(m):
        start = rd.pos
        s, groups, buckets = rd.unpack("<IQQ", f"table {j} header")
        group_ids = rd.array("<u8", groups, f"table {j} group ids")
        occupancy = rd.array("<u4", groups, f"table {j} occupancy")
        offsets = rd.array("<u8", buckets + 1, f"table {j} offsets")
        entries = rd.array("<u4", n, f"table {j} entries")
        end = rd.pos
        (crc,) = rd.unpack("<I", f"table {j} checksum")
        if crc != zlib.crc32(data[start:end]):
            raise FormatError(f"table {j} is corrupted (checksum mismatch)", start)
        if n and int(entries.max()) >= n:
            raise FormatError(f"table {j} references ids beyond {n}", start)
        try:
            tables.append(
                SubstringTable(
                    s,
                    group_ids.astype(np.uint64),
                    occupancy.astype(np.uint32),
                    offsets.astype(np.int64),
                    entries.astype(np.uint32),
                )
            )
        except ValueError as exc:
            raise FormatError(f"table {j} is malformed: {exc}", start) from exc
    if rd.pos != len(data):
        raise FormatError(f"{len(data) - rd.pos} trailing bytes after the last table", rd.pos)
    try:
        return MihIndex(db, partition, tables)
    except ValueError as exc:
        raise FormatError(f"inconsistent index: {exc}") from exc


def write_index(index: MihIndex, path: str | os.PathLike) -> None:
    Path(path).write_bytes(index_to_bytes(index))


def read_index(path: str | os.PathLike) -> MihIndex:
    return index_from_bytes(Path(path).read_bytes())


# -- synthetic data --------------------------------------------------------


def gen_uniform(n: int, b: int, seed: int = 0) -> CodeDatabase:
    """``n`` i.i.d. uniform ``b``-bit codes."""
    rng = np.random.default_rng(seed)
    w = num_words(b)
    words = rng.integers(0, 2**64, size=(n, w), dtype=np.uint64, endpoint=False)
    rem = b % 64
    if rem:
        words[:, -1] &= np.uint64((1 << rem) - 1)
    return CodeDatabase(words, b)


def gen_block_correlated(n: int, b: int, block: int = 4, seed: int = 0) -> CodeDatabase:
    """Codes made of ``b / block`` uniform bits, each repeated over ``block`` adjacent positions."""
    if b % block:
        raise ValueError(f"block size {block} must divide b={b}")
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 2, size=(n, b // block), dtype=np.uint8)
    return CodeDatabase.from_bit_matrix(np.repeat(base, block, axis=1))


def gen_correlated_vectors(n: int, d: int, seed: int = 0, duplicate: int = 4, clusters: int = 32) -> np.ndarray:
    """Clustered Gaussian vectors whose dimensions come in near-duplicate blocks."""
    rng = np.random.default_rng(seed)
    latent_d = max(1, d // duplicate)
    scale = 1.0 / np.sqrt(1 + np.arange(latent_d))
    centers = rng.standard_normal((clusters, latent_d)) * 2.0
    latent = centers[rng.integers(clusters, size=n)] + rng.standard_normal((n, latent_d))
    latent *= scale
    x = np.repeat(latent, duplicate, axis=1)[:, :d]
    if x.shape[1] < d:
        x = np.hstack([x, rng.standard_normal((n, d - x.shape[1]))])
    x += 0.1 * rng.standard_normal(x.shape)
    return x.astype(np.float32)


@dataclass
class LshSpec:
    """Random-hyperplane LSH: bit ``j`` is ``[row_j . (v - mean) >= 0]``."""

    d: int
    b: int
    seed: int = 0
    mean: np.ndarray | None = None
    projection: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.projection = np.random.default_rng(self.seed).standard_normal((self.b, self.d))
        if self.mean is None:
            self.mean = np.zeros(self.d)
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        if self.mean.shape[0] != self.d:
            raise ValueError(f"mean has dimension {self.mean.shape[0]}, expected {self.d}")

    @classmethod
    def fit(cls, vectors: np.ndarray, b: int, seed: int = 0) -> "LshSpec":
        vectors = np.asarray(vectors, dtype=np.float64)
        return cls(vectors.shape[1], b, seed, vectors.mean(axis=0))


def lsh_encode(vectors: np.ndarray, spec: LshSpec, chunk: int = 1 << 16) -> CodeDatabase:
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or vectors.shape[1] != spec.d:
        raise ValueError(f"expected vectors of dimension {spec.d}, got shape {vectors.shape}")
    parts = []
    for lo in range(0, len(vectors), chunk):
        x = vectors[lo : lo + chunk].astype(np.float64) - spec.mean
        parts.append(CodeDatabase.from_bit_matrix(x @ spec.projection.T >= 0).words)
    if not parts:
        return CodeDatabase(np.zeros((0, num_words(spec.b)), dtype=WORD), spec.b)
    return CodeDatabase(np.concatenate(parts), spec.b)
