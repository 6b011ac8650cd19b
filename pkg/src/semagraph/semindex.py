"""Indexes over semantic spaces.

A semantic space collects every extracted value of one sub-property under
one model serial. Vector spaces get a bucketed approximate index: the
space is split into buckets, each owning a core vector sampled from the
space itself; a member lives in the bucket whose core is nearest. A kNN
query ranks cores, linearly scans the ``nprobe`` nearest buckets and
merges; probing every bucket degenerates to exact search, which is the
oracle property the tests lean on.

Number and text spaces get an ordered index and an inverted token index.

Distances are Euclidean (squared, monotonic for ranking) and deliberately
decoupled from the cosine used by similarity comparison. Ties break by
ascending item id everywhere. Indexes remember the serial they were built
for and refuse queries once the space has moved on (:class:`StaleIndex`).
"""

from __future__ import annotations

import bisect
import random
import struct
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DataError,
    DimMismatch,
    DuplicateId,
    EmptySpace,
    KindMismatch,
    StaleIndex,
)
from .extraction import SemanticKind, SemanticValue

INDEX_MAGIC = b"PIVF"
DEFAULT_BUCKET_DIVISOR = 100_000


class SemanticSpace:
    """All values of one sub-property key under one model serial."""

    def __init__(self, sub_key: str, serial: int, kind: SemanticKind, dim: Optional[int] = None):
        self.sub_key = sub_key
        self.serial = serial
        self.kind = kind
        self.dim = dim
        self.members: dict[int, SemanticValue] = {}

    def add(self, item_id: int, value: SemanticValue) -> None:
        if value.kind is not self.kind:
            raise KindMismatch(f"space {self.sub_key} holds {self.kind.value}, got {value.kind.value}")
        if self.kind is SemanticKind.VECTOR:
            if self.dim is None:
                self.dim = value.dim
            elif value.dim != self.dim:
                raise DimMismatch(f"space dim {self.dim}, got {value.dim}")
        if item_id in self.members:
            raise DuplicateId(f"item {item_id} already in space {self.sub_key}")
        self.members[item_id] = value

    def __len__(self) -> int:
        return len(self.members)


def _as_f32(vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float32)
    if arr.ndim != 1:
        raise DataError("vectors must be one-dimensional")
    return arr


def squared_distances(q: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """Row-wise squared Euclidean distance, double precision.

    Both the bucketed and the brute-force search paths rank through this
    one function so their distance values agree bit-for-bit.
    """
    diff = mat.astype(np.float64) - q.astype(np.float64)
    return np.sum(diff * diff, axis=1)


@dataclass
class Bucket:
    core: np.ndarray
    ids: list = field(default_factory=list)
    vectors: list = field(default_factory=list)

    def matrix(self) -> np.ndarray:
        return np.vstack(self.vectors) if self.vectors else np.empty((0, len(self.core)), dtype=np.float32)


@dataclass(frozen=True)
class KnnResult:
    """Top-k hits ordered by ascending distance, ties by ascending id."""

    hits: tuple  # of (item_id, distance)

    @property
    def ids(self) -> tuple:
        return tuple(item_id for item_id, _ in self.hits)

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)


def _top_k(ids, dists, k: int) -> KnnResult:
    order = sorted(range(len(ids)), key=lambda i: (dists[i], ids[i]))
    return KnnResult(tuple((ids[i], float(dists[i])) for i in order[:k]))


def brute_knn(space: SemanticSpace, q, k: int) -> KnnResult:
    """Exact top-k by linear scan; the recall oracle."""
    if space.kind is not SemanticKind.VECTOR:
        raise KindMismatch("brute_knn needs a vector space")
    qv = _as_f32(q)
    if space.dim is not None and len(qv) != space.dim:
        raise DimMismatch(f"query dim {len(qv)}, space dim {space.dim}")
    ids = list(space.members)
    if not ids:
        return KnnResult(())
    mat = np.vstack([_as_f32(space.members[i].data) for i in ids])
    return _top_k(ids, squared_distances(qv, mat), k)


class VectorIndex:
    """Bucketed inverted-list index over one vector space."""

    def __init__(self, space: SemanticSpace, buckets: list, built_for_serial: int):
        self.space = space
        self.buckets = buckets
        self.built_for_serial = built_for_serial
        self.dim = space.dim
        self._insert_lock = threading.Lock()

    def _check(self, q=None) -> None:
        if self.built_for_serial != self.space.serial:
            raise StaleIndex(
                f"index built for serial {self.built_for_serial}, space is at {self.space.serial}"
            )
        if q is not None and len(q) != self.dim:
            raise DimMismatch(f"query dim {len(q)}, index dim {self.dim}")

    @property
    def core_matrix(self) -> np.ndarray:
        return np.vstack([b.core for b in self.buckets])

    def pick_bucket(self, vec) -> int:
        """Bucket id whose core is nearest; ties go to the lowest id."""
        v = _as_f32(vec)
        self._check(v)
        dists = squared_distances(v, self.core_matrix)
        return int(np.argmin(dists))  # argmin returns the first minimum

    def dynamic_insert(self, item_id: int, vec) -> None:
        """Add one member without touching the cores."""
        v = _as_f32(vec)
        bucket_id = self.pick_bucket(v)
        with self._insert_lock:
            self.space.add(item_id, SemanticValue.vector(v.tolist()))
            bucket = self.buckets[bucket_id]
            bucket.ids.append(item_id)
            bucket.vectors.append(v)

    def knn(self, q, k: int, nprobe: int = 1) -> KnnResult:
        """Scan the ``nprobe`` buckets with nearest cores, merge top-k."""
        if k < 1 or nprobe < 1:
            raise DataError("k and nprobe must be >= 1")
        qv = _as_f32(q)
        self._check(qv)
        core_dists = squared_distances(qv, self.core_matrix)
        order = sorted(range(len(self.buckets)), key=lambda i: (core_dists[i], i))
        probe = order[: min(nprobe, len(self.buckets))]
        all_ids: list = []
        all_dists: list = []
        for b in probe:
            bucket = self.buckets[b]
            if not bucket.ids:
                continue
            dists = squared_distances(qv, bucket.matrix())
            all_ids.extend(bucket.ids)
            all_dists.extend(dists)
        return _top_k(all_ids, all_dists, k)

    def bucket_sizes(self) -> list:
        return [len(b.ids) for b in self.buckets]

    def member_count(self) -> int:
        return sum(len(b.ids) for b in self.buckets)


def batch_build(
    space: SemanticSpace,
    *,
    bucket_divisor: int = DEFAULT_BUCKET_DIVISOR,
    min_buckets: int = 1,
    bucket_count: Optional[int] = None,
    rng_seed: int = 0,
) -> VectorIndex:
    """Build a bucketed index over a vector space.

    Bucket count defaults to ``max(min_buckets, |space| // bucket_divisor)``;
    ``bucket_count`` overrides it (desk-scale spaces would otherwise always
    collapse into a single bucket). Cores are sampled from the space without
    replacement; the build is deterministic for a fixed seed.
    """
    if space.kind is not SemanticKind.VECTOR:
        raise KindMismatch("batch_build needs a vector space")
    if len(space) == 0:
        raise EmptySpace(f"space {space.sub_key} is empty")
    if bucket_count is None:
        bucket_count = max(min_buckets, len(space) // bucket_divisor)
    bucket_count = max(1, min(bucket_count, len(space)))

    rng = random.Random(rng_seed)
    member_ids = sorted(space.members)
    core_ids = rng.sample(member_ids, bucket_count)
    buckets = [Bucket(core=_as_f32(space.members[cid].data)) for cid in core_ids]

    index = VectorIndex(space, buckets, built_for_serial=space.serial)
    core_matrix = index.core_matrix
    for item_id in member_ids:
        v = _as_f32(space.members[item_id].data)
        b = int(np.argmin(squared_distances(v, core_matrix)))
        buckets[b].ids.append(item_id)
        buckets[b].vectors.append(v)
    return index


# -- ordered and inverted indexes ------------------------------------------------


def tokenize(text: str) -> list:
    """Lowercase tokens split on anything non-alphanumeric."""
    tokens = []
    word = []
    for ch in text.lower():
        if ch.isalnum():
            word.append(ch)
        elif word:
            tokens.append("".join(word))
            word = []
    if word:
        tokens.append("".join(word))
    return tokens


class NumericIndex:
    """Ordered index over a number space; range queries by bisection."""

    def __init__(self, space: SemanticSpace):
        if space.kind is not SemanticKind.NUMBER:
            raise KindMismatch("NumericIndex needs a number space")
        self.space = space
        self.built_for_serial = space.serial
        self._entries = sorted((v.data, item_id) for item_id, v in space.members.items())

    def range(self, lo: float, hi: float) -> list:
        if self.built_for_serial != self.space.serial:
            raise StaleIndex("numeric index is stale")
        left = bisect.bisect_left(self._entries, (lo, -1))
        right = bisect.bisect_right(self._entries, (hi, float("inf")))
        return sorted(item_id for _, item_id in self._entries[left:right])


class TextIndex:
    """Inverted token index over a text space."""

    def __init__(self, space: SemanticSpace):
        if space.kind not in (SemanticKind.TEXT, SemanticKind.CATEGORICAL):
            raise KindMismatch("TextIndex needs a text or categorical space")
        self.space = space
        self.built_for_serial = space.serial
        self._postings: dict[str, list] = {}
        for item_id, value in sorted(space.members.items()):
            for token in set(tokenize(value.data)):
                self._postings.setdefault(token, []).append(item_id)

    def lookup(self, token: str) -> list:
        if self.built_for_serial != self.space.serial:
            raise StaleIndex("text index is stale")
        return list(self._postings.get(token.lower(), []))


def numeric_range(space: SemanticSpace, lo: float, hi: float) -> list:
    return NumericIndex(space).range(lo, hi)


def text_lookup(space: SemanticSpace, token: str) -> list:
    return TextIndex(space).lookup(token)


# -- index snapshot ---------------------------------------------------------------
#
#   magic "PIVF" | u32 dim | u32 bucket count
#   per bucket: dim f32 core | u32 member count | members (u64 id, dim f32)
#   little-endian throughout


def save_index(index: VectorIndex, path: str) -> None:
    dim = index.dim
    out = bytearray()
    out += INDEX_MAGIC + struct.pack("<II", dim, len(index.buckets))
    for bucket in index.buckets:
        out += struct.pack(f"<{dim}f", *bucket.core.tolist())
        out += struct.pack("<I", len(bucket.ids))
        for item_id, vec in zip(bucket.ids, bucket.vectors):
            out += struct.pack("<Q", item_id) + struct.pack(f"<{dim}f", *vec.tolist())
    with open(path, "wb") as f:
        f.write(out)


def load_index(path: str, space: SemanticSpace) -> VectorIndex:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != INDEX_MAGIC:
        raise DataError(f"{path}: not an index snapshot")
    dim, n_buckets = struct.unpack_from("<II", buf, 4)
    pos = 12
    vec_size = 4 * dim
    buckets = []
    for _ in range(n_buckets):
        core = np.array(struct.unpack_from(f"<{dim}f", buf, pos), dtype=np.float32)
        pos += vec_size
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        bucket = Bucket(core=core)
        for _ in range(count):
            (item_id,) = struct.unpack_from("<Q", buf, pos)
            pos += 8
            vec = np.array(struct.unpack_from(f"<{dim}f", buf, pos), dtype=np.float32)
            pos += vec_size
            bucket.ids.append(item_id)
            bucket.vectors.append(vec)
        buckets.append(bucket)
    return VectorIndex(space, buckets, built_for_serial=space.serial)
