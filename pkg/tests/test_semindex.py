"""Bucketed vector index, exact oracle, numeric/text indexes."""

import heapq
import random

import numpy as np
import pytest

from semagraph.errors import DimMismatch, DuplicateId, EmptySpace, KindMismatch, StaleIndex
from semagraph.extraction import SemanticKind, SemanticValue
from semagraph.semindex import (
    SemanticSpace,
    batch_build,
    brute_knn,
    load_index,
    numeric_range,
    save_index,
    squared_distances,
    text_lookup,
    tokenize,
)


def vector_space(vectors, sub_key="face", serial=1) -> SemanticSpace:
    space = SemanticSpace(sub_key, serial, SemanticKind.VECTOR, dim=len(vectors[0]))
    for i, v in enumerate(vectors):
        space.add(i, SemanticValue.vector(v))
    return space


def random_space(n: int, dim: int, seed: int) -> SemanticSpace:
    rng = np.random.default_rng(seed)
    return vector_space(rng.uniform(0, 1, size=(n, dim)).astype(np.float32).tolist())


# -- pick_bucket ------------------------------------------------------------------


def test_pick_bucket_exact_core_match():
    space = vector_space([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [0.1, 0.1], [5.1, 5.1]])
    index = batch_build(space, bucket_count=3, rng_seed=1)
    for b, bucket in enumerate(index.buckets):
        assert index.pick_bucket(bucket.core) == b


def test_pick_bucket_tie_goes_to_lower_id():
    space = vector_space([[0.0, 0.0], [2.0, 0.0]])
    index = batch_build(space, bucket_count=2, rng_seed=0)
    cores = [tuple(b.core.tolist()) for b in index.buckets]
    assert set(cores) == {(0.0, 0.0), (2.0, 0.0)}
    assert index.pick_bucket([1.0, 0.0]) == 0


def test_pick_bucket_matches_distance_table_oracle():
    space = random_space(500, 8, seed=3)
    index = batch_build(space, bucket_count=20, rng_seed=4)
    cores = np.vstack([b.core for b in index.buckets])
    rng = np.random.default_rng(5)
    queries = rng.uniform(0, 1, size=(1000, 8)).astype(np.float32)
    for q in queries:
        table = squared_distances(q, cores)
        expected = min(range(len(cores)), key=lambda i: (table[i], i))
        assert index.pick_bucket(q) == expected


def test_pick_bucket_dim_mismatch():
    index = batch_build(random_space(10, 4, seed=0), bucket_count=2, rng_seed=0)
    with pytest.raises(DimMismatch):
        index.pick_bucket([0.0, 0.0])


# -- batch_build -------------------------------------------------------------------


def test_bucket_count_follows_divisor_rule():
    space = SemanticSpace("big", 1, SemanticKind.VECTOR, dim=1)
    for i in range(250_000):
        space.add(i, SemanticValue.vector([float(i % 977)]))
    index = batch_build(space, bucket_divisor=100_000, rng_seed=0)
    assert len(index.buckets) == 2


def test_small_space_min_buckets():
    space = random_space(50, 4, seed=1)
    index = batch_build(space, bucket_divisor=100_000, min_buckets=1, rng_seed=0)
    assert len(index.buckets) == 1
    # single bucket means kNN is exact by construction
    q = [0.5, 0.5, 0.5, 0.5]
    assert index.knn(q, 5, nprobe=1).ids == brute_knn(space, q, 5).ids


def test_fixed_seed_reproducible_assignment():
    space = random_space(300, 6, seed=2)
    a = batch_build(space, bucket_count=7, rng_seed=42)
    b = batch_build(space, bucket_count=7, rng_seed=42)
    assert [bk.ids for bk in a.buckets] == [bk.ids for bk in b.buckets]
    assert all(np.array_equal(x.core, y.core) for x, y in zip(a.buckets, b.buckets))


def test_partition_invariant():
    space = random_space(400, 5, seed=6)
    index = batch_build(space, bucket_count=9, rng_seed=7)
    seen = [i for bucket in index.buckets for i in bucket.ids]
    assert sorted(seen) == sorted(space.members)
    assert len(seen) == len(set(seen))


def test_empty_space_rejected():
    space = SemanticSpace("v", 1, SemanticKind.VECTOR, dim=2)
    with pytest.raises(EmptySpace):
        batch_build(space)


# -- dynamic_insert -----------------------------------------------------------------


def test_dynamic_insert_found_at_distance_zero():
    space = random_space(100, 4, seed=8)
    index = batch_build(space, bucket_count=4, rng_seed=9)
    v = [0.123, 0.456, 0.789, 0.5]
    index.dynamic_insert(1000, v)
    result = index.knn(v, 1, nprobe=len(index.buckets))
    assert result.ids == (1000,)
    assert result.hits[0][1] == 0.0


def test_dynamic_insert_grows_single_bucket():
    space = random_space(20, 3, seed=10)
    index = batch_build(space, bucket_count=1, rng_seed=0)
    before = len(index.buckets[0].ids)
    index.dynamic_insert(999, [0.1, 0.2, 0.3])
    assert len(index.buckets[0].ids) == before + 1


def test_dynamic_insert_duplicate_and_dim_checks():
    space = random_space(10, 3, seed=11)
    index = batch_build(space, bucket_count=2, rng_seed=0)
    with pytest.raises(DuplicateId):
        index.dynamic_insert(5, [0.1, 0.2, 0.3])
    with pytest.raises(DimMismatch):
        index.dynamic_insert(100, [0.1])


def test_many_inserts_full_probe_equals_brute():
    space = random_space(500, 8, seed=12)
    index = batch_build(space, bucket_count=10, rng_seed=13)
    rng = np.random.default_rng(14)
    for i, v in enumerate(rng.uniform(0, 1, size=(1000, 8)).astype(np.float32)):
        index.dynamic_insert(10_000 + i, v)
    queries = rng.uniform(0, 1, size=(100, 8)).astype(np.float32)
    for q in queries:
        assert index.knn(q, 10, nprobe=len(index.buckets)).hits == brute_knn(space, q, 10).hits


# -- knn ---------------------------------------------------------------------------


def test_full_probe_is_exact():
    space = random_space(1000, 16, seed=15)
    index = batch_build(space, bucket_count=12, rng_seed=16)
    rng = np.random.default_rng(17)
    for q in rng.uniform(0, 1, size=(50, 16)).astype(np.float32):
        for k in (1, 10, 50):
            assert index.knn(q, k, nprobe=len(index.buckets)).hits == brute_knn(space, q, k).hits


def test_k_exceeding_population_saturates():
    space = random_space(30, 4, seed=18)
    index = batch_build(space, bucket_count=3, rng_seed=19)
    result = index.knn([0.5, 0.5, 0.5, 0.5], 100, nprobe=3)
    assert len(result) == 30
    dists = [d for _, d in result.hits]
    assert dists == sorted(dists)


def test_recall_monotone_in_nprobe():
    from semagraph.bench import clustered_vectors, build_space, recall_of

    data = clustered_vectors(2000, 16, clusters=20, seed=20)
    space = build_space(data)
    index = batch_build(space, bucket_count=20, rng_seed=21)
    rng = np.random.default_rng(22)
    picks = rng.integers(0, 2000, size=50)
    queries = data[picks] + rng.normal(0, 0.01, size=(50, 16)).astype(np.float32)
    avg = []
    for nprobe in (1, 2, 4, 20):
        recalls = []
        for q in queries:
            exact = brute_knn(space, q, 10).ids
            approx = index.knn(q, 10, nprobe=nprobe).ids
            recalls.append(recall_of(approx, exact))
        avg.append(sum(recalls) / len(recalls))
    assert all(b >= a - 1e-12 for a, b in zip(avg, avg[1:]))
    assert avg[-1] == pytest.approx(1.0)


def test_stale_index_guard():
    space = random_space(50, 4, seed=23)
    index = batch_build(space, bucket_count=2, rng_seed=0)
    space.serial = 2  # model bumped; members re-extracted elsewhere
    with pytest.raises(StaleIndex):
        index.knn([0.1, 0.2, 0.3, 0.4], 1, nprobe=1)
    with pytest.raises(StaleIndex):
        index.pick_bucket([0.1, 0.2, 0.3, 0.4])


# -- brute_knn ----------------------------------------------------------------------


def test_brute_singleton():
    space = vector_space([[1.0, 2.0]])
    assert brute_knn(space, [0.0, 0.0], 1).ids == (0,)


def test_brute_k_equals_population_sorted():
    space = random_space(40, 3, seed=24)
    result = brute_knn(space, [0.5, 0.5, 0.5], 40)
    assert len(result) == 40
    dists = [d for _, d in result.hits]
    assert dists == sorted(dists)


def _selection_knn(space, q, k):
    """Independent O(n*k) selection via a bounded heap, same tie rule."""
    scored = []
    for item_id in space.members:
        vec = np.asarray(space.members[item_id].data, dtype=np.float32)
        d = squared_distances(np.asarray(q, dtype=np.float32), vec.reshape(1, -1))[0]
        scored.append((float(d), item_id))
    return tuple(i for _, i in heapq.nsmallest(k, scored))


def test_brute_agrees_with_independent_selection():
    space = random_space(300, 6, seed=25)
    rng = np.random.default_rng(26)
    for q in rng.uniform(0, 1, size=(20, 6)).astype(np.float32):
        assert brute_knn(space, q, 15).ids == _selection_knn(space, q, 15)


# -- numeric and text indexes ----------------------------------------------------------


def number_space(values) -> SemanticSpace:
    space = SemanticSpace("age", 1, SemanticKind.NUMBER)
    for i, v in enumerate(values):
        space.add(i, SemanticValue.number(v))
    return space


def test_numeric_range_inclusive():
    space = number_space(range(1, 101))
    ids = numeric_range(space, 10, 20)
    assert len(ids) == 11
    assert all(10 <= space.members[i].data <= 20 for i in ids)


def test_numeric_range_matches_scan_oracle():
    rng = random.Random(27)
    values = [rng.uniform(-50, 50) for _ in range(500)]
    space = number_space(values)
    for _ in range(50):
        lo = rng.uniform(-60, 60)
        hi = lo + rng.uniform(0, 40)
        expected = sorted(i for i, v in enumerate(values) if lo <= v <= hi)
        assert numeric_range(space, lo, hi) == expected


def test_text_lookup_posting_list():
    space = SemanticSpace("caption", 1, SemanticKind.TEXT)
    space.add(0, SemanticValue.text("a cat"))
    space.add(1, SemanticValue.text("dog"))
    assert text_lookup(space, "cat") == [0]
    assert text_lookup(space, "CAT") == [0]
    assert text_lookup(space, "bird") == []


def test_tokenize_lowercase_split():
    assert tokenize("The Cat, the-hat!") == ["the", "cat", "the", "hat"]


def test_kind_mismatch_on_wrong_space():
    space = number_space([1, 2, 3])
    with pytest.raises(KindMismatch):
        text_lookup(space, "x")
    with pytest.raises(KindMismatch):
        brute_knn(space, [1.0], 1)


# -- snapshot ------------------------------------------------------------------------


def test_index_snapshot_roundtrip(tmp_path):
    space = random_space(200, 8, seed=28)
    index = batch_build(space, bucket_count=5, rng_seed=29)
    path = str(tmp_path / "face.pivf")
    save_index(index, path)
    with open(path, "rb") as f:
        assert f.read(4) == b"PIVF"
    loaded = load_index(path, space)
    assert [b.ids for b in loaded.buckets] == [b.ids for b in index.buckets]
    rng = np.random.default_rng(30)
    for q in rng.uniform(0, 1, size=(10, 8)).astype(np.float32):
        assert loaded.knn(q, 5, nprobe=5).hits == index.knn(q, 5, nprobe=5).hits
