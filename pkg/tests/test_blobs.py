"""Blob store: placement, location arithmetic, streaming reads, formats."""

import hashlib
import os
import struct

import pytest
from hypothesis import given, settings, strategies as st

from semagraph.blobs import BlobStore, locate, META_RECORD_SIZE
from semagraph.errors import InvalidConfig, RangeOutOfBounds, UnknownBlob


@pytest.fixture
def store(tmp_path):
    return BlobStore(str(tmp_path / "blobs"))


def test_small_payload_is_inline(store):
    bid = store.put_blob(b"x" * 4096, "image/png")
    assert store.is_inline(bid)


def test_threshold_boundary_is_external(store):
    # exactly 10 kB is not "less than 10 kB"
    bid = store.put_blob(b"x" * (10 * 1024))
    assert not store.is_inline(bid)


@given(delta=st.sampled_from([-1, 0, 1]))
@settings(deadline=None)
def test_placement_rule_around_threshold(delta):
    store = BlobStore(None, inline_threshold=2048)
    length = 2048 + delta
    bid = store.put_blob(b"a" * length)
    assert store.is_inline(bid) == (length < 2048)


def test_large_payload_roundtrip_bit_exact(store):
    payload = os.urandom(10 * 1024 * 1024)
    bid = store.put_blob(payload, "application/octet-stream")
    read_back = store.read_all(bid)
    assert hashlib.sha256(read_back).hexdigest() == hashlib.sha256(payload).hexdigest()


def test_locate_direct_arithmetic():
    assert locate(7, 3) == (2, 1)


def test_locate_zero_id():
    for n in (1, 3, 1024):
        assert locate(0, n) == (0, 0)


def test_locate_zero_columns_rejected():
    with pytest.raises(InvalidConfig):
        locate(5, 0)


def test_locate_bijective_inverse():
    for n in (1, 3, 17):
        seen = set()
        for bid in range(5000):
            row, col = locate(bid, n)
            assert row * n + col == bid
            assert (row, col) not in seen
            seen.add((row, col))


def test_first_byte_of_big_blob_fetches_one_chunk(store):
    payload = os.urandom(10 * 1024 * 1024)
    bid = store.put_blob(payload)
    handle = store.open_blob(bid)
    first = handle.read_range(0, 1)
    assert first == payload[:1]
    assert handle.bytes_read_counter <= store.chunk_size


def test_zero_length_read_at_end(store):
    bid = store.put_blob(os.urandom(64 * 1024))
    handle = store.open_blob(bid)
    assert handle.read_range(handle.meta.length, 0) == b""
    assert handle.bytes_read_counter == 0


def test_middle_byte_equals_full_read_oracle(store):
    payload = os.urandom(3 * 64 * 1024 + 17)
    bid = store.put_blob(payload)
    offset = len(payload) // 2
    byte = store.open_blob(bid).read_range(offset, 1)
    full = store.open_blob(bid).read_all()
    assert byte == full[offset : offset + 1]


def test_read_out_of_bounds(store):
    bid = store.put_blob(b"abc")
    handle = store.open_blob(bid)
    with pytest.raises(RangeOutOfBounds):
        handle.read_range(2, 5)


def test_unknown_blob(store):
    with pytest.raises(UnknownBlob):
        store.blob_meta(999)
    with pytest.raises(UnknownBlob):
        store.open_blob(999)


def test_meta_echoes_inputs(store):
    bid = store.put_blob(b"p" * 123, "image/png")
    meta = store.blob_meta(bid)
    assert meta.length == 123
    assert meta.mime == "image/png"
    assert meta.id == bid


def test_meta_fetch_reads_no_payload(store):
    bid = store.put_blob(os.urandom(200 * 1024))
    before = store.payload_bytes_fetched
    store.blob_meta(bid)
    assert store.payload_bytes_fetched == before


def test_meta_record_is_24_bytes(store):
    meta = store.blob_meta(store.put_blob(b"hello", "text/plain"))
    assert len(meta.pack(0, external=False)) == META_RECORD_SIZE == 24


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_range_reads_equal_slices_of_full_read(data):
    store = BlobStore(None, inline_threshold=1024, chunk_size=512)
    length = data.draw(st.integers(1024, 8192))
    payload = bytes(i % 251 for i in range(length))
    bid = store.put_blob(payload)
    full = store.read_all(bid)
    assert full == payload
    for _ in range(5):
        offset = data.draw(st.integers(0, length - 1))
        span = data.draw(st.integers(0, length - offset))
        assert store.open_blob(bid).read_range(offset, span) == payload[offset : offset + span]


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_chunk_granular_fetch_bound(data):
    chunk = 512
    store = BlobStore(None, inline_threshold=256, chunk_size=chunk)
    length = data.draw(st.integers(300, 10000))
    bid = store.put_blob(b"z" * length)
    offset = data.draw(st.integers(0, length - 1))
    span = data.draw(st.integers(1, length - offset))
    handle = store.open_blob(bid)
    handle.read_range(offset, span)
    max_chunks = -(-span // chunk) + 1
    assert handle.bytes_read_counter <= max_chunks * chunk


def test_row_file_format_and_colocation(tmp_path):
    store = BlobStore(str(tmp_path / "b"), inline_threshold=128, chunk_size=256, num_columns=4)
    ids = [store.put_blob(bytes([i]) * 1000) for i in range(1, 6)]
    rows = {locate(b, 4)[0] for b in ids}
    for row in rows:
        path = tmp_path / "b" / f"row_{row}.pblb"
        assert path.exists()
        with open(path, "rb") as f:
            head = f.read(6)
        assert head[:4] == b"PBLB"
        assert int.from_bytes(head[4:6], "little") == 1
    # chunk record framing: u32 length prefix per chunk
    row0 = tmp_path / "b" / f"row_{min(rows)}.pblb"
    with open(row0, "rb") as f:
        f.seek(6)
        (clen,) = struct.unpack("<I", f.read(4))
        assert clen == 256


def test_reopen_preserves_external_blobs(tmp_path):
    directory = str(tmp_path / "b")
    store = BlobStore(directory, inline_threshold=64, chunk_size=128, num_columns=8)
    payloads = {store.put_blob(os.urandom(500), "image/jpeg"): None for _ in range(7)}
    payloads = {bid: store.read_all(bid) for bid in payloads}
    inline_id = store.put_blob(b"tiny", "text/plain")
    inline_backup = store.inline_payloads()

    reopened = BlobStore(directory, inline_threshold=64, chunk_size=128, num_columns=8)
    reopened.restore_inline_payloads(inline_backup)
    for bid, payload in payloads.items():
        assert reopened.read_all(bid) == payload
        assert reopened.blob_meta(bid).mime == "image/jpeg"
    assert reopened.read_all(inline_id) == b"tiny"
    # allocator resumes after the highest persisted id
    assert reopened.put_blob(b"next") == inline_id + 1
