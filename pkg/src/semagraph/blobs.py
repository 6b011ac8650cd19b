"""BLOB storage: metadata, inline/external placement, streaming range reads.

Payloads shorter than the inline threshold (default 10 kB) are kept
in memory and persisted inside the graph snapshot alongside other long
values; larger payloads are appended to chunked row files, one file per
row key, where ``row = id // num_columns`` and ``col = id % num_columns``.
Blobs are immutable once written.

On-disk formats (all little-endian):

* meta file: magic ``PBLM`` | u16 version, then fixed 24-byte records
  ``u64 length | u64 id | u32 mime_code | u32 flags`` (flag bit 0 set for
  external placement). Mime codes index a side-car text file, one media
  type per line.
* row file: magic ``PBLB`` | u16 version, then chunk records
  ``u32 chunk_len | payload``. One blob's chunks are contiguous; their
  offsets are reconstructed from the meta records on open.

Reads are chunk-granular: fetching one byte costs at most one chunk.
Every handle counts the bytes it pulled from the backing files, which is
what the streaming benchmarks assert on.
"""

from __future__ import annotations

import io
import os
import struct
import threading
from dataclasses import dataclass, field
from typing import BinaryIO, Optional, Union

from .errors import InvalidConfig, IoError, RangeOutOfBounds, UnknownBlob

BlobId = int

DEFAULT_INLINE_THRESHOLD = 10 * 1024
DEFAULT_CHUNK_SIZE = 64 * 1024
DEFAULT_NUM_COLUMNS = 1024

META_MAGIC = b"PBLM"
ROW_MAGIC = b"PBLB"
FORMAT_VERSION = 1
META_RECORD_SIZE = 24
_FLAG_EXTERNAL = 0x1


def locate(blob_id: BlobId, num_columns: int) -> tuple:
    """Map a blob id to its ``(row_key, column_key)`` cell.

    The mapping is a bijection for fixed ``num_columns``:
    ``row * num_columns + col == id``.
    """
    if num_columns < 1:
        raise InvalidConfig("num_columns must be >= 1")
    return blob_id // num_columns, blob_id % num_columns


@dataclass(frozen=True)
class BlobMeta:
    id: BlobId
    length: int
    mime: str

    def pack(self, mime_code: int, external: bool) -> bytes:
        flags = _FLAG_EXTERNAL if external else 0
        return struct.pack("<QQII", self.length, self.id, mime_code, flags)


@dataclass
class BlobHandle:
    """Cursor over one blob; tracks bytes fetched from the backing store.

    ``bytes_read_counter`` counts backing-store bytes (whole chunks), not
    bytes returned to the caller.
    """

    id: BlobId
    meta: BlobMeta
    cursor: int = 0
    bytes_read_counter: int = 0
    _store: "BlobStore" = field(default=None, repr=False)

    def read_range(self, offset: int, length: int) -> bytes:
        """Exactly ``length`` bytes starting at ``offset``."""
        if offset < 0 or length < 0 or offset + length > self.meta.length:
            raise RangeOutOfBounds(
                f"range [{offset}, {offset + length}) exceeds blob length {self.meta.length}"
            )
        if length == 0:
            return b""
        data = self._store._fetch_range(self, offset, length)
        self.cursor = offset + length
        return data

    def read(self, length: int) -> bytes:
        """Sequential read from the cursor position."""
        length = min(length, self.meta.length - self.cursor)
        return self.read_range(self.cursor, length)

    def read_all(self) -> bytes:
        """Eager whole-payload read; fetches every chunk."""
        return self.read_range(0, self.meta.length)


class BlobStore:
    """Inline/external blob store over one directory (or pure in-memory)."""

    def __init__(
        self,
        directory: Optional[str] = None,
        *,
        inline_threshold: int = DEFAULT_INLINE_THRESHOLD,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        num_columns: int = DEFAULT_NUM_COLUMNS,
    ) -> None:
        if inline_threshold < 1 or chunk_size < 1:
            raise InvalidConfig("inline_threshold and chunk_size must be positive")
        if num_columns < 1:
            raise InvalidConfig("num_columns must be >= 1")
        self.directory = directory
        self.inline_threshold = inline_threshold
        self.chunk_size = chunk_size
        self.num_columns = num_columns

        self._metas: dict[BlobId, BlobMeta] = {}
        self._external: set = set()
        self._inline: dict[BlobId, bytes] = {}
        # blob id -> list of (payload offset in row file, chunk length)
        self._chunk_index: dict[BlobId, list] = {}
        self._mimes: list[str] = []
        self._mime_codes: dict[str, int] = {}
        self._next_id: BlobId = 1
        self._write_lock = threading.Lock()
        self.payload_bytes_fetched = 0  # store-wide backing-store counter

        if directory is not None:
            os.makedirs(directory, exist_ok=True)
            self._load_existing()

    # -- paths ----------------------------------------------------------------

    def _meta_path(self) -> str:
        return os.path.join(self.directory, "meta.pblm")

    def _mime_path(self) -> str:
        return os.path.join(self.directory, "mimes.txt")

    def _row_path(self, row_key: int) -> str:
        return os.path.join(self.directory, f"row_{row_key}.pblb")

    # -- persistence ------------------------------------------------------------

    def _load_existing(self) -> None:
        if os.path.exists(self._mime_path()):
            with open(self._mime_path(), encoding="utf-8") as f:
                self._mimes = [line.rstrip("\n") for line in f]
            self._mime_codes = {m: i for i, m in enumerate(self._mimes)}
        if not os.path.exists(self._meta_path()):
            return
        with open(self._meta_path(), "rb") as f:
            header = f.read(6)
            if header[:4] != META_MAGIC:
                raise IoError(f"{self._meta_path()}: bad magic")
            records = f.read()
        # Replay meta records in append order to rebuild the chunk index:
        # each external blob's chunks were appended contiguously to its row
        # file, so per-file cursors reproduce every offset.
        row_cursor: dict[int, int] = {}
        for off in range(0, len(records), META_RECORD_SIZE):
            length, bid, mime_code, flags = struct.unpack_from("<QQII", records, off)
            meta = BlobMeta(bid, length, self._mimes[mime_code])
            self._metas[bid] = meta
            self._next_id = max(self._next_id, bid + 1)
            if flags & _FLAG_EXTERNAL:
                self._external.add(bid)
                row_key, _ = locate(bid, self.num_columns)
                cursor = row_cursor.get(row_key, 6)  # past magic + version
                chunks = []
                remaining = length
                while remaining > 0:
                    clen = min(self.chunk_size, remaining)
                    chunks.append((cursor + 4, clen))
                    cursor += 4 + clen
                    remaining -= clen
                row_cursor[row_key] = cursor
                self._chunk_index[bid] = chunks

    def _append_meta(self, meta: BlobMeta, external: bool) -> None:
        code = self._mime_code(meta.mime)
        if self.directory is None:
            return
        new_file = not os.path.exists(self._meta_path())
        with open(self._meta_path(), "ab") as f:
            if new_file:
                f.write(META_MAGIC + struct.pack("<H", FORMAT_VERSION))
            f.write(meta.pack(code, external))

    def _mime_code(self, mime: str) -> int:
        if mime not in self._mime_codes:
            self._mime_codes[mime] = len(self._mimes)
            self._mimes.append(mime)
            if self.directory is not None:
                with open(self._mime_path(), "w", encoding="utf-8") as f:
                    f.write("\n".join(self._mimes) + "\n")
        return self._mime_codes[mime]

    # -- writing ----------------------------------------------------------------

    def put_blob(self, payload: Union[bytes, BinaryIO], mime: str = "application/octet-stream") -> BlobId:
        """Store a payload, placing it inline or externally by length."""
        stream = io.BytesIO(payload) if isinstance(payload, (bytes, bytearray)) else payload
        with self._write_lock:
            bid = self._next_id
            self._next_id += 1
            head = stream.read(self.inline_threshold)
            if len(head) < self.inline_threshold:
                self._inline[bid] = bytes(head)
                meta = BlobMeta(bid, len(head), mime)
                self._metas[bid] = meta
                self._append_meta(meta, external=False)
                return bid
            return self._put_external(bid, head, stream, mime)

    def _put_external(self, bid: BlobId, head: bytes, stream: BinaryIO, mime: str) -> BlobId:
        row_key, _ = locate(bid, self.num_columns)
        chunks: list = []
        total = 0
        try:
            sink, close_sink = self._open_row_for_append(row_key)
            try:
                buf = head
                while True:
                    while len(buf) >= self.chunk_size:
                        chunk, buf = buf[: self.chunk_size], buf[self.chunk_size :]
                        total += len(chunk)
                        chunks.append(self._append_chunk(sink, chunk))
                    more = stream.read(self.chunk_size)
                    if not more:
                        break
                    buf += more
                if buf:
                    total += len(buf)
                    chunks.append(self._append_chunk(sink, buf))
                sink.flush()
                if close_sink:
                    os.fsync(sink.fileno())
            finally:
                if close_sink:
                    sink.close()
        except OSError as exc:
            raise IoError(f"writing blob {bid}: {exc}") from exc
        self._chunk_index[bid] = chunks
        self._external.add(bid)
        meta = BlobMeta(bid, total, mime)
        self._metas[bid] = meta
        self._append_meta(meta, external=True)
        return bid

    def _open_row_for_append(self, row_key: int):
        if self.directory is None:
            buf = self._memory_rows.setdefault(row_key, io.BytesIO())
            if buf.tell() == 0 and not buf.getvalue():
                buf.write(ROW_MAGIC + struct.pack("<H", FORMAT_VERSION))
            buf.seek(0, io.SEEK_END)
            return buf, False
        path = self._row_path(row_key)
        new_file = not os.path.exists(path)
        f = open(path, "ab")
        if new_file:
            f.write(ROW_MAGIC + struct.pack("<H", FORMAT_VERSION))
        return f, True

    @staticmethod
    def _append_chunk(sink, chunk: bytes) -> tuple:
        sink.flush()
        offset = sink.tell()
        sink.write(struct.pack("<I", len(chunk)) + chunk)
        return (offset + 4, len(chunk))

    # in-memory row buffers for directory-less stores
    @property
    def _memory_rows(self) -> dict:
        if not hasattr(self, "_memory_rows_store"):
            self._memory_rows_store: dict[int, io.BytesIO] = {}
        return self._memory_rows_store

    # -- reading ----------------------------------------------------------------

    def blob_meta(self, bid: BlobId) -> BlobMeta:
        meta = self._metas.get(bid)
        if meta is None:
            raise UnknownBlob(f"blob {bid} does not exist")
        return meta

    def has_blob(self, bid: BlobId) -> bool:
        return bid in self._metas

    def open_blob(self, bid: BlobId) -> BlobHandle:
        return BlobHandle(id=bid, meta=self.blob_meta(bid), _store=self)

    def read_all(self, bid: BlobId) -> bytes:
        return self.open_blob(bid).read_all()

    def is_inline(self, bid: BlobId) -> bool:
        self.blob_meta(bid)
        return bid not in self._external

    def inline_payloads(self) -> dict:
        """Inline payload table, persisted inside the graph snapshot."""
        return dict(self._inline)

    def restore_inline_payloads(self, payloads: dict) -> None:
        self._inline.update(payloads)

    def _fetch_range(self, handle: BlobHandle, offset: int, length: int) -> bytes:
        bid = handle.id
        if bid not in self._external:
            payload = self._inline.get(bid)
            if payload is None:
                raise IoError(f"inline payload of blob {bid} not loaded (missing checkpoint?)")
            return payload[offset : offset + length]

        chunks = self._chunk_index.get(bid)
        if chunks is None:
            raise IoError(f"chunk index for blob {bid} missing")
        first = offset // self.chunk_size
        last = (offset + length - 1) // self.chunk_size
        row_key, _ = locate(bid, self.num_columns)
        parts = []
        fetched = 0
        src = self._open_row_for_read(row_key)
        try:
            for i in range(first, last + 1):
                chunk_off, chunk_len = chunks[i]
                src.seek(chunk_off)
                data = src.read(chunk_len)
                if len(data) != chunk_len:
                    raise IoError(f"short read in row file {row_key}")
                fetched += chunk_len
                parts.append(data)
        finally:
            if self.directory is not None:
                src.close()
        handle.bytes_read_counter += fetched
        self.payload_bytes_fetched += fetched
        start_in_first = offset - first * self.chunk_size
        joined = b"".join(parts)
        return joined[start_in_first : start_in_first + length]

    def _open_row_for_read(self, row_key: int):
        if self.directory is None:
            return self._memory_rows[row_key]
        try:
            return open(self._row_path(row_key), "rb")
        except OSError as exc:
            raise IoError(f"row file {row_key}: {exc}") from exc
