"""Semantic sub-property extraction with serial-validated caching.

An unstructured payload (photo, audio, ...) carries semantic information
beyond its raw bytes. Pluggable extractors turn payload bytes into typed
semantic values (vectors, numbers, text, categories), one extractor per
sub-property key. Each extractor carries a serial number; cache entries
are keyed by ``(blob id, sub-property key, serial)`` and are valid only
while their serial equals the latest registered serial for that key, so
bumping a model lazily invalidates everything it produced.

The extractor call itself travels over a small request/response protocol
so models can run out of process: requests carry a model id plus the
payload bytes, responses echo the request id with a status and the
serialized semantic value. An in-process transport serves the common
case; a TCP transport with the same framing exists for isolation.

Comparison between semantic values is routed through a per-space
comparator registry covering five symbols: similarity score ``::``,
similar ``~:``, not-similar ``!:`` and the two containment directions
``<:`` / ``>:``.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import math
import socket
import socketserver
import struct
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

from .errors import (
    AipmTimeout,
    DataError,
    DuplicateSerial,
    EmptySet,
    ExtractorFailed,
    KindMismatch,
    NoExtractor,
    TransportClosed,
    UnsupportedSymbol,
)

SIM_SYMBOLS = ("::", "~:", "!:", "<:", ">:")
DEFAULT_SIMILARITY_THRESHOLD = 0.8
DEFAULT_AIPM_TIMEOUT = 30.0


class SemanticKind(Enum):
    VECTOR = "vector"
    NUMBER = "number"
    TEXT = "text"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class SemanticValue:
    """Extracted sub-property value. Vectors are fixed-dim float tuples."""

    kind: SemanticKind
    data: object

    def __post_init__(self):
        if self.kind is SemanticKind.VECTOR:
            raw = tuple(float(x) for x in self.data)
            if any(math.isnan(x) for x in raw):
                raise DataError("NaN is not a valid vector component")
            # components are f32 by contract; quantize once so values
            # survive the wire encoding bit-identically
            vec = struct.unpack(f"<{len(raw)}f", struct.pack(f"<{len(raw)}f", *raw))
            object.__setattr__(self, "data", vec)
        elif self.kind is SemanticKind.NUMBER:
            if math.isnan(float(self.data)):
                raise DataError("NaN is not a valid semantic number")
            object.__setattr__(self, "data", float(self.data))

    @staticmethod
    def vector(xs: Iterable[float]) -> "SemanticValue":
        return SemanticValue(SemanticKind.VECTOR, tuple(xs))

    @staticmethod
    def number(x: float) -> "SemanticValue":
        return SemanticValue(SemanticKind.NUMBER, float(x))

    @staticmethod
    def text(s: str) -> "SemanticValue":
        return SemanticValue(SemanticKind.TEXT, str(s))

    @staticmethod
    def categorical(s: str) -> "SemanticValue":
        return SemanticValue(SemanticKind.CATEGORICAL, str(s))

    @property
    def dim(self) -> Optional[int]:
        return len(self.data) if self.kind is SemanticKind.VECTOR else None

    def render(self) -> str:
        if self.kind is SemanticKind.VECTOR:
            return "[" + ",".join(f"{x:.6g}" for x in self.data) + "]"
        return str(self.data)

    # wire encoding: u8 kind | payload (vector: u32 dim + f32s; number: f64;
    # text/categorical: u32 len + utf8); little-endian
    _KIND_CODES = {SemanticKind.VECTOR: 1, SemanticKind.NUMBER: 2, SemanticKind.TEXT: 3, SemanticKind.CATEGORICAL: 4}

    def pack(self) -> bytes:
        code = self._KIND_CODES[self.kind]
        if self.kind is SemanticKind.VECTOR:
            return struct.pack("<BI", code, len(self.data)) + struct.pack(f"<{len(self.data)}f", *self.data)
        if self.kind is SemanticKind.NUMBER:
            return struct.pack("<Bd", code, self.data)
        raw = self.data.encode("utf-8")
        return struct.pack("<BI", code, len(raw)) + raw

    @staticmethod
    def unpack(buf: bytes) -> "SemanticValue":
        code = buf[0]
        if code == 1:
            (dim,) = struct.unpack_from("<I", buf, 1)
            return SemanticValue.vector(struct.unpack_from(f"<{dim}f", buf, 5))
        if code == 2:
            return SemanticValue.number(struct.unpack_from("<d", buf, 1)[0])
        (n,) = struct.unpack_from("<I", buf, 1)
        text = buf[5 : 5 + n].decode("utf-8")
        return SemanticValue.text(text) if code == 3 else SemanticValue.categorical(text)


@dataclass(frozen=True)
class Extractor:
    """Bytes-to-semantic-value function plus its registration identity.

    ``fn`` must be deterministic for a fixed serial; the cache depends on
    that to be interchangeable with direct application.
    """

    sub_key: str
    serial: int
    kind: SemanticKind
    fn: Callable[[bytes], SemanticValue]
    dim: Optional[int] = None

    @property
    def model_id(self) -> str:
        return f"{self.sub_key}@{self.serial}"


# -- stock extractor stubs ----------------------------------------------------


def byte_vector_extractor(sub_key: str, serial: int, dim: int = 4, latency: float = 0.0) -> Extractor:
    """Deterministic stub: first ``dim`` payload bytes scaled by 1/255."""

    def fn(payload: bytes) -> SemanticValue:
        if latency:
            time.sleep(latency)
        head = payload[:dim].ljust(dim, b"\0")
        return SemanticValue.vector(b / 255.0 for b in head)

    return Extractor(sub_key, serial, SemanticKind.VECTOR, fn, dim=dim)


def hash_vector_extractor(sub_key: str, serial: int, dim: int = 16, latency: float = 0.0) -> Extractor:
    """Stub spreading payload bytes over ``dim`` components via a rolling hash."""

    def fn(payload: bytes) -> SemanticValue:
        if latency:
            time.sleep(latency)
        acc = [0] * dim
        h = 2166136261 ^ (serial * 16777619)
        for i, b in enumerate(payload):
            h = ((h ^ b) * 16777619) & 0xFFFFFFFF
            acc[i % dim] = (acc[i % dim] + h) & 0xFFFFFFFF
        return SemanticValue.vector((a % 1000) / 1000.0 for a in acc)

    return Extractor(sub_key, serial, SemanticKind.VECTOR, fn, dim=dim)


def text_label_extractor(sub_key: str, serial: int, latency: float = 0.0) -> Extractor:
    """Stub reading the payload as UTF-8 and returning it as a category."""

    def fn(payload: bytes) -> SemanticValue:
        if latency:
            time.sleep(latency)
        return SemanticValue.categorical(payload.decode("utf-8", errors="replace").strip())

    return Extractor(sub_key, serial, SemanticKind.CATEGORICAL, fn)


def byte_number_extractor(sub_key: str, serial: int, latency: float = 0.0) -> Extractor:
    """Stub returning the first payload byte as a number."""

    def fn(payload: bytes) -> SemanticValue:
        if latency:
            time.sleep(latency)
        return SemanticValue.number(payload[0] if payload else 0)

    return Extractor(sub_key, serial, SemanticKind.NUMBER, fn)


STUB_FACTORIES = {
    "byte_vector": byte_vector_extractor,
    "hash_vector": hash_vector_extractor,
    "text_label": text_label_extractor,
    "byte_number": byte_number_extractor,
}


# -- AIPM protocol ------------------------------------------------------------


class AipmStatus(Enum):
    OK = "ok"
    MODEL_ERROR = "model_error"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class AipmRequest:
    request_id: int
    model_id: str
    payload: bytes


@dataclass(frozen=True)
class AipmResponse:
    request_id: int
    status: AipmStatus
    payload: bytes


# frame: u32 length | u8 kind (0=req, 1=resp) | u64 request_id |
#        u16 text_len | text | payload. For responses the text field
#        carries the status code instead of a model id.
def _pack_frame(kind: int, request_id: int, text: str, payload: bytes) -> bytes:
    raw = text.encode("utf-8")
    body = struct.pack("<BQH", kind, request_id, len(raw)) + raw + payload
    return struct.pack("<I", len(body)) + body


def pack_request(req: AipmRequest) -> bytes:
    return _pack_frame(0, req.request_id, req.model_id, req.payload)


def pack_response(resp: AipmResponse) -> bytes:
    return _pack_frame(1, resp.request_id, resp.status.value, resp.payload)


def unpack_frame(body: bytes):
    kind, request_id, text_len = struct.unpack_from("<BQH", body, 0)
    text = body[11 : 11 + text_len].decode("utf-8")
    payload = body[11 + text_len :]
    if kind == 0:
        return AipmRequest(request_id, text, payload)
    return AipmResponse(request_id, AipmStatus(text), payload)


class AipmServer:
    """Model host: executes extractors keyed by model id."""

    def __init__(self, max_workers: int = 8) -> None:
        self._models: dict[str, Extractor] = {}
        self._pool = concurrent.futures.ThreadPoolExecutor(max_workers=max_workers)

    def host(self, extractor: Extractor) -> None:
        self._models[extractor.model_id] = extractor

    def handle(self, req: AipmRequest) -> AipmResponse:
        extractor = self._models.get(req.model_id)
        if extractor is None:
            return AipmResponse(req.request_id, AipmStatus.MODEL_ERROR, b"unknown model")
        try:
            value = extractor.fn(req.payload)
        except Exception as exc:  # noqa: BLE001 - model faults become protocol errors
            return AipmResponse(req.request_id, AipmStatus.MODEL_ERROR, repr(exc).encode())
        return AipmResponse(req.request_id, AipmStatus.OK, value.pack())

    def submit(self, req: AipmRequest) -> concurrent.futures.Future:
        return self._pool.submit(self.handle, req)

    def close(self) -> None:
        self._pool.shutdown(wait=False)


class InProcessTransport:
    """Default transport: requests run on the server's worker pool."""

    def __init__(self, server: AipmServer) -> None:
        self._server = server
        self._closed = False

    def roundtrip(self, req: AipmRequest, timeout: float = DEFAULT_AIPM_TIMEOUT) -> AipmResponse:
        if self._closed:
            raise TransportClosed("transport is closed")
        future = self._server.submit(req)
        try:
            return future.result(timeout=timeout)
        except concurrent.futures.TimeoutError as exc:
            raise AipmTimeout(f"request {req.request_id} timed out after {timeout}s") from exc

    def close(self) -> None:
        self._closed = True


def aipm_roundtrip(req: AipmRequest, transport, timeout: float = DEFAULT_AIPM_TIMEOUT) -> AipmResponse:
    """Send one request and wait for its matching response."""
    return transport.roundtrip(req, timeout=timeout)


class _TcpHandler(socketserver.BaseRequestHandler):
    def handle(self):
        sock = self.request
        try:
            while True:
                header = _recv_exact(sock, 4)
                if header is None:
                    return
                (length,) = struct.unpack("<I", header)
                body = _recv_exact(sock, length)
                if body is None:
                    return
                req = unpack_frame(body)
                resp = self.server.aipm.handle(req)
                sock.sendall(pack_response(resp))
        except OSError:
            return


def _recv_exact(sock, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        piece = sock.recv(n - len(buf))
        if not piece:
            return None
        buf += piece
    return buf


class TcpAipmServer(socketserver.ThreadingTCPServer):
    """TCP front for an :class:`AipmServer`; one frame stream per client."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, aipm: AipmServer, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _TcpHandler)
        self.aipm = aipm

    @property
    def address(self) -> tuple:
        return self.server_address

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


class TcpTransport:
    """Client side of the TCP framing; matches responses by request id."""

    def __init__(self, host: str, port: int) -> None:
        self._sock = socket.create_connection((host, port))
        self._pending: dict[int, object] = {}
        self._lock = threading.Lock()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            while True:
                header = _recv_exact(self._sock, 4)
                if header is None:
                    break
                (length,) = struct.unpack("<I", header)
                body = _recv_exact(self._sock, length)
                if body is None:
                    break
                resp = unpack_frame(body)
                with self._lock:
                    waiter = self._pending.pop(resp.request_id, None)
                if waiter is not None:
                    waiter.response = resp
                    waiter.event.set()
        finally:
            self._closed = True
            with self._lock:
                for waiter in self._pending.values():
                    waiter.event.set()
                self._pending.clear()

    def roundtrip(self, req: AipmRequest, timeout: float = DEFAULT_AIPM_TIMEOUT) -> AipmResponse:
        if self._closed:
            raise TransportClosed("transport is closed")
        waiter = _Waiter()
        with self._lock:
            self._pending[req.request_id] = waiter
        try:
            self._sock.sendall(pack_request(req))
        except OSError as exc:
            raise TransportClosed(str(exc)) from exc
        if not waiter.event.wait(timeout):
            with self._lock:
                self._pending.pop(req.request_id, None)
            raise AipmTimeout(f"request {req.request_id} timed out after {timeout}s")
        if waiter.response is None:
            raise TransportClosed("connection closed while waiting for response")
        return waiter.response

    def close(self) -> None:
        self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass


class _Waiter:
    __slots__ = ("event", "response")

    def __init__(self):
        self.event = threading.Event()
        self.response: Optional[AipmResponse] = None


# -- comparator registry --------------------------------------------------------


def cosine_similarity(a: SemanticValue, b: SemanticValue) -> float:
    """Clamped cosine: identical directions give 1.0, opposite clamp to 0."""
    va, vb = a.data, b.data
    if len(va) != len(vb):
        raise KindMismatch(f"vector dims differ: {len(va)} vs {len(vb)}")
    dot = sum(x * y for x, y in zip(va, vb))
    na = math.sqrt(sum(x * x for x in va))
    nb = math.sqrt(sum(y * y for y in vb))
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(0.0, min(1.0, dot / (na * nb)))


def _token_set(text: str) -> frozenset:
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
    return frozenset(tokens)


def text_similarity(a: SemanticValue, b: SemanticValue) -> float:
    """Jaccard overlap of lowercase tokens; symmetric, 1.0 on equal inputs."""
    ta, tb = _token_set(a.data), _token_set(b.data)
    if not ta and not tb:
        return 1.0
    union = ta | tb
    return len(ta & tb) / len(union)


def number_similarity(a: SemanticValue, b: SemanticValue) -> float:
    return 1.0 / (1.0 + abs(a.data - b.data))


def categorical_similarity(a: SemanticValue, b: SemanticValue) -> float:
    return 1.0 if a.data == b.data else 0.0


@dataclass
class Comparator:
    """Similarity and containment semantics for one value kind."""

    similarity: Callable[[SemanticValue, SemanticValue], float]
    contains: Optional[Callable[[SemanticValue, SemanticValue], bool]] = None
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD


_DEFAULT_COMPARATORS = {
    SemanticKind.VECTOR: Comparator(cosine_similarity, contains=None),
    SemanticKind.TEXT: Comparator(text_similarity, contains=lambda a, b: a.data in b.data),
    SemanticKind.NUMBER: Comparator(number_similarity, contains=None),
    SemanticKind.CATEGORICAL: Comparator(categorical_similarity, contains=lambda a, b: a.data == b.data),
}


class ComparatorRegistry:
    """Dispatch table for the five comparison symbols, per kind or per space."""

    def __init__(self) -> None:
        self._by_kind = dict(_DEFAULT_COMPARATORS)
        self._by_space: dict[str, Comparator] = {}

    def register(self, comparator: Comparator, *, kind: Optional[SemanticKind] = None, sub_key: Optional[str] = None):
        if sub_key is not None:
            self._by_space[sub_key] = comparator
        elif kind is not None:
            self._by_kind[kind] = comparator
        else:
            raise DataError("register needs a kind or a sub_key")

    def set_threshold(self, sub_key: str, threshold: float) -> None:
        base = self._by_space.get(sub_key)
        if base is None:
            # per-space copy of the kind default, resolved lazily at compare time
            self._by_space[sub_key] = Comparator(None, None, threshold)
        else:
            base.threshold = threshold

    def _lookup(self, kind: SemanticKind, sub_key: Optional[str]) -> Comparator:
        default = self._by_kind[kind]
        if sub_key is not None and sub_key in self._by_space:
            override = self._by_space[sub_key]
            return Comparator(
                override.similarity or default.similarity,
                override.contains or default.contains,
                override.threshold,
            )
        return default

    def compare(self, symbol: str, a: SemanticValue, b: SemanticValue, sub_key: Optional[str] = None):
        """Apply one comparison symbol; returns a float for ``::``, else bool."""
        if a.kind is not b.kind:
            raise KindMismatch(f"cannot compare {a.kind.value} with {b.kind.value}")
        if a.kind is SemanticKind.VECTOR and a.dim != b.dim:
            raise KindMismatch(f"vector dims differ: {a.dim} vs {b.dim}")
        comp = self._lookup(a.kind, sub_key)
        if symbol == "::":
            return comp.similarity(a, b)
        if symbol == "~:":
            return comp.similarity(a, b) >= comp.threshold
        if symbol == "!:":
            return not (comp.similarity(a, b) >= comp.threshold)
        if symbol == "<:":
            if comp.contains is None:
                raise UnsupportedSymbol(f"'<:' is not defined for {a.kind.value} values")
            return comp.contains(a, b)
        if symbol == ">:":
            if comp.contains is None:
                raise UnsupportedSymbol(f"'>:' is not defined for {a.kind.value} values")
            return comp.contains(b, a)
        raise UnsupportedSymbol(f"unknown comparison symbol {symbol!r}")

    def compare_as_set(self, symbol: str, group_a, group_b, sub_key: Optional[str] = None):
        """Set form: best pairwise similarity decides the outcome."""
        a_list, b_list = list(group_a), list(group_b)
        if not a_list or not b_list:
            raise EmptySet("compare_as_set needs non-empty sets")
        if symbol not in ("::", "~:", "!:"):
            raise UnsupportedSymbol(f"{symbol!r} is not defined for sets")
        best = max(self.compare("::", a, b, sub_key) for a, b in itertools.product(a_list, b_list))
        if symbol == "::":
            return best
        comp = self._lookup(a_list[0].kind, sub_key)
        similar = best >= comp.threshold
        return similar if symbol == "~:" else not similar


# -- extraction service -----------------------------------------------------------


@dataclass(frozen=True)
class CacheKey:
    blob_id: int
    sub_key: str
    serial: int


class ExtractionService:
    """Extractor registry + serial-validated cache + protocol client.

    ``extract`` is cache-first: a hit under the latest serial never calls
    the extractor. Misses are single-flight per key, so concurrent misses
    on one key run the model once.
    """

    def __init__(
        self,
        blob_reader: Callable[[int], bytes],
        *,
        transport_factory=None,
        timeout: float = DEFAULT_AIPM_TIMEOUT,
    ) -> None:
        self._blob_reader = blob_reader
        self._server = AipmServer()
        self._transport = transport_factory(self._server) if transport_factory else InProcessTransport(self._server)
        self._timeout = timeout
        self._latest: dict[str, int] = {}
        self._registered: set = set()
        self._extractors: dict[tuple, Extractor] = {}
        self._cache: dict[CacheKey, SemanticValue] = {}
        self._inflight: dict[CacheKey, concurrent.futures.Future] = {}
        self._lock = threading.Lock()
        self._req_counter = itertools.count(1)
        self.comparators = ComparatorRegistry()
        # instrumentation
        self.extract_requests = 0
        self.extractor_calls = 0
        self.cache_hits = 0

    # -- registry ----------------------------------------------------------

    def register_extractor(self, extractor: Extractor) -> None:
        with self._lock:
            key = (extractor.sub_key, extractor.serial)
            if key in self._registered:
                raise DuplicateSerial(f"extractor {extractor.model_id} already registered")
            self._registered.add(key)
            self._extractors[key] = extractor
            current = self._latest.get(extractor.sub_key, 0)
            self._latest[extractor.sub_key] = max(current, extractor.serial)
        self._server.host(extractor)

    def latest_serial(self, sub_key: str) -> int:
        serial = self._latest.get(sub_key)
        if serial is None:
            raise NoExtractor(f"no extractor registered for sub-property {sub_key!r}")
        return serial

    def has_extractor(self, sub_key: str) -> bool:
        return sub_key in self._latest

    def extractor_for(self, sub_key: str, serial: Optional[int] = None) -> Extractor:
        serial = serial if serial is not None else self.latest_serial(sub_key)
        e = self._extractors.get((sub_key, serial))
        if e is None:
            raise NoExtractor(f"no extractor registered for {sub_key!r} serial {serial}")
        return e

    def sub_keys(self) -> list:
        return sorted(self._latest)

    # -- extraction ---------------------------------------------------------

    def extract(self, blob_id: int, sub_key: str) -> SemanticValue:
        self.extract_requests += 1
        serial = self.latest_serial(sub_key)
        key = CacheKey(blob_id, sub_key, serial)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self.cache_hits += 1
                return hit
            flight = self._inflight.get(key)
            if flight is None:
                flight = concurrent.futures.Future()
                self._inflight[key] = flight
                owner = True
            else:
                owner = False
        if not owner:
            return flight.result(timeout=self._timeout)
        try:
            value = self._extract_via_protocol(blob_id, sub_key, serial)
            with self._lock:
                # a bump may have landed mid-flight; only the then-latest
                # serial may populate the cache again
                if self._latest.get(sub_key) == serial:
                    self._cache[key] = value
                self._inflight.pop(key, None)
            flight.set_result(value)
            return value
        except BaseException as exc:
            with self._lock:
                self._inflight.pop(key, None)
            flight.set_exception(exc)
            raise

    def _extract_via_protocol(self, blob_id: int, sub_key: str, serial: int) -> SemanticValue:
        extractor = self.extractor_for(sub_key, serial)
        payload = self._blob_reader(blob_id)
        req = AipmRequest(next(self._req_counter), extractor.model_id, payload)
        resp = aipm_roundtrip(req, self._transport, timeout=self._timeout)
        if resp.status is not AipmStatus.OK:
            raise ExtractorFailed(resp.status.value, resp.payload.decode("utf-8", "replace"))
        self.extractor_calls += 1
        value = SemanticValue.unpack(resp.payload)
        if extractor.dim is not None and value.dim != extractor.dim:
            raise DataError(f"extractor {extractor.model_id} returned dim {value.dim}, declared {extractor.dim}")
        return value

    def extract_direct(self, blob_id: int, sub_key: str) -> SemanticValue:
        """Bypass the cache and protocol; the oracle the cache must agree with."""
        extractor = self.extractor_for(sub_key)
        return extractor.fn(self._blob_reader(blob_id))

    # -- comparison facade ----------------------------------------------------

    def compare(self, symbol: str, a: SemanticValue, b: SemanticValue, sub_key: Optional[str] = None):
        return self.comparators.compare(symbol, a, b, sub_key)

    def compare_as_set(self, symbol: str, group_a, group_b, sub_key: Optional[str] = None):
        return self.comparators.compare_as_set(symbol, group_a, group_b, sub_key)

    # -- cache persistence ------------------------------------------------------
    # record: u64 blob_id | u16 key_len | key | u32 serial | u32 value_len | value

    def dump_cache(self, path: str) -> None:
        with self._lock:
            entries = [
                (k, v) for k, v in self._cache.items() if self._latest.get(k.sub_key) == k.serial
            ]
        with open(path, "wb") as f:
            for key, value in entries:
                raw_key = key.sub_key.encode("utf-8")
                packed = value.pack()
                f.write(struct.pack("<QH", key.blob_id, len(raw_key)) + raw_key)
                f.write(struct.pack("<II", key.serial, len(packed)) + packed)

    def load_cache(self, path: str) -> int:
        import os

        if not os.path.exists(path):
            return 0
        with open(path, "rb") as f:
            buf = f.read()
        pos = 0
        loaded = 0
        while pos < len(buf):
            blob_id, key_len = struct.unpack_from("<QH", buf, pos)
            pos += 10
            sub_key = buf[pos : pos + key_len].decode("utf-8")
            pos += key_len
            serial, value_len = struct.unpack_from("<II", buf, pos)
            pos += 8
            value = SemanticValue.unpack(buf[pos : pos + value_len])
            pos += value_len
            with self._lock:
                self._cache[CacheKey(blob_id, sub_key, serial)] = value
            loaded += 1
        return loaded

    def close(self) -> None:
        self._transport.close()
        self._server.close()
