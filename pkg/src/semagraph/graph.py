"""In-memory property graph store with index-free adjacency.

The store realizes the usual formal picture of a property graph: a set of
nodes and relationships, ``src``/``tgt`` endpoint maps, a partial property
map on both entity kinds, a label set per node and a single type per
relationship. Adjacency is kept as per-node outgoing/incoming lists so
expansion cost is proportional to degree.

Identifiers are dense unsigned integers allocated ascending and never
reused, which also makes iteration order reproducible. Persistence is a
single snapshot file written atomically on checkpoint (``PGRF`` format,
see :func:`save_snapshot`).
"""

from __future__ import annotations

import os
import struct
import sys
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

from .errors import DataError, UnknownNode, UnknownRel

NodeId = int
RelId = int
BlobId = int


def intern_name(text: str) -> str:
    """Intern a label / relationship type / property key.

    Equal texts share one object, so identity comparison is valid after
    interning.
    """
    return sys.intern(text)


class ValueKind(Enum):
    INT = 1
    FLOAT = 2
    TEXT = 3
    BOOL = 4
    BLOB = 5


@dataclass(frozen=True, slots=True)
class Value:
    """A typed property value: 64-bit int, float, UTF-8 text, bool or blob ref."""

    kind: ValueKind
    data: object

    @staticmethod
    def integer(v: int) -> "Value":
        return Value(ValueKind.INT, int(v))

    @staticmethod
    def real(v: float) -> "Value":
        return Value(ValueKind.FLOAT, float(v))

    @staticmethod
    def text(v: str) -> "Value":
        return Value(ValueKind.TEXT, str(v))

    @staticmethod
    def boolean(v: bool) -> "Value":
        return Value(ValueKind.BOOL, bool(v))

    @staticmethod
    def blob_ref(blob_id: BlobId) -> "Value":
        return Value(ValueKind.BLOB, int(blob_id))

    @staticmethod
    def from_python(v: object) -> "Value":
        if isinstance(v, Value):
            return v
        if isinstance(v, bool):
            return Value.boolean(v)
        if isinstance(v, int):
            return Value.integer(v)
        if isinstance(v, float):
            return Value.real(v)
        if isinstance(v, str):
            return Value.text(v)
        raise DataError(f"cannot convert {type(v).__name__} to property value")

    def to_python(self) -> object:
        return self.data

    def render(self) -> str:
        """Stable text form used by the TSV result serializer."""
        if self.kind is ValueKind.BOOL:
            return "true" if self.data else "false"
        if self.kind is ValueKind.BLOB:
            return f"blob#{self.data}"
        return str(self.data)


class Direction(Enum):
    OUT = "out"
    IN = "in"
    BOTH = "both"


@dataclass
class Node:
    id: NodeId
    labels: set
    properties: dict

    def has_label(self, label: str) -> bool:
        return intern_name(label) in self.labels


@dataclass
class Relationship:
    id: RelId
    rel_type: str
    src: NodeId
    tgt: NodeId
    properties: dict


@dataclass
class GraphStats:
    """Counts snapshot used by the planner's cardinality model."""

    node_count: int = 0
    rel_count: int = 0
    label_counts: dict = field(default_factory=dict)
    rel_type_counts: dict = field(default_factory=dict)

    @property
    def avg_out_degree(self) -> float:
        if self.node_count == 0:
            return 0.0
        return self.rel_count / self.node_count

    def copy(self) -> "GraphStats":
        return GraphStats(
            self.node_count,
            self.rel_count,
            dict(self.label_counts),
            dict(self.rel_type_counts),
        )


class GraphStore:
    """Single-writer, multi-reader property graph.

    Mutations are serialized through ``_write_lock``; every mutation bumps
    ``version`` (the commit point readers key off). Reads take snapshots of
    the adjacency lists they iterate, so a concurrent writer never corrupts
    an in-flight expansion.
    """

    def __init__(self) -> None:
        self._nodes: dict[NodeId, Node] = {}
        self._rels: dict[RelId, Relationship] = {}
        self._out: dict[NodeId, list] = {}
        self._in: dict[NodeId, list] = {}
        self._next_node_id: NodeId = 1
        self._next_rel_id: RelId = 1
        self._stats = GraphStats()
        self._write_lock = threading.RLock()
        self.version = 0

    # -- mutation -----------------------------------------------------------

    def create_node(self, labels=(), props: Optional[dict] = None) -> NodeId:
        with self._write_lock:
            nid = self._next_node_id
            self._next_node_id += 1
            label_set = {intern_name(l) for l in labels}
            properties = {intern_name(k): Value.from_python(v) for k, v in (props or {}).items()}
            self._nodes[nid] = Node(nid, label_set, properties)
            self._out[nid] = []
            self._in[nid] = []
            self._stats.node_count += 1
            for l in label_set:
                self._stats.label_counts[l] = self._stats.label_counts.get(l, 0) + 1
            self.version += 1
            return nid

    def create_rel(self, src: NodeId, tgt: NodeId, rel_type: str, props: Optional[dict] = None) -> RelId:
        with self._write_lock:
            if src not in self._nodes:
                raise UnknownNode(f"node {src} does not exist")
            if tgt not in self._nodes:
                raise UnknownNode(f"node {tgt} does not exist")
            rid = self._next_rel_id
            self._next_rel_id += 1
            t = intern_name(rel_type)
            properties = {intern_name(k): Value.from_python(v) for k, v in (props or {}).items()}
            self._rels[rid] = Relationship(rid, t, src, tgt, properties)
            self._out[src].append((rid, tgt))
            self._in[tgt].append((rid, src))
            self._stats.rel_count += 1
            self._stats.rel_type_counts[t] = self._stats.rel_type_counts.get(t, 0) + 1
            self.version += 1
            return rid

    def delete_rel(self, rid: RelId) -> None:
        with self._write_lock:
            rel = self._rels.pop(rid, None)
            if rel is None:
                raise UnknownRel(f"relationship {rid} does not exist")
            self._out[rel.src].remove((rid, rel.tgt))
            self._in[rel.tgt].remove((rid, rel.src))
            self._stats.rel_count -= 1
            self._stats.rel_type_counts[rel.rel_type] -= 1
            if self._stats.rel_type_counts[rel.rel_type] == 0:
                del self._stats.rel_type_counts[rel.rel_type]
            self.version += 1

    def delete_node(self, nid: NodeId) -> None:
        """Detach-delete: incident relationships are removed first."""
        with self._write_lock:
            node = self._nodes.get(nid)
            if node is None:
                raise UnknownNode(f"node {nid} does not exist")
            for rid, _ in list(self._out[nid]):
                self.delete_rel(rid)
            for rid, _ in list(self._in[nid]):
                self.delete_rel(rid)
            del self._nodes[nid]
            del self._out[nid]
            del self._in[nid]
            self._stats.node_count -= 1
            for l in node.labels:
                self._stats.label_counts[l] -= 1
                if self._stats.label_counts[l] == 0:
                    del self._stats.label_counts[l]
            self.version += 1

    def set_property(self, entity_id: int, key: str, value, *, rel: bool = False) -> None:
        with self._write_lock:
            props = self._props_of(entity_id, rel)
            props[intern_name(key)] = Value.from_python(value)
            self.version += 1

    # -- lookup -------------------------------------------------------------

    def node(self, nid: NodeId) -> Node:
        n = self._nodes.get(nid)
        if n is None:
            raise UnknownNode(f"node {nid} does not exist")
        return n

    def rel(self, rid: RelId) -> Relationship:
        r = self._rels.get(rid)
        if r is None:
            raise UnknownRel(f"relationship {rid} does not exist")
        return r

    def has_node(self, nid: NodeId) -> bool:
        return nid in self._nodes

    def get_property(self, entity_id: int, key: str, *, rel: bool = False) -> Optional[Value]:
        return self._props_of(entity_id, rel).get(intern_name(key))

    def _props_of(self, entity_id: int, rel: bool) -> dict:
        if rel:
            return self.rel(entity_id).properties
        return self.node(entity_id).properties

    def scan(self, label: Optional[str] = None) -> Iterator[NodeId]:
        """All node ids, ascending; optionally restricted to one label."""
        if label is None:
            yield from list(self._nodes)
            return
        l = intern_name(label)
        for nid, node in list(self._nodes.items()):
            if l in node.labels:
                yield nid

    def expand(
        self,
        nid: NodeId,
        direction: Direction = Direction.OUT,
        rel_type: Optional[str] = None,
    ) -> Iterator[tuple]:
        """Adjacent ``(rel_id, neighbor_id)`` pairs of ``nid``.

        ``BOTH`` yields each incident relationship once (self-loops
        included once); ``OUT``/``IN`` each list a self-loop separately.
        """
        if nid not in self._nodes:
            raise UnknownNode(f"node {nid} does not exist")
        t = intern_name(rel_type) if rel_type is not None else None

        def _matches(rid: RelId) -> bool:
            return t is None or self._rels[rid].rel_type is t

        if direction in (Direction.OUT, Direction.BOTH):
            for rid, other in list(self._out[nid]):
                if _matches(rid):
                    yield (rid, other)
        if direction is Direction.IN:
            for rid, other in list(self._in[nid]):
                if _matches(rid):
                    yield (rid, other)
        elif direction is Direction.BOTH:
            for rid, other in list(self._in[nid]):
                # self-loops were already yielded by the outgoing pass
                if self._rels[rid].src != self._rels[rid].tgt and _matches(rid):
                    yield (rid, other)

    def degree(self, nid: NodeId) -> int:
        return len(self._out[nid]) + len(self._in[nid])

    def node_ids(self) -> list:
        return list(self._nodes)

    def rel_ids(self) -> list:
        return list(self._rels)

    def stats(self) -> GraphStats:
        return self._stats.copy()

    def recount_stats(self) -> GraphStats:
        """Brute recount, used as the oracle for the maintained stats."""
        s = GraphStats(node_count=len(self._nodes), rel_count=len(self._rels))
        for node in self._nodes.values():
            for l in node.labels:
                s.label_counts[l] = s.label_counts.get(l, 0) + 1
        for rel in self._rels.values():
            s.rel_type_counts[rel.rel_type] = s.rel_type_counts.get(rel.rel_type, 0) + 1
        return s


# -- snapshot format ---------------------------------------------------------
#
#   magic "PGRF" | u16 version
#   sections, each: u8 name length | name | u64 payload length | payload
#   NODES: u64 next_node_id | u64 count | per node (u64 id, u16 #labels, labels)
#   RELS:  u64 next_rel_id  | u64 count | per rel (u64 id, str type, u64 src, u64 tgt)
#   PROPS: u64 #entries | per entry (u8 entity kind, u64 id, u16 #props, props)
#          u64 #inline-blobs | per blob (u64 id, u32 len, bytes)
#   All integers little-endian; strings are u16 length + UTF-8.

SNAPSHOT_MAGIC = b"PGRF"
SNAPSHOT_VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        chunk = self.buf[self.pos : self.pos + n]
        if len(chunk) != n:
            raise DataError("truncated snapshot")
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.buf)


def _pack_value(v: Value) -> bytes:
    out = struct.pack("<B", v.kind.value)
    if v.kind is ValueKind.INT:
        out += struct.pack("<q", v.data)
    elif v.kind is ValueKind.FLOAT:
        out += struct.pack("<d", v.data)
    elif v.kind is ValueKind.TEXT:
        out += _pack_str(v.data)
    elif v.kind is ValueKind.BOOL:
        out += struct.pack("<B", 1 if v.data else 0)
    elif v.kind is ValueKind.BLOB:
        out += struct.pack("<Q", v.data)
    return out


def _read_value(r: _Reader) -> Value:
    kind = ValueKind(r.u8())
    if kind is ValueKind.INT:
        return Value.integer(r.i64())
    if kind is ValueKind.FLOAT:
        return Value.real(r.f64())
    if kind is ValueKind.TEXT:
        return Value.text(r.string())
    if kind is ValueKind.BOOL:
        return Value.boolean(r.u8() == 1)
    return Value.blob_ref(r.u64())


def save_snapshot(store: GraphStore, path: str, inline_blobs: Optional[dict] = None) -> None:
    """Write the whole store to ``path`` atomically (tmp file + rename).

    ``inline_blobs`` maps blob id to payload bytes for blobs small enough
    to live inside the snapshot's PROPS section.
    """
    nodes = bytearray()
    nodes += struct.pack("<QQ", store._next_node_id, len(store._nodes))
    for nid, node in sorted(store._nodes.items()):
        nodes += struct.pack("<QH", nid, len(node.labels))
        for l in sorted(node.labels):
            nodes += _pack_str(l)

    rels = bytearray()
    rels += struct.pack("<QQ", store._next_rel_id, len(store._rels))
    for rid, rel in sorted(store._rels.items()):
        rels += struct.pack("<Q", rid) + _pack_str(rel.rel_type)
        rels += struct.pack("<QQ", rel.src, rel.tgt)

    props = bytearray()
    entries = [(0, nid, n.properties) for nid, n in sorted(store._nodes.items()) if n.properties]
    entries += [(1, rid, r.properties) for rid, r in sorted(store._rels.items()) if r.properties]
    props += struct.pack("<Q", len(entries))
    for kind, eid, mapping in entries:
        props += struct.pack("<BQH", kind, eid, len(mapping))
        for k in sorted(mapping):
            props += _pack_str(k) + _pack_value(mapping[k])
    inline = inline_blobs or {}
    props += struct.pack("<Q", len(inline))
    for bid in sorted(inline):
        payload = inline[bid]
        props += struct.pack("<QI", bid, len(payload)) + payload

    out = bytearray()
    out += SNAPSHOT_MAGIC + struct.pack("<H", SNAPSHOT_VERSION)
    for name, payload in ((b"NODES", nodes), (b"RELS", rels), (b"PROPS", props)):
        out += struct.pack("<B", len(name)) + name + struct.pack("<Q", len(payload)) + bytes(payload)

    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(out)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def load_snapshot(path: str) -> tuple:
    """Read a snapshot; returns ``(store, inline_blobs)``."""
    with open(path, "rb") as f:
        buf = f.read()
    r = _Reader(buf)
    if r.take(4) != SNAPSHOT_MAGIC:
        raise DataError(f"{path}: not a graph snapshot")
    version = r.u16()
    if version != SNAPSHOT_VERSION:
        raise DataError(f"{path}: unsupported snapshot version {version}")

    sections = {}
    while not r.exhausted:
        name = r.take(r.u8()).decode("ascii")
        sections[name] = _Reader(r.take(r.u64()))

    store = GraphStore()
    inline_blobs: dict[BlobId, bytes] = {}

    nr = sections["NODES"]
    store._next_node_id = nr.u64()
    for _ in range(nr.u64()):
        nid = nr.u64()
        labels = {intern_name(nr.string()) for _ in range(nr.u16())}
        store._nodes[nid] = Node(nid, labels, {})
        store._out[nid] = []
        store._in[nid] = []
        store._stats.node_count += 1
        for l in labels:
            store._stats.label_counts[l] = store._stats.label_counts.get(l, 0) + 1

    rr = sections["RELS"]
    store._next_rel_id = rr.u64()
    for _ in range(rr.u64()):
        rid = rr.u64()
        rel_type = intern_name(rr.string())
        src, tgt = rr.u64(), rr.u64()
        store._rels[rid] = Relationship(rid, rel_type, src, tgt, {})
        store._out[src].append((rid, tgt))
        store._in[tgt].append((rid, src))
        store._stats.rel_count += 1
        store._stats.rel_type_counts[rel_type] = store._stats.rel_type_counts.get(rel_type, 0) + 1

    pr = sections["PROPS"]
    for _ in range(pr.u64()):
        kind, eid, n_props = pr.u8(), pr.u64(), pr.u16()
        props = {intern_name(pr.string()): _read_value(pr) for _ in range(n_props)}
        if kind == 0:
            store._nodes[eid].properties = props
        else:
            store._rels[eid].properties = props
    for _ in range(pr.u64()):
        bid = pr.u64()
        inline_blobs[bid] = pr.take(pr.u32())

    store.version = 1
    return store, inline_blobs
