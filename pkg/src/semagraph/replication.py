"""Simulated leader/follower replication over a version-numbered write log.

Every replica holds a full database instance. Write statements execute
on the leader, which assigns gapless ascending version numbers, appends
``(version, statement, checksum)`` records to its log and streams them
to followers. Followers apply entries strictly in version order through
their own engine, so equal logs imply equal state. Reads are routed to a
uniformly random available replica; a node joining with a stale log
prefix first verifies it against the leader's history, replays what it
has, fetches the missing suffix and only then serves reads.

The cluster is driven by a deterministic discrete-event bus: integer
ticks, per-link FIFO delivery with seeded random delays and drops, and
periodic retransmission. Identical seeds reproduce identical event
traces byte for byte. A threaded TCP variant of the same messages exists
for smoke testing real transports.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import os
import random
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from typing import Optional

from .config import Config
from .database import Database
from .errors import (
    ChecksumMismatch,
    DataError,
    DivergentLog,
    NoLeader,
    ReplicaUnavailable,
    SemagraphError,
)

RETRANSMIT_EVERY = 10  # ticks
DEFAULT_MAX_DELAY = 50


def entry_checksum(version: int, statement: str) -> int:
    m = hashlib.blake2b(digest_size=8)
    m.update(struct.pack("<Q", version))
    m.update(statement.encode("utf-8"))
    return int.from_bytes(m.digest(), "little")


@dataclass(frozen=True)
class WriteLogEntry:
    version: int
    statement: str
    checksum: int

    @staticmethod
    def make(version: int, statement: str) -> "WriteLogEntry":
        return WriteLogEntry(version, statement, entry_checksum(version, statement))

    def verify(self) -> bool:
        return self.checksum == entry_checksum(self.version, self.statement)


class WriteLog:
    """Append-only entry list, optionally file-backed.

    Record layout: ``u64 version | u32 stmt_len | stmt | u64 checksum``,
    little-endian, fsync'd per append.
    """

    def __init__(self, path: Optional[str] = None):
        self.entries: list[WriteLogEntry] = []
        self._path = path
        self._file = None
        if path is not None and os.path.exists(path):
            self._read_existing(path)
        if path is not None:
            self._file = open(path, "ab")

    def _read_existing(self, path: str) -> None:
        with open(path, "rb") as f:
            buf = f.read()
        pos = 0
        while pos + 12 <= len(buf):
            version, stmt_len = struct.unpack_from("<QI", buf, pos)
            pos += 12
            stmt = buf[pos : pos + stmt_len].decode("utf-8")
            pos += stmt_len
            (checksum,) = struct.unpack_from("<Q", buf, pos)
            pos += 8
            entry = WriteLogEntry(version, stmt, checksum)
            if not entry.verify():
                raise ChecksumMismatch(f"log entry {version} fails checksum")
            self.entries.append(entry)

    def append(self, entry: WriteLogEntry) -> None:
        if self.entries and entry.version != self.entries[-1].version + 1:
            raise DataError(f"log version gap: {self.entries[-1].version} -> {entry.version}")
        if not self.entries and entry.version != 1:
            raise DataError(f"log must start at version 1, got {entry.version}")
        self.entries.append(entry)
        if self._file is not None:
            raw = entry.statement.encode("utf-8")
            self._file.write(struct.pack("<QI", entry.version, len(raw)) + raw + struct.pack("<Q", entry.checksum))
            self._file.flush()
            os.fsync(self._file.fileno())

    @property
    def version(self) -> int:
        return self.entries[-1].version if self.entries else 0

    def since(self, version: int) -> list:
        return [e for e in self.entries if e.version > version]

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None


# -- messages ----------------------------------------------------------------------


@dataclass(frozen=True)
class AppendEntries:
    entries: tuple  # consecutive WriteLogEntry


@dataclass(frozen=True)
class Ack:
    applied_version: int


class ReplicaNode:
    """One cluster member: an engine plus its replication state."""

    def __init__(self, node_id: int, role: str = "follower", config: Optional[Config] = None):
        self.node_id = node_id
        self.role = role
        self.engine = Database(config, in_memory=True)
        self.log = WriteLog()
        self.applied_version = 0
        self.available = True
        self.flagged = False  # checksum/divergence problems exclude the node

    def apply_entry(self, entry: WriteLogEntry) -> None:
        if not entry.verify():
            self.flagged = True
            self.available = False
            raise ChecksumMismatch(f"entry {entry.version} fails checksum on node {self.node_id}")
        if entry.version != self.applied_version + 1:
            return  # gap: wait for retransmission, never apply out of order
        self.engine.execute(entry.statement)
        self.log.append(entry)
        self.applied_version = entry.version

    def receive(self, msg: AppendEntries) -> Ack:
        for entry in msg.entries:
            if entry.version <= self.applied_version:
                continue
            self.apply_entry(entry)
        return Ack(self.applied_version)

    def state_digest(self) -> int:
        return self.engine.state_digest()


def replicate(leader: ReplicaNode, follower: ReplicaNode) -> int:
    """Ship every entry past the follower's applied version, in order.

    Returns the number of entries applied; checksum failures flag the
    follower and halt the transfer.
    """
    entries = leader.log.since(follower.applied_version)
    applied = 0
    for entry in entries:
        follower.apply_entry(entry)
        applied += 1
    return applied


class ClusterSim:
    """Deterministic event-driven cluster: one leader, N-1 followers."""

    def __init__(
        self,
        replicas: int = 3,
        *,
        seed: int = 0,
        drop_rate: float = 0.0,
        min_delay: int = 0,
        max_delay: int = DEFAULT_MAX_DELAY,
        config: Optional[Config] = None,
    ):
        if replicas < 1:
            raise DataError("cluster needs at least one replica")
        self.config = config
        self.nodes = [ReplicaNode(i, "leader" if i == 0 else "follower", config) for i in range(replicas)]
        self._by_id = {n.node_id: n for n in self.nodes}
        self.leader = self.nodes[0]
        self.rng = random.Random(seed)
        self.drop_rate = drop_rate
        self.min_delay = min_delay
        self.max_delay = max_delay
        self.tick = 0
        self.acked: dict[int, int] = {n.node_id: 0 for n in self.nodes}
        # (deliver_tick, seq, src, dst, message)
        self._bus: list = []
        self._seq = itertools.count()
        self._last_delivery: dict[tuple, int] = {}
        self.trace: list[str] = []

    # -- bus ------------------------------------------------------------------------

    def _send(self, src: int, dst: int, msg) -> None:
        if self.rng.random() < self.drop_rate:
            self.trace.append(f"t={self.tick} drop {src}->{dst} {type(msg).__name__}")
            return
        delay = self.rng.randint(self.min_delay, self.max_delay)
        deliver = self.tick + delay
        # FIFO per link: never deliver before an earlier message on the same link
        key = (src, dst)
        deliver = max(deliver, self._last_delivery.get(key, 0))
        self._last_delivery[key] = deliver
        heapq.heappush(self._bus, (deliver, next(self._seq), src, dst, msg))
        self.trace.append(f"t={self.tick} send {src}->{dst} {describe_message(msg)} deliver@{deliver}")

    def _deliver_due(self) -> None:
        while self._bus and self._bus[0][0] <= self.tick:
            _, _, src, dst, msg = heapq.heappop(self._bus)
            node = self._by_id[dst]
            if isinstance(msg, AppendEntries):
                if not node.available or node.flagged:
                    continue
                before = node.applied_version
                try:
                    ack = node.receive(msg)
                except ChecksumMismatch:
                    self.trace.append(f"t={self.tick} node {dst} flagged: checksum mismatch")
                    continue
                if ack.applied_version != before:
                    self.trace.append(f"t={self.tick} node {dst} applied to v{ack.applied_version}")
                self._send(dst, src, ack)
            elif isinstance(msg, Ack):
                if msg.applied_version > self.acked[src]:
                    self.acked[src] = msg.applied_version

    def step(self, ticks: int = 1) -> None:
        for _ in range(ticks):
            self.tick += 1
            if self.tick % RETRANSMIT_EVERY == 0:
                self._retransmit()
            self._deliver_due()

    def _retransmit(self) -> None:
        for node in self.nodes[1:]:
            if not node.available or node.flagged:
                continue
            behind = self.acked[node.node_id]
            if behind < self.leader.log.version:
                entries = tuple(self.leader.log.since(behind))
                if entries:
                    self._send(self.leader.node_id, node.node_id, AppendEntries(entries))

    # -- client API -------------------------------------------------------------------

    def submit(self, query: str, params: Optional[dict] = None):
        """Route one statement: writes to the leader, reads anywhere."""
        if self.leader is None or not self.leader.available:
            raise NoLeader("cluster has no leader")
        kind = Database.classify(query)
        if kind == "write":
            version = self.leader.log.version + 1
            entry = WriteLogEntry.make(version, query)
            self.leader.engine.execute(query, params)
            self.leader.log.append(entry)
            self.leader.applied_version = version
            self.trace.append(f"t={self.tick} write v{version}")
            for node in self.nodes[1:]:
                if node.available and not node.flagged:
                    self._send(self.leader.node_id, node.node_id, AppendEntries((entry,)))
            return version
        candidates = [n for n in self.nodes if n.available and not n.flagged]
        if not candidates:
            raise NoLeader("no available replica for reads")
        # replica faults are retried elsewhere; query errors (deterministic
        # on every replica) propagate to the caller
        while candidates:
            node = candidates.pop(self.rng.randrange(len(candidates)))
            try:
                result = node.engine.execute(query, params)
            except SemagraphError:
                raise
            except Exception:  # noqa: BLE001 - engine fault on this replica
                node.available = False
                self.trace.append(f"t={self.tick} read@{node.node_id} failed; retrying")
                continue
            self.trace.append(f"t={self.tick} read@{node.node_id}")
            return result
        raise ReplicaUnavailable("every replica failed the read")

    # -- membership ---------------------------------------------------------------------

    def join(self, node: ReplicaNode) -> None:
        """Admit a node, catching its log up to the leader synchronously."""
        leader_log = self.leader.log
        local = node.log.entries
        if len(local) > leader_log.version:
            raise DivergentLog(f"node {node.node_id} log is ahead of the leader")
        for mine, theirs in zip(local, leader_log.entries):
            if mine.version != theirs.version or mine.checksum != theirs.checksum:
                node.flagged = True
                node.available = False
                raise DivergentLog(
                    f"node {node.node_id} log diverges from the leader at version {theirs.version}"
                )
        transferred = 0
        if node.applied_version < leader_log.version:
            for entry in leader_log.since(node.applied_version):
                node.apply_entry(entry)
                transferred += 1
        node.available = True
        if node.node_id not in self._by_id:
            self.nodes.append(node)
            self._by_id[node.node_id] = node
        self.acked[node.node_id] = node.applied_version
        self.trace.append(f"t={self.tick} join node {node.node_id} transferred {transferred}")

    @staticmethod
    def replay_local(node: ReplicaNode, entries) -> None:
        """Rebuild a node's engine from a log prefix (its pre-join state)."""
        for entry in entries:
            node.apply_entry(entry)

    # -- convergence -----------------------------------------------------------------------

    def quiesce(self, max_ticks: int = 1_000_000) -> int:
        """Run until every available follower acked the leader's version."""
        start = self.tick
        while True:
            done = all(
                self.acked[n.node_id] >= self.leader.log.version
                for n in self.nodes[1:]
                if n.available and not n.flagged
            ) and not self._bus
            if done:
                return self.tick - start
            if self.tick - start > max_ticks:
                raise DataError("cluster failed to converge within the tick budget")
            self.step()

    def digests(self) -> dict:
        return {n.node_id: n.state_digest() for n in self.nodes if not n.flagged}

    def trace_bytes(self) -> bytes:
        return "\n".join(self.trace).encode("utf-8")


def describe_message(msg) -> str:
    if isinstance(msg, AppendEntries):
        versions = [e.version for e in msg.entries]
        return f"AppendEntries[v{versions[0]}..v{versions[-1]}]"
    if isinstance(msg, Ack):
        return f"Ack[v{msg.applied_version}]"
    return type(msg).__name__


# -- threaded TCP smoke transport ------------------------------------------------------
#
# Same message semantics over a byte stream:
#   u8 kind (0=AppendEntries, 1=Ack) | payload
#   AppendEntries payload: u32 count, then per entry the log record layout
#   Ack payload: u64 applied_version


def _pack_entries(entries) -> bytes:
    out = struct.pack("<BI", 0, len(entries))
    for e in entries:
        raw = e.statement.encode("utf-8")
        out += struct.pack("<QI", e.version, len(raw)) + raw + struct.pack("<Q", e.checksum)
    return struct.pack("<I", len(out)) + out


def _unpack_entries(body: bytes):
    (count,) = struct.unpack_from("<I", body, 1)
    pos = 5
    entries = []
    for _ in range(count):
        version, stmt_len = struct.unpack_from("<QI", body, pos)
        pos += 12
        stmt = body[pos : pos + stmt_len].decode("utf-8")
        pos += stmt_len
        (checksum,) = struct.unpack_from("<Q", body, pos)
        pos += 8
        entries.append(WriteLogEntry(version, stmt, checksum))
    return entries


class TcpFollower(socketserver.ThreadingTCPServer):
    """A follower listening for AppendEntries frames on localhost."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, node: ReplicaNode, host: str = "127.0.0.1", port: int = 0):
        class Handler(socketserver.BaseRequestHandler):
            def handle(inner):
                sock = inner.request
                while True:
                    header = _recv_exact(sock, 4)
                    if header is None:
                        return
                    (length,) = struct.unpack("<I", header)
                    body = _recv_exact(sock, length)
                    if body is None:
                        return
                    if body[0] == 0:
                        with node_lock:
                            ack = node.receive(AppendEntries(tuple(_unpack_entries(body))))
                        payload = struct.pack("<BQ", 1, ack.applied_version)
                        sock.sendall(struct.pack("<I", len(payload)) + payload)

        node_lock = threading.Lock()
        super().__init__((host, port), Handler)
        self.node = node

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


def _recv_exact(sock, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        piece = sock.recv(n - len(buf))
        if not piece:
            return None
        buf += piece
    return buf


class TcpLeader:
    """Leader-side client pushing the log to TCP followers."""

    def __init__(self, leader: ReplicaNode):
        self.leader = leader
        self._socks: list = []

    def connect(self, host: str, port: int) -> None:
        self._socks.append(socket.create_connection((host, port)))

    def write(self, query: str) -> int:
        version = self.leader.log.version + 1
        entry = WriteLogEntry.make(version, query)
        self.leader.engine.execute(query)
        self.leader.log.append(entry)
        self.leader.applied_version = version
        frame = _pack_entries([entry])
        for sock in self._socks:
            sock.sendall(frame)
            header = _recv_exact(sock, 4)
            (length,) = struct.unpack("<I", header)
            _recv_exact(sock, length)  # ack
        return version

    def close(self) -> None:
        for sock in self._socks:
            sock.close()
