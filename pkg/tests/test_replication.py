"""Write log, routing, follower catch-up, convergence, determinism."""

import random

import pytest

from semagraph.database import Database
from semagraph.errors import ChecksumMismatch, DataError, DivergentLog
from semagraph.replication import (
    AppendEntries,
    ClusterSim,
    ReplicaNode,
    TcpFollower,
    TcpLeader,
    WriteLog,
    WriteLogEntry,
    entry_checksum,
)


# -- classification -----------------------------------------------------------------


def test_classify_read():
    assert Database.classify("MATCH (n) RETURN n") == "read"


def test_classify_create_is_write():
    assert (
        Database.classify(
            "CREATE (jordan:Person{name: 'Michael Jordan'}) "
            "CREATE (scott:Person{name: 'Scott Pippen'}) "
            "CREATE (jordan)-[:teamMate]->(scott);"
        )
        == "write"
    )


def test_classify_mixed_set_is_write():
    assert Database.classify("MATCH (n) SET n.x = 1 RETURN n") == "write"
    assert Database.classify("MATCH (n) DELETE n") == "write"


# -- write log -----------------------------------------------------------------------


def test_log_versions_ascending_and_checksummed():
    log = WriteLog()
    for i in range(1, 4):
        log.append(WriteLogEntry.make(i, f"CREATE (n:Item {{seq: {i}}})"))
    assert log.version == 3
    assert all(e.verify() for e in log.entries)
    with pytest.raises(DataError):
        log.append(WriteLogEntry.make(5, "CREATE (n)"))


def test_log_file_roundtrip(tmp_path):
    path = str(tmp_path / "writes.log")
    log = WriteLog(path)
    log.append(WriteLogEntry.make(1, "CREATE (a:X)"))
    log.append(WriteLogEntry.make(2, "CREATE (b:Y)"))
    log.close()
    reloaded = WriteLog(path)
    assert [e.statement for e in reloaded.entries] == ["CREATE (a:X)", "CREATE (b:Y)"]
    reloaded.close()


def test_corrupted_entry_detected():
    good = WriteLogEntry.make(1, "CREATE (a)")
    bad = WriteLogEntry(1, "CREATE (b)", good.checksum)
    assert not bad.verify()
    node = ReplicaNode(1)
    with pytest.raises(ChecksumMismatch):
        node.apply_entry(bad)
    assert node.flagged


def test_checksum_depends_on_version_and_statement():
    assert entry_checksum(1, "x") != entry_checksum(2, "x")
    assert entry_checksum(1, "x") != entry_checksum(1, "y")


# -- routing ------------------------------------------------------------------------


def test_write_goes_to_leader_and_grows_log():
    sim = ClusterSim(3, seed=1)
    before = sim.leader.log.version
    version = sim.submit("CREATE (n:Item {seq: 1})")
    assert version == before + 1
    assert sim.leader.log.version == before + 1


def test_read_executes_on_exactly_one_replica():
    sim = ClusterSim(3, seed=2)
    sim.submit("CREATE (n:Item {seq: 1})")
    sim.quiesce()
    counts = {n.node_id: n.engine.extraction.extract_requests for n in sim.nodes}
    reads_before = [len(t) for t in [sim.trace]]
    result = sim.submit("MATCH (n:Item) RETURN n.seq")
    read_lines = [line for line in sim.trace if " read@" in line]
    assert len(read_lines) == 1
    assert len(result.rows) == 1


def test_reads_on_leader_reflect_acknowledged_writes():
    sim = ClusterSim(3, seed=3, drop_rate=0.2)
    rng = random.Random(3)
    expected = 0
    for i in range(100):
        sim.submit(f"CREATE (n:Item {{seq: {i}}})")
        expected += 1
        if rng.random() < 0.3:
            result = sim.leader.engine.execute("MATCH (n:Item) RETURN n.seq")
            assert len(result.rows) == expected
        sim.step(rng.randint(0, 4))


# -- replication --------------------------------------------------------------------


def test_follower_catches_up_in_order():
    sim = ClusterSim(2, seed=4, min_delay=0, max_delay=0)
    for i in range(3):
        sim.submit(f"CREATE (n:Item {{seq: {i}}})")
    sim.quiesce()
    follower = sim.nodes[1]
    assert follower.applied_version == 3
    assert [e.version for e in follower.log.entries] == [1, 2, 3]
    assert follower.state_digest() == sim.leader.state_digest()


def test_out_of_order_entries_never_applied():
    node = ReplicaNode(7)
    e1 = WriteLogEntry.make(1, "CREATE (a:X)")
    e2 = WriteLogEntry.make(2, "CREATE (b:Y)")
    node.receive(AppendEntries((e2,)))  # gap: must wait
    assert node.applied_version == 0
    node.receive(AppendEntries((e1, e2)))
    assert node.applied_version == 2


def test_drop_recovery_via_retransmission():
    sim = ClusterSim(3, seed=5, drop_rate=0.5, min_delay=0, max_delay=5)
    for i in range(20):
        sim.submit(f"CREATE (n:Item {{seq: {i}}})")
    sim.quiesce()
    digests = sim.digests()
    assert len(set(digests.values())) == 1


def test_fuzz_convergence_with_drops_and_delays():
    sim = ClusterSim(5, seed=6, drop_rate=0.1, min_delay=0, max_delay=50)
    rng = random.Random(6)
    for i in range(300):
        sim.submit(f"CREATE (n:Item {{seq: {i}, name: 'x{rng.randrange(100)}'}})")
        sim.step(rng.randint(0, 3))
    sim.quiesce()
    digests = sim.digests()
    leader_digest = digests[0]
    assert all(d == leader_digest for d in digests.values())
    versions = {n.node_id: n.applied_version for n in sim.nodes}
    assert set(versions.values()) == {sim.leader.log.version}
    for node in sim.nodes:
        assert [e.version for e in node.log.entries] == list(range(1, node.applied_version + 1))


# -- join ---------------------------------------------------------------------------


def test_join_at_same_version_transfers_nothing():
    sim = ClusterSim(2, seed=7)
    for i in range(5):
        sim.submit(f"CREATE (n:Item {{seq: {i}}})")
    node = ReplicaNode(9)
    ClusterSim.replay_local(node, sim.leader.log.entries)
    sim.join(node)
    assert any("transferred 0" in line for line in sim.trace)
    assert node.state_digest() == sim.leader.state_digest()


def test_join_behind_replays_missing_suffix():
    sim = ClusterSim(2, seed=8)
    for i in range(15):
        sim.submit(f"CREATE (n:Item {{seq: {i}}})")
    node = ReplicaNode(9)
    ClusterSim.replay_local(node, sim.leader.log.entries[:5])
    assert node.applied_version == 5
    sim.join(node)
    assert node.applied_version == 15
    assert any("transferred 10" in line for line in sim.trace)
    assert node.state_digest() == sim.leader.state_digest()
    # the joined node serves reads afterwards
    assert node.available


def test_join_divergent_log_excluded():
    sim = ClusterSim(2, seed=9)
    for i in range(5):
        sim.submit(f"CREATE (n:Item {{seq: {i}}})")
    node = ReplicaNode(9)
    forged = [WriteLogEntry.make(1, "CREATE (n:Evil)")] + sim.leader.log.entries[1:3]
    node.log.entries = forged  # bypass apply: simulated pre-existing local log
    node.applied_version = 3
    with pytest.raises(DivergentLog):
        sim.join(node)
    assert node.flagged and not node.available


# -- digests -------------------------------------------------------------------------


def test_fresh_replicas_equal_digests():
    a, b = ReplicaNode(0), ReplicaNode(1)
    assert a.state_digest() == b.state_digest()


def test_digest_order_independent():
    a, b = Database(in_memory=True), Database(in_memory=True)
    a.store.create_node(("X",), {"p": 1})
    a.store.create_node(("Y",), {"q": 2})
    b.store.create_node(("X",), {"p": 1})
    b.store.create_node(("Y",), {"q": 2})
    assert a.state_digest() == b.state_digest()


def test_digest_sensitive_to_one_property():
    a, b = Database(in_memory=True), Database(in_memory=True)
    a.store.create_node(("X",), {"p": 1})
    b.store.create_node(("X",), {"p": 2})
    assert a.state_digest() != b.state_digest()


# -- determinism ---------------------------------------------------------------------


def run_trace(seed: int) -> bytes:
    sim = ClusterSim(4, seed=seed, drop_rate=0.15, min_delay=0, max_delay=20)
    rng = random.Random(seed)
    for i in range(120):
        sim.submit(f"CREATE (n:Item {{seq: {i}}})")
        if rng.random() < 0.2:
            sim.submit("MATCH (n:Item) RETURN n.seq")
        sim.step(rng.randint(0, 3))
    sim.quiesce()
    return sim.trace_bytes()


def test_identical_seeds_identical_traces():
    assert run_trace(42) == run_trace(42)


def test_different_seeds_differ():
    assert run_trace(42) != run_trace(43)


# -- TCP smoke ----------------------------------------------------------------------


def test_tcp_replication_smoke():
    leader = ReplicaNode(0, "leader")
    follower = ReplicaNode(1)
    server = TcpFollower(follower)
    server.start()
    try:
        client = TcpLeader(leader)
        client.connect(*server.server_address)
        for i in range(10):
            client.write(f"CREATE (n:Item {{seq: {i}}})")
        client.close()
        assert follower.applied_version == 10
        assert follower.state_digest() == leader.state_digest()
    finally:
        server.shutdown()


def test_read_retries_on_failing_replica():
    from semagraph.errors import ParseError

    sim = ClusterSim(3, seed=11)
    sim.submit("CREATE (n:Item {seq: 1})")
    sim.quiesce()
    broken = sim.nodes[2]
    broken.engine.execute = None  # replica fault: engine gone
    results = [sim.submit("MATCH (n:Item) RETURN n.seq") for _ in range(20)]
    assert all(len(r.rows) == 1 for r in results)
    assert not broken.available  # faulted replica got excluded
    # query errors are not replica faults: they propagate, nothing is marked down
    with pytest.raises(ParseError):
        sim.submit("MATCH (n RETURN n")
    assert sum(1 for n in sim.nodes if n.available) == 2


def test_replicate_direct_transfers_missing_suffix():
    from semagraph.replication import replicate

    leader = ReplicaNode(0, "leader")
    follower = ReplicaNode(1)
    for i in range(1, 6):
        entry = WriteLogEntry.make(i, f"CREATE (n:Item {{seq: {i}}})")
        leader.engine.execute(entry.statement)
        leader.log.append(entry)
        leader.applied_version = i
    assert replicate(leader, follower) == 5
    assert follower.applied_version == 5
    assert replicate(leader, follower) == 0  # already caught up
    assert follower.state_digest() == leader.state_digest()
