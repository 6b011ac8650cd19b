"""Benchmark harnesses: vector-index recall and the cluster scenario.

The recall bench follows the usual methodology: build an index over a
synthetic clustered dataset, run repeated kNN queries, score each
against a brute-force oracle and report min/max/avg recall per (k,
nprobe) pair, plus mean query latency.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .extraction import SemanticKind, SemanticValue
from .semindex import SemanticSpace, VectorIndex, batch_build, brute_knn


@dataclass
class RecallReport:
    vectors: int
    dim: int
    buckets: int
    repeats: int
    seed: int
    # rows: (k, nprobe, min, max, avg, mean_latency_ms)
    rows: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "vectors": self.vectors,
            "dim": self.dim,
            "buckets": self.buckets,
            "repeats": self.repeats,
            "seed": self.seed,
            "rows": [
                {
                    "k": k,
                    "nprobe": nprobe,
                    "min_recall": mn,
                    "max_recall": mx,
                    "avg_recall": avg,
                    "mean_latency_ms": lat,
                }
                for k, nprobe, mn, mx, avg, lat in self.rows
            ],
        }

    def format(self) -> str:
        lines = [
            f"vectors={self.vectors} dim={self.dim} buckets={self.buckets} "
            f"repeats={self.repeats} seed={self.seed}",
            f"{'k':>5} {'nprobe':>7} {'min':>7} {'max':>7} {'avg':>7} {'ms/query':>9}",
        ]
        for k, nprobe, mn, mx, avg, lat in self.rows:
            lines.append(f"{k:>5} {nprobe:>7} {mn:>7.3f} {mx:>7.3f} {avg:>7.3f} {lat:>9.3f}")
        return "\n".join(lines)


def clustered_vectors(
    count: int,
    dim: int,
    clusters: int,
    seed: int,
    spread: float = 0.05,
    subcluster_size: int = 10,
    subcluster_spread: float = 0.002,
) -> np.ndarray:
    """Hierarchical Gaussian blobs around uniformly placed centers.

    Each cluster is itself a mixture of tight sub-blobs (near-duplicate
    groups, the way descriptor datasets repeat almost-identical points).
    ``subcluster_size=1`` degenerates to plain isotropic blobs.
    """
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, 1.0, size=(clusters, dim))
    if subcluster_size <= 1:
        assignment = rng.integers(0, clusters, size=count)
        return (centers[assignment] + rng.normal(0.0, spread, size=(count, dim))).astype(np.float32)
    groups = -(-count // subcluster_size)
    group_centers = centers[rng.integers(0, clusters, size=groups)] + rng.normal(
        0.0, spread, size=(groups, dim)
    )
    assignment = np.repeat(np.arange(groups), subcluster_size)[:count]
    points = group_centers[assignment] + rng.normal(0.0, subcluster_spread, size=(count, dim))
    return points.astype(np.float32)


def build_space(vectors: np.ndarray, sub_key: str = "bench", serial: int = 1) -> SemanticSpace:
    space = SemanticSpace(sub_key, serial, SemanticKind.VECTOR, dim=vectors.shape[1])
    for i, vec in enumerate(vectors):
        space.add(i, SemanticValue.vector(vec.tolist()))
    return space


def recall_of(approx_ids, exact_ids) -> float:
    if not exact_ids:
        return 1.0
    return len(set(approx_ids) & set(exact_ids)) / len(exact_ids)


def run_recall_bench(
    *,
    vectors: int = 10_000,
    dim: int = 64,
    clusters: int = 100,
    buckets: int = 100,
    ks=(1, 10, 100, 500),
    nprobes=(1,),
    repeats: int = 500,
    seed: int = 0,
    query_noise: float = 0.01,
    space: Optional[SemanticSpace] = None,
    index: Optional[VectorIndex] = None,
) -> RecallReport:
    """Measure recall of the bucketed index against the brute oracle.

    Queries are dataset vectors perturbed by a little noise, drawn with
    the bench seed; ``nprobe`` values may include the string ``"all"``.
    """
    if space is None:
        data = clustered_vectors(vectors, dim, clusters, seed)
        space = build_space(data)
    else:
        data = np.vstack([np.asarray(space.members[i].data, dtype=np.float32) for i in sorted(space.members)])
        vectors, dim = data.shape
    if index is None:
        index = batch_build(space, bucket_count=buckets, rng_seed=seed)
    buckets = len(index.buckets)

    rng = np.random.default_rng(seed + 1)
    picks = rng.integers(0, vectors, size=repeats)
    queries = data[picks] + rng.normal(0.0, query_noise, size=(repeats, data.shape[1])).astype(np.float32)

    report = RecallReport(vectors=vectors, dim=dim, buckets=buckets, repeats=repeats, seed=seed)
    resolved = [(p, buckets if p == "all" else int(p)) for p in nprobes]
    # one brute pass per query at the largest k; smaller ks are prefixes
    k_max = max(ks)
    exact_full = {qi: brute_knn(space, queries[qi], k_max).ids for qi in range(repeats)}
    exact_cache = {k: {qi: ids[:k] for qi, ids in exact_full.items()} for k in ks}
    for k in ks:
        for label, nprobe in resolved:
            recalls = []
            elapsed = 0.0
            for qi in range(repeats):
                t0 = time.perf_counter()
                result = index.knn(queries[qi], k, nprobe=nprobe)
                elapsed += time.perf_counter() - t0
                recalls.append(recall_of(result.ids, exact_cache[k][qi]))
            report.rows.append(
                (
                    k,
                    label if label == "all" else nprobe,
                    min(recalls),
                    max(recalls),
                    sum(recalls) / len(recalls),
                    1000.0 * elapsed / repeats,
                )
            )
    return report


# -- cluster scenario ---------------------------------------------------------------


@dataclass
class ClusterScenarioReport:
    replicas: int
    writes: int
    seed: int
    drop_rate: float
    leader_version: int
    converged: bool
    digests: dict
    ticks: int
    late_join_transferred: Optional[int] = None

    def as_dict(self) -> dict:
        return {
            "replicas": self.replicas,
            "writes": self.writes,
            "seed": self.seed,
            "drop_rate": self.drop_rate,
            "leader_version": self.leader_version,
            "converged": self.converged,
            "digests": {str(k): f"{v:016x}" for k, v in self.digests.items()},
            "ticks": self.ticks,
            "late_join_transferred": self.late_join_transferred,
        }

    def format(self) -> str:
        lines = [
            f"replicas={self.replicas} writes={self.writes} seed={self.seed} drop={self.drop_rate}",
            f"leader version: {self.leader_version}; quiesced in {self.ticks} ticks",
        ]
        if self.late_join_transferred is not None:
            lines.append(f"late joiner transferred {self.late_join_transferred} entries")
        for node_id, digest in sorted(self.digests.items()):
            lines.append(f"node {node_id}: digest {digest:016x}")
        lines.append("converged: " + ("yes" if self.converged else "NO"))
        return "\n".join(lines)


def run_cluster_scenario(
    *,
    replicas: int = 5,
    writes: int = 1000,
    drop_rate: float = 0.1,
    min_delay: int = 0,
    max_delay: int = 50,
    seed: int = 0,
    late_joiner_lag: Optional[int] = None,
    read_every: int = 50,
) -> ClusterScenarioReport:
    """Scripted run: random writes, optional late joiner, quiesce, digest."""
    from .replication import ClusterSim, ReplicaNode

    sim = ClusterSim(
        replicas, seed=seed, drop_rate=drop_rate, min_delay=min_delay, max_delay=max_delay
    )
    rng = random.Random(seed)
    late_transferred = None
    join_at = writes - (late_joiner_lag or 0)
    late_node: Optional[ReplicaNode] = None
    for i in range(writes):
        name = f"item_{rng.randrange(1_000_000)}"
        sim.submit(f"CREATE (x:Item{{name: '{name}', seq: {i}}});")
        if i % read_every == read_every - 1:
            sim.submit("MATCH (x:Item) RETURN x.seq;")
        sim.step(rng.randint(0, 3))
        if late_joiner_lag is not None and i == join_at:
            late_node = ReplicaNode(len(sim.nodes), "follower")
            prefix = sim.leader.log.entries[: max(0, sim.leader.log.version - late_joiner_lag)]
            ClusterSim.replay_local(late_node, prefix)
            before = late_node.applied_version
            sim.join(late_node)
            late_transferred = late_node.applied_version - before
    ticks = sim.quiesce()
    digests = sim.digests()
    leader_digest = digests[sim.leader.node_id]
    converged = all(d == leader_digest for d in digests.values())
    return ClusterScenarioReport(
        replicas=len(sim.nodes),
        writes=writes,
        seed=seed,
        drop_rate=drop_rate,
        leader_version=sim.leader.log.version,
        converged=converged,
        digests=digests,
        ticks=ticks,
        late_join_transferred=late_transferred,
    )
