"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional, Union

from pydantic import BaseModel, Field


class QueryRequest(BaseModel):
    text: str
    params: dict = Field(default_factory=dict)
    plan_mode: str = "greedy"  # greedy | naive


class QueryResponse(BaseModel):
    columns: list[str]
    rows: list[list[str]]
    summary: Optional[dict] = None


class ExplainRequest(BaseModel):
    text: str


class ExplainResponse(BaseModel):
    plan: str


class InitRequest(BaseModel):
    wipe: bool = False


class InitResponse(BaseModel):
    data_dir: Optional[str]
    created: bool


class IngestRequest(BaseModel):
    nodes: list[str] = Field(default_factory=list)
    rels: list[str] = Field(default_factory=list)
    blob_dir: Optional[str] = None
    blob_column: str = "blob_path"


class IngestResponse(BaseModel):
    nodes_created: int
    rels_created: int
    blobs_created: int
    rejected: list[str]
    skipped_files: list[str]


class StatsResponse(BaseModel):
    node_count: int
    rel_count: int
    label_counts: dict[str, int]
    rel_type_counts: dict[str, int]
    avg_out_degree: float
    blob_count: int


class IndexRequest(BaseModel):
    label: Optional[str] = None
    key: str


class BenchIndexRequest(BaseModel):
    vectors: int = 10_000
    dim: int = 64
    clusters: int = 100
    buckets: int = 100
    ks: list[int] = Field(default_factory=lambda: [1, 10, 100, 500])
    nprobes: list[Union[int, str]] = Field(default_factory=lambda: [1])
    repeats: int = 500
    seed: int = 0


class BenchIndexResponse(BaseModel):
    report: dict
    text: str


class ClusterSimRequest(BaseModel):
    replicas: int = 5
    writes: int = 1000
    drop_rate: float = 0.1
    min_delay: int = 0
    max_delay: int = 50
    seed: int = 0
    late_joiner_lag: Optional[int] = None


class ClusterSimResponse(BaseModel):
    report: dict
    text: str


class CheckpointResponse(BaseModel):
    snapshot: Optional[str]


class ErrorBody(BaseModel):
    error: str
    category: str  # usage | data | engine
    message: str
