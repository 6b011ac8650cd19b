"""semagraph: a property-graph engine with unstructured (BLOB) properties.

Core pieces: the graph store, streaming blob storage, semantic
sub-property extraction with a serial-validated cache, a bucketed vector
index, a Cypher-flavored query language, a cost-based greedy planner, a
volcano executor, and a simulated leader/follower replication layer. A
FastAPI service wraps one embedded instance; the CLI is a thin client.
"""

from .blobs import BlobHandle, BlobMeta, BlobStore, locate
from .config import Config, load_config, parse_config
from .database import Database, QueryResult
from .extraction import (
    AipmRequest,
    AipmResponse,
    AipmServer,
    AipmStatus,
    ExtractionService,
    Extractor,
    InProcessTransport,
    SemanticKind,
    SemanticValue,
    aipm_roundtrip,
    byte_number_extractor,
    byte_vector_extractor,
    hash_vector_extractor,
    text_label_extractor,
)
from .graph import Direction, GraphStats, GraphStore, Node, Relationship, Value, ValueKind
from .planner import (
    CardinalityModel,
    FilterSpeedStats,
    SpeedBook,
    expected_cost,
    explain,
    naive_plan,
    optimize,
    record_invocation,
)
from .semindex import (
    KnnResult,
    SemanticSpace,
    VectorIndex,
    batch_build,
    brute_knn,
    numeric_range,
    text_lookup,
)

__version__ = "0.1.0"

__all__ = [
    "BlobHandle",
    "BlobMeta",
    "BlobStore",
    "locate",
    "Config",
    "load_config",
    "parse_config",
    "Database",
    "QueryResult",
    "AipmRequest",
    "AipmResponse",
    "AipmServer",
    "AipmStatus",
    "ExtractionService",
    "Extractor",
    "InProcessTransport",
    "SemanticKind",
    "SemanticValue",
    "aipm_roundtrip",
    "byte_number_extractor",
    "byte_vector_extractor",
    "hash_vector_extractor",
    "text_label_extractor",
    "Direction",
    "GraphStats",
    "GraphStore",
    "Node",
    "Relationship",
    "Value",
    "ValueKind",
    "CardinalityModel",
    "FilterSpeedStats",
    "SpeedBook",
    "expected_cost",
    "explain",
    "naive_plan",
    "optimize",
    "record_invocation",
    "KnnResult",
    "SemanticSpace",
    "VectorIndex",
    "batch_build",
    "brute_knn",
    "numeric_range",
    "text_lookup",
    "__version__",
]
