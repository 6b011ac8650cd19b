"""Engine configuration: a flat ``key = value`` file, UTF-8.

Unknown keys are rejected so typos fail loudly. Two key families are
dotted: ``similarity_threshold.<space>`` overrides the similarity cutoff
of one semantic space, and ``extractor.<sub_key>`` registers a stub
extractor at startup, e.g.::

    extractor.face = byte_vector dim=8 serial=1 latency_ms=0
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidConfig

_SCALAR_KEYS = {
    "data_dir": str,
    "host": str,
    "port": int,
    "inline_threshold": int,
    "chunk_size": int,
    "num_columns": int,
    "ema_k": float,
    "planner_default_v": float,
    "similarity_threshold": float,
    "blob_compare_sub_key": str,
    "bucket_divisor": int,
    "min_buckets": int,
    "structured_selectivity": float,
    "unstructured_selectivity": float,
    "cluster_replicas": int,
    "aipm_timeout": float,
    "query_timeout": float,
}

_POSITIVE_KEYS = {
    "port",
    "inline_threshold",
    "chunk_size",
    "num_columns",
    "ema_k",
    "planner_default_v",
    "similarity_threshold",
    "bucket_divisor",
    "min_buckets",
    "structured_selectivity",
    "unstructured_selectivity",
    "cluster_replicas",
    "aipm_timeout",
}


@dataclass
class Config:
    data_dir: str = "./semagraph-data"
    host: str = "127.0.0.1"
    port: int = 8765
    inline_threshold: int = 10 * 1024
    chunk_size: int = 64 * 1024
    num_columns: int = 1024
    ema_k: float = 4.0
    planner_default_v: float = 0.1
    similarity_threshold: float = 0.8
    blob_compare_sub_key: Optional[str] = None
    bucket_divisor: int = 100_000
    min_buckets: int = 1
    structured_selectivity: float = 0.1
    unstructured_selectivity: float = 0.05
    cluster_replicas: int = 3
    aipm_timeout: float = 30.0
    query_timeout: float = 0.0  # 0 disables the deadline
    space_thresholds: dict = field(default_factory=dict)
    extractors: dict = field(default_factory=dict)  # sub_key -> stub spec string

    def validate(self) -> "Config":
        for key in _POSITIVE_KEYS:
            if not getattr(self, key) > 0:
                raise InvalidConfig(f"config key {key!r} must be positive")
        if self.query_timeout < 0:
            raise InvalidConfig("query_timeout must be >= 0")
        for space, threshold in self.space_thresholds.items():
            if not threshold > 0:
                raise InvalidConfig(f"similarity_threshold.{space} must be positive")
        return self


def parse_config(text: str) -> Config:
    cfg = Config()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _SCALAR_KEYS:
            caster = _SCALAR_KEYS[key]
            try:
                setattr(cfg, key, caster(value))
            except ValueError as exc:
                raise InvalidConfig(f"line {lineno}: bad value for {key}: {exc}") from exc
        elif key.startswith("similarity_threshold."):
            space = key.split(".", 1)[1]
            try:
                cfg.space_thresholds[space] = float(value)
            except ValueError as exc:
                raise InvalidConfig(f"line {lineno}: bad threshold: {exc}") from exc
        elif key.startswith("extractor."):
            cfg.extractors[key.split(".", 1)[1]] = value
        else:
            raise InvalidConfig(f"line {lineno}: unknown config key {key!r}")
    return cfg.validate()


def load_config(path: str) -> Config:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def parse_stub_spec(sub_key: str, spec: str):
    """Build a stub extractor from a config value like ``byte_vector dim=4 serial=1``."""
    from .extraction import STUB_FACTORIES

    parts = spec.split()
    if not parts or parts[0] not in STUB_FACTORIES:
        raise InvalidConfig(
            f"extractor.{sub_key}: unknown stub {spec!r} (choose from {sorted(STUB_FACTORIES)})"
        )
    factory = STUB_FACTORIES[parts[0]]
    kwargs = {"serial": 1}
    for part in parts[1:]:
        if "=" not in part:
            raise InvalidConfig(f"extractor.{sub_key}: bad option {part!r}")
        name, _, value = part.partition("=")
        if name == "latency_ms":
            kwargs["latency"] = float(value) / 1000.0
        elif name in ("dim", "serial"):
            kwargs[name] = int(value)
        else:
            raise InvalidConfig(f"extractor.{sub_key}: unknown option {name!r}")
    if factory.__name__ in ("text_label_extractor", "byte_number_extractor"):
        kwargs.pop("dim", None)
    return factory(sub_key, **kwargs)
