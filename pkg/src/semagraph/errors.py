"""Error taxonomy shared by every engine layer.

Each error carries a ``category`` used by the service and CLI to pick an
HTTP status / exit code: ``usage`` (1), ``data`` (2) or ``engine`` (3).
"""

from __future__ import annotations


class SemagraphError(Exception):
    """Base class for all engine errors."""

    category = "engine"


class UsageError(SemagraphError):
    category = "usage"


class DataError(SemagraphError):
    category = "data"


# graph store
class UnknownNode(DataError):
    pass


class UnknownRel(DataError):
    pass


# blob store
class UnknownBlob(DataError):
    pass


class RangeOutOfBounds(DataError):
    pass


class InvalidConfig(UsageError):
    pass


class IoError(SemagraphError):
    pass


# extraction / AIPM
class DuplicateSerial(UsageError):
    pass


class NoExtractor(DataError):
    pass


class ExtractorFailed(SemagraphError):
    def __init__(self, status: str, message: str = ""):
        super().__init__(f"extractor failed with status {status}: {message}")
        self.status = status


class KindMismatch(DataError):
    pass


class UnsupportedSymbol(DataError):
    pass


class EmptySet(DataError):
    pass


class AipmTimeout(SemagraphError):
    pass


class TransportClosed(SemagraphError):
    pass


# semantic index
class DimMismatch(DataError):
    pass


class DuplicateId(DataError):
    pass


class EmptySpace(DataError):
    pass


class StaleIndex(SemagraphError):
    pass


# query language
class LexError(DataError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at {line}:{col}")
        self.line = line
        self.col = col


class ParseError(DataError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} at {line}:{col}")
        self.line = line
        self.col = col


class UnboundVariable(DataError):
    def __init__(self, name: str):
        super().__init__(f"variable '{name}' is not bound by MATCH or CREATE")
        self.name = name


class EvalError(DataError):
    pass


# planner
class ZeroRows(UsageError):
    pass


class Unsatisfiable(SemagraphError):
    pass


# executor
class SourceUnavailable(DataError):
    pass


# replication
class NoLeader(SemagraphError):
    pass


class ReplicaUnavailable(SemagraphError):
    pass


class ChecksumMismatch(SemagraphError):
    pass


class DivergentLog(SemagraphError):
    pass
