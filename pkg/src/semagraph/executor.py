"""Pull-based plan execution.

Every logical operator translates to a generator of rows; rows flow
upward one at a time, so a consumer that stops early never pays for
rows it did not ask for. A row maps variable names to bindings: node
and relationship references, property values, semantic values, paths.

Unstructured filters time their own predicate work and, once their
input is exhausted, flush one ``(elapsed, rows)`` observation to the
speed book, closing the loop that feeds the optimizer's cost model.

Single-variable structured equality and range predicates are served
from property indexes when one exists for the (label, key) pair; the
scan-and-test fallback returns the same rows either way.
"""

from __future__ import annotations

import mimetypes
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional
from urllib.parse import urlparse, unquote

from .blobs import BlobStore
from .errors import DataError, EvalError, SourceUnavailable, UnknownNode
from .extraction import ExtractionService, SemanticKind, SemanticValue
from .graph import Direction, GraphStore, Value, ValueKind
from .lang.qgraph import Predicate
from .lang.syntax import (
    And,
    Compare,
    Expr,
    HasLabel,
    Literal,
    LiteralFn,
    Not,
    Or,
    Param,
    PropAccess,
    ReturnItem,
    SEMANTIC_SYMBOLS,
    ShortestPathFn,
    SubProp,
    Var,
)
from .planner import (
    AllNodeScan,
    Expand,
    ExpandInto,
    Join,
    LogicalOp,
    NodeByLabelScan,
    Projection,
    ShortestPathOp,
    SpeedBook,
    StructuredFilter,
    UnstructuredFilter,
    _UnitRow,
)


@dataclass(frozen=True)
class NodeRef:
    id: int


@dataclass(frozen=True)
class RelRef:
    id: int


@dataclass(frozen=True)
class Path:
    """Alternating node/rel id sequence; hops == len(rels)."""

    nodes: tuple
    rels: tuple

    @property
    def hops(self) -> int:
        return len(self.rels)


Row = OrderedDict


# -- property indexes -------------------------------------------------------------


class PropertyIndexRegistry:
    """Equality + ordered indexes over node properties, per (label, key).

    Indexes rebuild lazily when the store version moves, so probes always
    agree with a fresh scan.
    """

    def __init__(self, store: GraphStore):
        self._store = store
        self._specs: set = set()  # (label or None, key)
        self._eq: dict = {}
        self._ordered: dict = {}
        self._built_version = -1

    def create_index(self, label: Optional[str], key: str) -> None:
        self._specs.add((label, key))
        self._built_version = -1

    def specs(self) -> set:
        return set(self._specs)

    def has(self, label: Optional[str], key: str) -> bool:
        return (label, key) in self._specs

    def _refresh(self) -> None:
        if self._built_version == self._store.version:
            return
        self._eq = {spec: {} for spec in self._specs}
        self._ordered = {spec: [] for spec in self._specs}
        for label, key in self._specs:
            eq = self._eq[(label, key)]
            ordered = self._ordered[(label, key)]
            for nid in self._store.scan(label):
                value = self._store.get_property(nid, key)
                if value is None:
                    continue
                eq.setdefault(value, []).append(nid)
                if value.kind in (ValueKind.INT, ValueKind.FLOAT):
                    ordered.append((float(value.data), nid))
            ordered.sort()
        self._built_version = self._store.version

    def probe_eq(self, label: Optional[str], key: str, value: Value) -> list:
        self._refresh()
        return list(self._eq[(label, key)].get(value, ()))

    def probe_range(self, label: Optional[str], key: str, lo: float, hi: float, lo_open: bool, hi_open: bool) -> list:
        import bisect

        self._refresh()
        entries = self._ordered[(label, key)]
        left = bisect.bisect_right(entries, (lo, float("inf"))) if lo_open else bisect.bisect_left(entries, (lo, -1))
        right = bisect.bisect_left(entries, (hi, -1)) if hi_open else bisect.bisect_right(entries, (hi, float("inf")))
        return sorted(nid for _, nid in entries[left:right])


# -- execution context ---------------------------------------------------------------


@dataclass
class ExecContext:
    store: GraphStore
    blobs: BlobStore
    extraction: ExtractionService
    indexes: PropertyIndexRegistry
    speed_sink: SpeedBook
    params: dict = field(default_factory=dict)
    default_sub_key: Optional[str] = None
    http_fetcher: Optional[Callable[[str], bytes]] = None
    structured_delay: float = 0.0  # per-row simulated work, bench harness knob
    timeout: Optional[float] = None
    path_defs: dict = field(default_factory=dict)  # path var -> (node_vars, edge_binds)
    counters: dict = field(default_factory=lambda: {"scanned_nodes": 0, "index_probes": 0})
    _source_blobs: dict = field(default_factory=dict)
    _deadline: Optional[float] = None

    def start_clock(self) -> None:
        self._deadline = time.monotonic() + self.timeout if self.timeout else None

    def check_deadline(self) -> None:
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise DataError("query timed out")

    def param(self, name: str) -> Value:
        if name not in self.params:
            raise EvalError(f"missing parameter ${name}")
        return Value.from_python(self.params[name])


# -- expression evaluation -------------------------------------------------------------


def truthy(value) -> bool:
    if value is None:
        return False
    if isinstance(value, bool):
        return value
    if isinstance(value, Value):
        if value.kind is ValueKind.BOOL:
            return value.data
        raise EvalError(f"expected a boolean, got {value.kind.value}")
    raise EvalError(f"expected a boolean, got {type(value).__name__}")


def eval_expr(expr: Expr, row: Row, ctx: ExecContext):
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Param):
        return ctx.param(expr.name)
    if isinstance(expr, Var):
        if expr.name in row:
            return row[expr.name]
        if expr.name in ctx.path_defs:
            node_vars, edge_binds = ctx.path_defs[expr.name]
            return Path(
                tuple(row[v].id for v in node_vars),
                tuple(row[b].id for b in edge_binds),
            )
        raise EvalError(f"variable {expr.name!r} not bound at this operator")
    if isinstance(expr, PropAccess):
        ref = row.get(expr.var)
        if isinstance(ref, NodeRef):
            return ctx.store.get_property(ref.id, expr.key)
        if isinstance(ref, RelRef):
            return ctx.store.get_property(ref.id, expr.key, rel=True)
        raise EvalError(f"{expr.var!r} is not a node or relationship")
    if isinstance(expr, HasLabel):
        ref = row.get(expr.var)
        if not isinstance(ref, NodeRef):
            raise EvalError(f"{expr.var!r} is not a node")
        return ctx.store.node(ref.id).has_label(expr.label)
    if isinstance(expr, SubProp):
        base = eval_expr(expr.base, row, ctx)
        if base is None:
            return None
        blob_id = _as_blob_id(base)
        return ctx.extraction.extract(blob_id, expr.sub_key)
    if isinstance(expr, LiteralFn):
        return Value.blob_ref(create_from_source(expr, ctx, row))
    if isinstance(expr, Compare):
        return _eval_compare(expr, row, ctx)
    if isinstance(expr, And):
        return truthy(eval_expr(expr.lhs, row, ctx)) and truthy(eval_expr(expr.rhs, row, ctx))
    if isinstance(expr, Or):
        return truthy(eval_expr(expr.lhs, row, ctx)) or truthy(eval_expr(expr.rhs, row, ctx))
    if isinstance(expr, Not):
        return not truthy(eval_expr(expr.operand, row, ctx))
    if isinstance(expr, ShortestPathFn):
        bound = row.get(_sp_bind_key(expr))
        if bound is not None or _sp_bind_key(expr) in row:
            return bound
        return _compute_shortest_path(expr, row, ctx)
    raise EvalError(f"cannot evaluate {type(expr).__name__}")


def _as_blob_id(value) -> int:
    if isinstance(value, Value) and value.kind is ValueKind.BLOB:
        return value.data
    raise EvalError("'->' and '~:' on blobs need a BLOB-typed operand")


def _sp_bind_key(fn: ShortestPathFn) -> str:
    return f"_sp:{fn.src_var}:{fn.dst_var}:{fn.min_hops}:{fn.max_hops}"


def _eval_compare(expr: Compare, row: Row, ctx: ExecContext):
    lhs = eval_expr(expr.lhs, row, ctx)
    rhs = eval_expr(expr.rhs, row, ctx)
    if lhs is None or rhs is None:
        return None
    if expr.symbol in SEMANTIC_SYMBOLS:
        a, sub_a = _to_semantic(lhs, rhs, expr.lhs, ctx)
        b, sub_b = _to_semantic(rhs, lhs, expr.rhs, ctx)
        return ctx.extraction.compare(expr.symbol, a, b, sub_key=sub_a or sub_b)
    return _structured_compare(expr.symbol, lhs, rhs)


def _to_semantic(value, other, source_expr: Expr, ctx: ExecContext):
    """Coerce a comparison operand to a semantic value.

    Blob references extract the context's default sub-property; plain
    values are wrapped to match the other side's kind.
    """
    if isinstance(value, SemanticValue):
        sub = source_expr.sub_key if isinstance(source_expr, SubProp) else None
        return value, sub
    if isinstance(value, Value) and value.kind is ValueKind.BLOB:
        if ctx.default_sub_key is None:
            raise EvalError(
                "comparing blobs needs an explicit '->subProperty' or a configured default sub-property"
            )
        return ctx.extraction.extract(value.data, ctx.default_sub_key), ctx.default_sub_key
    if isinstance(value, Value):
        other_kind = other.kind if isinstance(other, SemanticValue) else None
        if value.kind in (ValueKind.INT, ValueKind.FLOAT):
            return SemanticValue.number(float(value.data)), None
        if value.kind is ValueKind.TEXT:
            if other_kind is SemanticKind.CATEGORICAL:
                return SemanticValue.categorical(value.data), None
            return SemanticValue.text(value.data), None
    raise EvalError(f"cannot use {type(value).__name__} in a semantic comparison")


def _plain(value):
    if isinstance(value, Value):
        return value.data if value.kind is not ValueKind.BLOB else ("blob", value.data)
    if isinstance(value, SemanticValue):
        if value.kind is SemanticKind.NUMBER:
            return value.data
        if value.kind in (SemanticKind.TEXT, SemanticKind.CATEGORICAL):
            return value.data
        return value.data  # vector tuple: equality only
    return value


def _structured_compare(symbol: str, lhs, rhs):
    a, b = _plain(lhs), _plain(rhs)
    numeric = lambda x: isinstance(x, (int, float)) and not isinstance(x, bool)
    if symbol == "=":
        return a == b
    if symbol == "<>":
        return a != b
    if numeric(a) and numeric(b):
        pass
    elif isinstance(a, str) and isinstance(b, str):
        pass
    else:
        return None  # incomparable kinds never satisfy an order predicate
    if symbol == "<":
        return a < b
    if symbol == ">":
        return a > b
    if symbol == "<=":
        return a <= b
    if symbol == ">=":
        return a >= b
    raise EvalError(f"unknown comparison symbol {symbol!r}")


# -- literal functions -----------------------------------------------------------------


def create_from_source(spec: LiteralFn, ctx: ExecContext, row: Optional[Row] = None) -> int:
    """Ingest a blob from a literal source; one blob per source expression.

    Repeated rows of one query reuse the blob created on first
    evaluation; separate executions ingest separate blobs (no dedup).
    """
    memo_key = id(spec)
    if memo_key in ctx._source_blobs:
        return ctx._source_blobs[memo_key]
    arg = eval_expr(spec.arg, row or Row(), ctx)
    if not (isinstance(arg, Value) and arg.kind is ValueKind.TEXT):
        raise SourceUnavailable(f"Blob.{spec.fn} needs a text argument")
    text = arg.data
    if spec.fn == "fromBytes":
        try:
            payload = bytes.fromhex(text)
        except ValueError as exc:
            raise SourceUnavailable(f"invalid hex literal: {exc}") from exc
        mime = "application/octet-stream"
    elif spec.fn == "fromFile":
        payload, mime = _read_file_source(text)
    elif spec.fn == "fromURL":
        parsed = urlparse(text)
        if parsed.scheme == "file":
            payload, mime = _read_file_source(unquote(parsed.path))
        elif parsed.scheme in ("http", "https"):
            if ctx.http_fetcher is None:
                raise SourceUnavailable("no http fetcher configured for Blob.fromURL")
            try:
                payload = ctx.http_fetcher(text)
            except Exception as exc:  # noqa: BLE001
                raise SourceUnavailable(f"fetching {text}: {exc}") from exc
            mime = mimetypes.guess_type(text)[0] or "application/octet-stream"
        else:
            raise SourceUnavailable(f"unsupported URL scheme {parsed.scheme!r}")
    else:
        raise SourceUnavailable(f"unknown literal function {spec.fn!r}")
    blob_id = ctx.blobs.put_blob(payload, mime)
    ctx._source_blobs[memo_key] = blob_id
    return blob_id


def _read_file_source(path: str):
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as exc:
        raise SourceUnavailable(f"cannot read {path}: {exc}") from exc
    return payload, mimetypes.guess_type(path)[0] or "application/octet-stream"


# -- operator translation ----------------------------------------------------------------


def execute(plan: LogicalOp, ctx: ExecContext, limit: Optional[int] = None) -> Iterator[Row]:
    """Run a plan; yields projected rows."""
    ctx.start_clock()
    stream = _translate(plan, ctx)
    if limit is None:
        yield from stream
        return
    count = 0
    for row in stream:
        yield row
        count += 1
        if count >= limit:
            stream.close()
            return


def _translate(op: LogicalOp, ctx: ExecContext) -> Iterator[Row]:
    if isinstance(op, _UnitRow):
        return iter([Row()])
    if isinstance(op, AllNodeScan):
        return _scan(op.var, None, ctx)
    if isinstance(op, NodeByLabelScan):
        return _scan(op.var, op.label, ctx)
    if isinstance(op, StructuredFilter):
        probe = _try_index_probe(op, ctx)
        if probe is not None:
            return probe
        return _structured_filter(op, ctx)
    if isinstance(op, UnstructuredFilter):
        return _unstructured_filter(op, ctx)
    if isinstance(op, Expand):
        return _expand(op, ctx)
    if isinstance(op, ExpandInto):
        return _expand_into(op, ctx)
    if isinstance(op, Join):
        return _join(op, ctx)
    if isinstance(op, ShortestPathOp):
        return _shortest_path_op(op, ctx)
    if isinstance(op, Projection):
        return _projection(op, ctx)
    raise DataError(f"cannot execute operator {type(op).__name__}")


def _scan(var: str, label: Optional[str], ctx: ExecContext) -> Iterator[Row]:
    for nid in ctx.store.scan(label):
        ctx.counters["scanned_nodes"] += 1
        ctx.check_deadline()
        row = Row()
        row[var] = NodeRef(nid)
        yield row


def _structured_filter(op: StructuredFilter, ctx: ExecContext) -> Iterator[Row]:
    pred = op.pred
    for row in _translate(op.child, ctx):
        if ctx.structured_delay and not isinstance(pred.expr, HasLabel):
            time.sleep(ctx.structured_delay)
        if truthy(eval_expr(pred.expr, row, ctx)):
            yield row


def _try_index_probe(op: StructuredFilter, ctx: ExecContext) -> Optional[Iterator[Row]]:
    """Serve filter-over-scan from a property index when one applies."""
    pred = op.pred
    child = op.child
    if not isinstance(child, (AllNodeScan, NodeByLabelScan)):
        return None
    if not isinstance(pred.expr, Compare) or len(pred.vars) != 1:
        return None
    ids = pushdown_filter(pred, ctx, var_label=child.label if isinstance(child, NodeByLabelScan) else None, probe_only=True)
    if ids is None:
        return None
    var = child.var

    def rows():
        for nid in ids:
            row = Row()
            row[var] = NodeRef(nid)
            yield row

    return rows()


def pushdown_filter(
    pred: Predicate,
    ctx: ExecContext,
    var_label: Optional[str] = None,
    probe_only: bool = False,
):
    """Node ids satisfying a single-variable structured predicate.

    Uses the property index for the (label, key) pair when registered
    (equality via the inverted map, ranges via the ordered entries);
    otherwise falls back to scan-and-test over the same label. With
    ``probe_only`` the fallback is skipped and None is returned instead.
    """
    expr = pred.expr
    probe = _index_probe_ids(expr, ctx, var_label)
    if probe is not None:
        ctx.counters["index_probes"] += 1
        return probe
    if probe_only:
        return None
    var = next(iter(pred.vars))
    ids = []
    for nid in ctx.store.scan(var_label):
        ctx.counters["scanned_nodes"] += 1
        row = Row()
        row[var] = NodeRef(nid)
        if truthy(eval_expr(expr, row, ctx)):
            ids.append(nid)
    return ids


def _index_probe_ids(expr: Expr, ctx: ExecContext, label: Optional[str]):
    if not isinstance(expr, Compare):
        return None
    prop, literal, symbol = None, None, expr.symbol
    if isinstance(expr.lhs, PropAccess) and isinstance(expr.rhs, (Literal, Param)):
        prop, lit_expr = expr.lhs, expr.rhs
    elif isinstance(expr.rhs, PropAccess) and isinstance(expr.lhs, (Literal, Param)):
        prop, lit_expr = expr.rhs, expr.lhs
        symbol = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}.get(symbol, symbol)
    else:
        return None
    if not ctx.indexes.has(label, prop.key):
        return None
    value = lit_expr.value if isinstance(lit_expr, Literal) else ctx.param(lit_expr.name)
    if symbol == "=":
        return sorted(ctx.indexes.probe_eq(label, prop.key, value))
    if symbol in ("<", "<=", ">", ">=") and value.kind in (ValueKind.INT, ValueKind.FLOAT):
        bound = float(value.data)
        inf = float("inf")
        if symbol == "<":
            return ctx.indexes.probe_range(label, prop.key, -inf, bound, False, True)
        if symbol == "<=":
            return ctx.indexes.probe_range(label, prop.key, -inf, bound, False, False)
        if symbol == ">":
            return ctx.indexes.probe_range(label, prop.key, bound, inf, True, False)
        return ctx.indexes.probe_range(label, prop.key, bound, inf, False, False)
    return None


def _unstructured_filter(op: UnstructuredFilter, ctx: ExecContext) -> Iterator[Row]:
    rows_in = 0
    work = 0.0
    try:
        for row in _translate(op.child, ctx):
            rows_in += 1
            t0 = time.perf_counter()
            keep = truthy(eval_expr(op.pred.expr, row, ctx))
            work += time.perf_counter() - t0
            if keep:
                yield row
    finally:
        # one observation per execution closes the cost-model feedback loop
        if rows_in > 0:
            ctx.speed_sink.record(op.filter_id, work, rows_in)


def _edge_direction(edge, from_var: str) -> Direction:
    if edge.direction == "both":
        return Direction.BOTH
    forward = (edge.direction == "out") == (from_var == edge.src_var)
    return Direction.OUT if forward else Direction.IN


def edge_bind_name(edge) -> str:
    return edge.var or f"_e{edge.id}"


def _expand(op: Expand, ctx: ExecContext) -> Iterator[Row]:
    direction = _edge_direction(op.edge, op.from_var)
    bind = edge_bind_name(op.edge)
    for row in _translate(op.child, ctx):
        ctx.check_deadline()
        ref = row[op.from_var]
        for rid, other in ctx.store.expand(ref.id, direction, op.edge.rel_type):
            new_row = Row(row)
            new_row[op.to_var] = NodeRef(other)
            new_row[bind] = RelRef(rid)
            yield new_row


def _expand_into(op: ExpandInto, ctx: ExecContext) -> Iterator[Row]:
    edge = op.edge
    direction = _edge_direction(edge, edge.src_var)
    bind = edge_bind_name(edge)
    for row in _translate(op.child, ctx):
        target = row[edge.dst_var].id
        for rid, other in ctx.store.expand(row[edge.src_var].id, direction, edge.rel_type):
            if other == target:
                new_row = Row(row)
                new_row[bind] = RelRef(rid)
                yield new_row


def _join(op: Join, ctx: ExecContext) -> Iterator[Row]:
    right_rows = list(_translate(op.right, ctx))
    if not op.on_vars:
        for left_row in _translate(op.left, ctx):
            for right_row in right_rows:
                merged = Row(left_row)
                merged.update(right_row)
                yield merged
        return
    table: dict = {}
    for row in right_rows:
        key = tuple(row[v] for v in op.on_vars)
        table.setdefault(key, []).append(row)
    for left_row in _translate(op.left, ctx):
        key = tuple(left_row[v] for v in op.on_vars)
        for right_row in table.get(key, ()):
            merged = Row(right_row)
            merged.update(left_row)
            yield merged


def _shortest_path_op(op: ShortestPathOp, ctx: ExecContext) -> Iterator[Row]:
    key = _sp_bind_key(op.fn)
    for row in _translate(op.child, ctx):
        new_row = Row(row)
        new_row[key] = _compute_shortest_path(op.fn, row, ctx)
        yield new_row


def _compute_shortest_path(fn: ShortestPathFn, row: Row, ctx: ExecContext) -> Optional[Path]:
    a_ref, b_ref = row.get(fn.src_var), row.get(fn.dst_var)
    if not isinstance(a_ref, NodeRef) or not isinstance(b_ref, NodeRef):
        raise EvalError("shortestPath endpoints must be bound nodes")
    return shortest_path(a_ref.id, b_ref.id, fn.max_hops, ctx, min_hops=fn.min_hops)


def shortest_path(a: int, b: int, max_hops: int, ctx: ExecContext, min_hops: int = 1) -> Optional[Path]:
    """Minimum-hop undirected path from ``a`` to ``b`` within the bound.

    Among equal-length paths the lexicographically smallest node-id
    sequence wins. Returns None when unreachable within ``max_hops`` or
    shorter than ``min_hops``.
    """
    store = ctx.store
    if not store.has_node(a):
        raise UnknownNode(f"node {a} does not exist")
    if not store.has_node(b):
        raise UnknownNode(f"node {b} does not exist")

    # distances from b, then a greedy smallest-neighbor walk from a
    dist = {b: 0}
    frontier = [b]
    depth = 0
    while frontier and depth < max_hops:
        depth += 1
        next_frontier = []
        for nid in frontier:
            for _, other in store.expand(nid, Direction.BOTH):
                if other not in dist:
                    dist[other] = depth
                    next_frontier.append(other)
        frontier = next_frontier

    if a not in dist or dist[a] < min_hops or dist[a] > max_hops:
        return None
    nodes = [a]
    rels = []
    current = a
    remaining = dist[a]
    while remaining > 0:
        candidates = {}
        for rid, other in store.expand(current, Direction.BOTH):
            if dist.get(other) == remaining - 1:
                prev = candidates.get(other)
                if prev is None or rid < prev:
                    candidates[other] = rid
        next_node = min(candidates)
        rels.append(candidates[next_node])
        nodes.append(next_node)
        current = next_node
        remaining -= 1
    return Path(tuple(nodes), tuple(rels))


def _projection(op: Projection, ctx: ExecContext) -> Iterator[Row]:
    if not op.items:
        # binding pass-through: the write path consumes raw rows
        yield from _translate(op.child, ctx)
        return
    names = [item.alias or _item_name(item) for item in op.items]
    for row in _translate(op.child, ctx):
        ctx.check_deadline()
        out = Row()
        for name, item in zip(names, op.items):
            out[name] = eval_expr(item.expr, row, ctx)
        yield out


def _item_name(item: ReturnItem) -> str:
    from .lang.syntax import unparse_expr

    return unparse_expr(item.expr)


# -- result rendering --------------------------------------------------------------------


def render_value(value, ctx: Optional[ExecContext] = None) -> str:
    """Stable text form for one projected value (TSV cell)."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, NodeRef):
        return f"({value.id})"
    if isinstance(value, RelRef):
        return f"[{value.id}]"
    if isinstance(value, Path):
        if not value.rels:
            return f"({value.nodes[0]})"
        parts = []
        for i, rid in enumerate(value.rels):
            rel_type = ctx.store.rel(rid).rel_type if ctx else ""
            tag = f"{rid}:{rel_type}" if rel_type else str(rid)
            parts.append(f"({value.nodes[i]})-[{tag}]-")
        parts.append(f"({value.nodes[-1]})")
        return "".join(parts)
    if isinstance(value, SemanticValue):
        return value.render()
    if isinstance(value, Value):
        if value.kind is ValueKind.BLOB and ctx is not None:
            meta = ctx.blobs.blob_meta(value.data)
            return f"blob:{meta.id}:{meta.mime}:{meta.length}"
        if value.kind is ValueKind.FLOAT:
            return f"{value.data:.6g}"
        return value.render()
    return str(value)


def render_rows(rows, ctx: Optional[ExecContext] = None) -> list:
    """Rows as lists of rendered cells; first element is the header."""
    rows = list(rows)
    if not rows:
        return []
    header = list(rows[0].keys())
    out = [header]
    for row in rows:
        out.append([render_value(row[k], ctx) for k in header])
    return out
