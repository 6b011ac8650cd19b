"""The embedded database: one object tying every subsystem together.

A ``Database`` owns the graph store, the blob store, the extraction
service, property indexes and the filter speed book, and runs queries
end to end: parse, bind-check, plan, execute, and apply writes. It can
live purely in memory (replica simulation, tests) or on a data
directory with checkpoint-based persistence.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

from .blobs import BlobStore
from .config import Config, parse_stub_spec
from .errors import EvalError
from .executor import (
    ExecContext,
    NodeRef,
    PropertyIndexRegistry,
    RelRef,
    Row,
    eval_expr,
    execute,
    render_rows,
)
from .extraction import ExtractionService, SemanticValue
from .graph import GraphStats, GraphStore, Value, load_snapshot, save_snapshot
from .lang import Ast, parse_text, to_query_graph
from .lang.syntax import PathPattern
from .planner import CardinalityModel, LogicalOp, SpeedBook, explain as explain_plan, naive_plan, optimize

SNAPSHOT_FILE = "graph.pgrf"
SPEEDS_FILE = "speed_stats.txt"
CACHE_FILE = "semcache.bin"
BLOBS_DIR = "blobs"


@dataclass
class WriteSummary:
    nodes_created: int = 0
    rels_created: int = 0
    props_set: int = 0
    nodes_deleted: int = 0
    rels_deleted: int = 0

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v}


@dataclass
class QueryResult:
    columns: list
    rows: list  # raw binding rows (OrderedDict)
    summary: Optional[WriteSummary] = None

    def rendered(self, ctx=None) -> list:
        table = render_rows(self.rows, ctx)
        return table if table else ([self.columns] if self.columns else [])


class Database:
    def __init__(self, config: Optional[Config] = None, *, in_memory: bool = False):
        self.config = config or Config()
        self.data_dir = None if in_memory else self.config.data_dir
        if self.data_dir is not None:
            os.makedirs(self.data_dir, exist_ok=True)
            snapshot = os.path.join(self.data_dir, SNAPSHOT_FILE)
            if os.path.exists(snapshot):
                self.store, inline = load_snapshot(snapshot)
            else:
                self.store, inline = GraphStore(), {}
            self.blobs = BlobStore(
                os.path.join(self.data_dir, BLOBS_DIR),
                inline_threshold=self.config.inline_threshold,
                chunk_size=self.config.chunk_size,
                num_columns=self.config.num_columns,
            )
            self.blobs.restore_inline_payloads(inline)
        else:
            self.store = GraphStore()
            self.blobs = BlobStore(
                None,
                inline_threshold=self.config.inline_threshold,
                chunk_size=self.config.chunk_size,
                num_columns=self.config.num_columns,
            )
        self.extraction = ExtractionService(self.blobs.read_all, timeout=self.config.aipm_timeout)
        # similarity thresholds: global default then per-space overrides
        for comp in self.extraction.comparators._by_kind.values():
            comp.threshold = self.config.similarity_threshold
        for space, threshold in self.config.space_thresholds.items():
            self.extraction.comparators.set_threshold(space, threshold)
        for sub_key, spec in sorted(self.config.extractors.items()):
            self.extraction.register_extractor(parse_stub_spec(sub_key, spec))
        self.indexes = PropertyIndexRegistry(self.store)
        self.speeds = SpeedBook(self.config.ema_k)
        self.http_fetcher = None
        if self.data_dir is not None:
            self.speeds.load(os.path.join(self.data_dir, SPEEDS_FILE))
            self.extraction.load_cache(os.path.join(self.data_dir, CACHE_FILE))

    # -- context -----------------------------------------------------------------

    def make_context(self, params: Optional[dict] = None, **overrides) -> ExecContext:
        ctx = ExecContext(
            store=self.store,
            blobs=self.blobs,
            extraction=self.extraction,
            indexes=self.indexes,
            speed_sink=self.speeds,
            params=params or {},
            default_sub_key=self.config.blob_compare_sub_key,
            http_fetcher=self.http_fetcher,
            timeout=self.config.query_timeout or None,
        )
        for key, value in overrides.items():
            setattr(ctx, key, value)
        return ctx

    def _planner_kwargs(self) -> dict:
        return dict(
            model=CardinalityModel(
                structured_selectivity=self.config.structured_selectivity,
                unstructured_selectivity=self.config.unstructured_selectivity,
            ),
            indexed_props=self.indexes.specs(),
            default_sub_key=self.config.blob_compare_sub_key,
            default_v=self.config.planner_default_v,
            ema_k=self.config.ema_k,
        )

    def plan(self, text: str, mode: str = "greedy") -> LogicalOp:
        return self.plan_from_ast(parse_text(text), mode)

    def plan_from_ast(self, ast: Ast, mode: str = "greedy") -> LogicalOp:
        qg = to_query_graph(ast)
        build = optimize if mode == "greedy" else naive_plan
        return build(qg, self.store.stats(), self.speeds, **self._planner_kwargs())

    def explain(self, text: str) -> str:
        return explain_plan(self.plan(text))

    # -- query execution -----------------------------------------------------------

    def execute(
        self,
        text: str,
        params: Optional[dict] = None,
        *,
        plan_mode: str = "greedy",
        ctx: Optional[ExecContext] = None,
        limit: Optional[int] = None,
    ) -> QueryResult:
        ast = parse_text(text)
        if ast.explain:
            import dataclasses

            plan = self.plan_from_ast(dataclasses.replace(ast, explain=False))
            row = Row()
            row["plan"] = Value.text(explain_plan(plan))
            return QueryResult(["plan"], [row])
        ctx = ctx or self.make_context(params)
        if params:
            ctx.params = params
        if ast.is_write:
            return self._execute_write(ast, ctx)
        return self._execute_read(ast, ctx, plan_mode, limit)

    @staticmethod
    def _install_path_defs(qg, ctx: ExecContext) -> None:
        for path_var, node_vars, edge_keys in qg.paths:
            if path_var is not None:
                binds = tuple(var or f"_e{eid}" for eid, var in edge_keys)
                ctx.path_defs[path_var] = (node_vars, binds)

    def _execute_read(self, ast: Ast, ctx: ExecContext, plan_mode: str, limit: Optional[int]) -> QueryResult:
        qg = to_query_graph(ast)
        self._install_path_defs(qg, ctx)
        build = optimize if plan_mode == "greedy" else naive_plan
        plan = build(qg, self.store.stats(), self.speeds, **self._planner_kwargs())
        rows = list(execute(plan, ctx, limit=limit))
        columns = list(rows[0].keys()) if rows else [
            item.alias or _return_name(item) for item in ast.returns
        ]
        return QueryResult(columns, rows)

    def execute_plan(self, plan: LogicalOp, ctx: Optional[ExecContext] = None, limit: Optional[int] = None):
        """Run a pre-built plan; used by benches comparing plan variants."""
        ctx = ctx or self.make_context()
        return execute(plan, ctx, limit=limit)

    # -- write path -----------------------------------------------------------------

    def _execute_write(self, ast: Ast, ctx: ExecContext) -> QueryResult:
        summary = WriteSummary()
        if ast.matches:
            qg = to_query_graph(Ast(matches=ast.matches, where=ast.where))
            self._install_path_defs(qg, ctx)
            plan = optimize(qg, self.store.stats(), self.speeds, **self._planner_kwargs())
            # materialize before mutating
            match_rows = list(execute(plan, ctx))
        else:
            match_rows = [Row()]

        out_rows = []
        deleted_nodes: set = set()
        deleted_rels: set = set()
        for row in match_rows:
            bindings = Row(row)
            for pattern in ast.creates:
                self._apply_create(pattern, bindings, ctx, summary)
            for item in ast.sets:
                self._apply_set(item, bindings, ctx, summary)
            for var in ast.deletes:
                ref = bindings.get(var)
                if isinstance(ref, NodeRef):
                    deleted_nodes.add(ref.id)
                elif isinstance(ref, RelRef):
                    deleted_rels.add(ref.id)
                else:
                    raise EvalError(f"cannot DELETE {var!r}")
            if ast.returns:
                out = Row()
                for item in ast.returns:
                    name = item.alias or _return_name(item)
                    out[name] = eval_expr(item.expr, bindings, ctx)
                out_rows.append(out)
        for rid in sorted(deleted_rels):
            self.store.delete_rel(rid)
            summary.rels_deleted += 1
        for nid in sorted(deleted_nodes):
            if self.store.has_node(nid):
                self.store.delete_node(nid)
                summary.nodes_deleted += 1
        columns = list(out_rows[0].keys()) if out_rows else []
        return QueryResult(columns, out_rows, summary)

    def _apply_create(self, pattern: PathPattern, bindings: Row, ctx: ExecContext, summary: WriteSummary):
        node_refs = []
        for node_pat in pattern.nodes:
            var = node_pat.var
            if var and var in bindings:
                ref = bindings[var]
                if not isinstance(ref, NodeRef):
                    raise EvalError(f"CREATE endpoint {var!r} is not a node")
                if node_pat.labels or node_pat.props:
                    raise EvalError(f"variable {var!r} is already bound; labels/properties not allowed")
                node_refs.append(ref)
                continue
            props = {}
            for key, expr in node_pat.props:
                props[key] = self._write_value(eval_expr(expr, bindings, ctx))
            nid = self.store.create_node(node_pat.labels, props)
            summary.nodes_created += 1
            ref = NodeRef(nid)
            node_refs.append(ref)
            if var:
                bindings[var] = ref
        for i, rel_pat in enumerate(pattern.rels):
            if rel_pat.rel_type is None:
                raise EvalError("CREATE relationships need a type")
            src, tgt = node_refs[i], node_refs[i + 1]
            if rel_pat.direction == "in":
                src, tgt = tgt, src
            elif rel_pat.direction == "both":
                raise EvalError("CREATE relationships need a direction")
            props = {}
            for key, expr in rel_pat.props:
                props[key] = self._write_value(eval_expr(expr, bindings, ctx))
            rid = self.store.create_rel(src.id, tgt.id, rel_pat.rel_type, props)
            summary.rels_created += 1
            if rel_pat.var:
                bindings[rel_pat.var] = RelRef(rid)

    def _apply_set(self, item, bindings: Row, ctx: ExecContext, summary: WriteSummary):
        ref = bindings.get(item.var)
        value = self._write_value(eval_expr(item.expr, bindings, ctx))
        if isinstance(ref, NodeRef):
            self.store.set_property(ref.id, item.key, value)
        elif isinstance(ref, RelRef):
            self.store.set_property(ref.id, item.key, value, rel=True)
        else:
            raise EvalError(f"cannot SET on {item.var!r}")
        summary.props_set += 1

    @staticmethod
    def _write_value(value) -> Value:
        if isinstance(value, Value):
            return value
        if isinstance(value, SemanticValue):
            from .extraction import SemanticKind

            if value.kind is SemanticKind.NUMBER:
                return Value.real(value.data)
            if value.kind in (SemanticKind.TEXT, SemanticKind.CATEGORICAL):
                return Value.text(value.data)
            raise EvalError("cannot store a vector as a property")
        if isinstance(value, bool) or isinstance(value, (int, float, str)):
            return Value.from_python(value)
        raise EvalError(f"cannot store {type(value).__name__} as a property")

    # -- classification (replication routing) -----------------------------------------

    @staticmethod
    def classify(text: str) -> str:
        """Route a statement: ``write`` iff it contains CREATE/SET/DELETE."""
        ast = parse_text(text)
        return "write" if ast.is_write else "read"

    # -- maintenance --------------------------------------------------------------------

    def create_index(self, label: Optional[str], key: str) -> None:
        self.indexes.create_index(label, key)

    def stats(self) -> GraphStats:
        return self.store.stats()

    def checkpoint(self) -> Optional[str]:
        if self.data_dir is None:
            return None
        snapshot = os.path.join(self.data_dir, SNAPSHOT_FILE)
        save_snapshot(self.store, snapshot, self.blobs.inline_payloads())
        self.speeds.save(os.path.join(self.data_dir, SPEEDS_FILE))
        self.extraction.dump_cache(os.path.join(self.data_dir, CACHE_FILE))
        return snapshot

    def state_digest(self) -> int:
        """Order-independent 64-bit digest of the logical state."""
        import hashlib

        def h(*parts) -> int:
            m = hashlib.blake2b(digest_size=8)
            for part in parts:
                m.update(str(part).encode())
                m.update(b"\x1f")
            return int.from_bytes(m.digest(), "little")

        digest = 0
        for nid in self.store.node_ids():
            node = self.store.node(nid)
            props = sorted((k, v.kind.value, v.data) for k, v in node.properties.items())
            digest ^= h("N", nid, sorted(node.labels), props)
        for rid in self.store.rel_ids():
            rel = self.store.rel(rid)
            props = sorted((k, v.kind.value, v.data) for k, v in rel.properties.items())
            digest ^= h("R", rid, rel.rel_type, rel.src, rel.tgt, props)
        for bid in sorted(self.blobs._metas):
            meta = self.blobs.blob_meta(bid)
            digest ^= h("B", bid, meta.length, meta.mime)
        return digest

    def close(self) -> None:
        if self.data_dir is not None:
            self.checkpoint()
        self.extraction.close()


def _return_name(item) -> str:
    from .lang.syntax import unparse_expr

    return unparse_expr(item.expr)
