"""Cost-based greedy plan optimization.

The expensive operators here are unstructured property filters: their
per-row speed is learned at runtime as an exponential moving average.
After the i-th invocation of a filter that took ``cost`` seconds over
``rows`` input rows, the estimate is

    v_1 = cost / rows
    v_i = (v_{i-1} + k * cost / rows) / (k + 1)        for i > 1

and v_i is the expected per-row speed of the next invocation. The
sensitivity factor ``k`` weights recent measurements: bigger k tracks
the latest behavior more closely. The expected cost of running the
filter over an input of estimated size E|T| is then ``v * E|T|``.

Plans are grown greedily over a table of partial plans. The table is
seeded with one leaf scan per query-graph node; every round collects
candidates (pairwise joins, single-plan expands along unrealized edges,
applicable filters, the final projection), picks the cheapest by
estimated total cost, inserts it and deletes the entries it covers.
Structured predicates and label checks also auto-attach to a freshly
inserted entry as soon as their variables are covered; unstructured
predicates only enter plans through costed candidates, which is what
lets measured speeds push them behind joins and expands. The loop ends
when a single entry covers the whole query graph.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .errors import DataError, Unsatisfiable, ZeroRows
from .graph import GraphStats
from .lang.qgraph import Predicate, QEdge, QueryGraph, filter_signature
from .lang.syntax import HasLabel, ShortestPathFn, unparse_expr

DEFAULT_EMA_K = 4.0
DEFAULT_COLD_V = 0.1  # pessimistic s/row for never-measured filters

COST_SCAN_PER_ROW = 1e-6
COST_FILTER_INDEXED_PER_ROW = 1e-6
COST_FILTER_SCAN_PER_ROW = 1e-5
COST_EXPAND_PER_INPUT_ROW = 1e-5
COST_EXPAND_PER_OUTPUT_ROW = 1e-6
COST_JOIN_PER_ROW = 1e-6
COST_PROJECTION_PER_ROW = 1e-6
COST_SHORTEST_PATH_PER_ROW = 1e-4


# -- filter speed statistics ---------------------------------------------------


@dataclass(frozen=True)
class FilterSpeedStats:
    """Per-filter EMA speed record; immutable, updated by replacement."""

    filter_id: str
    v: float = 0.0  # seconds per row
    invocations: int = 0
    k: float = DEFAULT_EMA_K


def record_invocation(stats: FilterSpeedStats, cost_secs: float, rows: int) -> FilterSpeedStats:
    """Fold one measured ``(cost, rows)`` observation into the EMA."""
    if rows < 1:
        raise ZeroRows("cannot record a filter invocation over zero rows")
    if cost_secs < 0:
        raise DataError("cost must be non-negative")
    sample = cost_secs / rows
    if stats.invocations == 0:
        v = sample
    else:
        v = (stats.v + stats.k * sample) / (stats.k + 1.0)
    return replace(stats, v=v, invocations=stats.invocations + 1)


def expected_cost(stats: Optional[FilterSpeedStats], expected_rows: float, default_v: float = DEFAULT_COLD_V) -> float:
    """Expected seconds for a filter over ``expected_rows`` input rows."""
    if stats is None or stats.invocations == 0:
        return default_v * expected_rows
    return stats.v * expected_rows


class SpeedBook:
    """Thread-safe collection of filter speed records.

    Persists as line records ``filter_id v i k``.
    """

    def __init__(self, k: float = DEFAULT_EMA_K):
        self.k = k
        self._stats: dict[str, FilterSpeedStats] = {}
        self._lock = threading.Lock()

    def get(self, filter_id: str) -> Optional[FilterSpeedStats]:
        return self._stats.get(filter_id)

    def record(self, filter_id: str, cost_secs: float, rows: int) -> FilterSpeedStats:
        with self._lock:
            current = self._stats.get(filter_id, FilterSpeedStats(filter_id, k=self.k))
            updated = record_invocation(current, cost_secs, rows)
            self._stats[filter_id] = updated
            return updated

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._stats)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for fid in sorted(self._stats):
                s = self._stats[fid]
                f.write(f"{fid} {s.v!r} {s.invocations} {s.k!r}\n")

    def load(self, path: str) -> None:
        import os

        if not os.path.exists(path):
            return
        with open(path, encoding="utf-8") as f:
            for line in f:
                parts = line.split()
                if len(parts) != 4:
                    continue
                fid, v, i, k = parts[0], float(parts[1]), int(parts[2]), float(parts[3])
                self._stats[fid] = FilterSpeedStats(fid, v, i, k)


# -- logical operators -----------------------------------------------------------


@dataclass
class LogicalOp:
    est_cost: float = field(default=0.0, init=False)
    est_card: float = field(default=0.0, init=False)

    def children(self) -> tuple:
        return ()


@dataclass
class AllNodeScan(LogicalOp):
    var: str

    def describe(self) -> str:
        return f"AllNodeScan [{self.var}]"


@dataclass
class NodeByLabelScan(LogicalOp):
    var: str
    label: str

    def describe(self) -> str:
        return f"NodeByLabelScan [{self.var}:{self.label}]"


@dataclass
class StructuredFilter(LogicalOp):
    child: LogicalOp
    pred: Predicate
    indexed: bool = False

    def children(self) -> tuple:
        return (self.child,)

    def describe(self) -> str:
        tag = ", indexed" if self.indexed else ""
        return f"StructuredFilter [{unparse_expr(self.pred.expr)}{tag}]"


@dataclass
class UnstructuredFilter(LogicalOp):
    child: LogicalOp
    filter_id: str
    pred: Predicate

    def children(self) -> tuple:
        return (self.child,)

    def describe(self) -> str:
        return f"UnstructuredFilter [{unparse_expr(self.pred.expr)}; id={self.filter_id}]"


@dataclass
class Expand(LogicalOp):
    child: LogicalOp
    from_var: str
    to_var: str
    edge: QEdge

    def children(self) -> tuple:
        return (self.child,)

    def describe(self) -> str:
        t = f":{self.edge.rel_type}" if self.edge.rel_type else ""
        if self.edge.direction == "both":
            shape = f"({self.from_var})-[{t}]-({self.to_var})"
        elif (self.edge.direction == "out") == (self.from_var == self.edge.src_var):
            shape = f"({self.from_var})-[{t}]->({self.to_var})"
        else:
            shape = f"({self.from_var})<-[{t}]-({self.to_var})"
        return f"Expand [{shape}]"


@dataclass
class ExpandInto(LogicalOp):
    """Adjacency check for an edge whose endpoints are both bound."""

    child: LogicalOp
    edge: QEdge

    def children(self) -> tuple:
        return (self.child,)

    def describe(self) -> str:
        t = f":{self.edge.rel_type}" if self.edge.rel_type else ""
        return f"ExpandInto [({self.edge.src_var})-[{t}]->({self.edge.dst_var})]"


@dataclass
class Join(LogicalOp):
    left: LogicalOp
    right: LogicalOp
    on_vars: tuple

    def children(self) -> tuple:
        return (self.left, self.right)

    def describe(self) -> str:
        key = ", ".join(self.on_vars) if self.on_vars else "cross"
        return f"Join [{key}]"


@dataclass
class ShortestPathOp(LogicalOp):
    child: LogicalOp
    fn: ShortestPathFn
    bind_name: str

    def children(self) -> tuple:
        return (self.child,)

    def describe(self) -> str:
        return (
            f"ShortestPath [{self.bind_name} = ({self.fn.src_var})-"
            f"[*{self.fn.min_hops}..{self.fn.max_hops}]-({self.fn.dst_var})]"
        )


@dataclass
class Projection(LogicalOp):
    child: LogicalOp
    items: tuple  # of ReturnItem

    def children(self) -> tuple:
        return (self.child,)

    def describe(self) -> str:
        labels = ", ".join(item.alias or unparse_expr(item.expr) for item in self.items)
        return f"Projection [{labels}]"


# -- cardinality model ------------------------------------------------------------


@dataclass
class CardinalityModel:
    """Closed-form row estimates; stand-in for statistics the engine lacks."""

    structured_selectivity: float = 0.1
    unstructured_selectivity: float = 0.05
    join_correction: float = 0.1

    def scan_card(self, stats: GraphStats, label: Optional[str]) -> float:
        if label is None:
            return float(stats.node_count)
        return float(stats.label_counts.get(label, 0))

    def expand_fanout(self, stats: GraphStats) -> float:
        return stats.avg_out_degree


def estimate_cardinality(op: LogicalOp, stats: GraphStats, model: CardinalityModel) -> float:
    """Estimated output rows of one operator given its children's estimates."""
    if isinstance(op, AllNodeScan):
        return model.scan_card(stats, None)
    if isinstance(op, NodeByLabelScan):
        return model.scan_card(stats, op.label)
    if isinstance(op, StructuredFilter):
        child = op.child.est_card
        if isinstance(op.pred.expr, HasLabel):
            total = max(1.0, float(stats.node_count))
            return child * (stats.label_counts.get(op.pred.expr.label, 0) / total)
        return child * model.structured_selectivity
    if isinstance(op, UnstructuredFilter):
        return op.child.est_card * model.unstructured_selectivity
    if isinstance(op, Expand):
        return op.child.est_card * model.expand_fanout(stats)
    if isinstance(op, ExpandInto):
        return op.child.est_card * model.structured_selectivity
    if isinstance(op, Join):
        product = op.left.est_card * op.right.est_card
        return product * (model.join_correction if op.on_vars else 1.0)
    if isinstance(op, (Projection, ShortestPathOp)):
        return op.child.est_card
    raise DataError(f"unknown operator {type(op).__name__}")


# -- plan table ---------------------------------------------------------------------


@dataclass
class PlanEntry:
    plan: LogicalOp
    covered: frozenset  # q-node vars
    applied: frozenset  # predicate ids (labels as 'label:var:name')
    realized: frozenset  # q-edge ids
    est_cost: float
    est_card: float

    def fingerprint(self) -> str:
        return plan_fingerprint(self.plan)


@dataclass
class PlanTable:
    entries: list = field(default_factory=list)

    def insert(self, entry: PlanEntry) -> None:
        # delete covered plans: anything whose coverage the new entry subsumes
        self.entries = [e for e in self.entries if not e.covered <= entry.covered]
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)


def plan_fingerprint(op: LogicalOp) -> str:
    parts = [op.describe()]
    for child in op.children():
        parts.append(plan_fingerprint(child))
    return "(" + " ".join(parts) + ")"


# -- optimizer ----------------------------------------------------------------------


@dataclass
class OptimizeInfo:
    loop_picks: int = 0
    merge_picks: int = 0


class _Planner:
    def __init__(
        self,
        qg: QueryGraph,
        stats: GraphStats,
        speeds,
        *,
        model: Optional[CardinalityModel] = None,
        indexed_props: Iterable[tuple] = (),
        default_sub_key: Optional[str] = None,
        default_v: float = DEFAULT_COLD_V,
        ema_k: float = DEFAULT_EMA_K,
    ):
        self.qg = qg
        self.stats = stats
        self.speeds = speeds if speeds is not None else SpeedBook(ema_k)
        self.model = model or CardinalityModel()
        self.indexed_props = set(indexed_props)
        self.default_sub_key = default_sub_key
        self.default_v = default_v
        self.component_of = qg.component_of()
        self.all_vars = frozenset(qg.qnodes)
        self.filtering_preds = {pid: p for pid, p in qg.predicates.items() if p.filtering}
        self.label_obligations = frozenset(
            f"label:{var}:{label}" for var, qn in qg.qnodes.items() for label in qn.labels
        )
        self.all_obligations = frozenset(self.filtering_preds) | self.label_obligations
        self.all_edges = frozenset(e.id for e in qg.qedges)
        self.info = OptimizeInfo()

    # -- cost/card bookkeeping -------------------------------------------------

    def _finish(self, op: LogicalOp, child_costs: float, own_cost: float) -> LogicalOp:
        op.est_card = estimate_cardinality(op, self.stats, self.model)
        op.est_cost = child_costs + own_cost
        return op

    def _scan(self, var: str) -> LogicalOp:
        labels = self.qg.qnodes[var].labels
        if labels:
            op = NodeByLabelScan(var, labels[0])
        else:
            op = AllNodeScan(var)
        op.est_card = estimate_cardinality(op, self.stats, self.model)
        op.est_cost = op.est_card * COST_SCAN_PER_ROW
        return op

    def _structured_filter(self, child: LogicalOp, pred: Predicate) -> LogicalOp:
        indexed = self._is_indexed(pred)
        per_row = COST_FILTER_INDEXED_PER_ROW if indexed else COST_FILTER_SCAN_PER_ROW
        op = StructuredFilter(child, pred, indexed)
        return self._finish(op, child.est_cost, child.est_card * per_row)

    def _is_indexed(self, pred: Predicate) -> bool:
        if isinstance(pred.expr, HasLabel) or pred.prop_key is None or len(pred.vars) != 1:
            return False
        var = next(iter(pred.vars))
        labels = self.qg.qnodes[var].labels or (None,)
        return any((label, pred.prop_key) in self.indexed_props for label in labels)

    def _unstructured_filter(self, child: LogicalOp, pred: Predicate) -> LogicalOp:
        fid = filter_signature(pred.expr, self.default_sub_key) or f"pred:{pred.id}"
        op = UnstructuredFilter(child, fid, pred)
        stats = self.speeds.get(fid)
        own = expected_cost(stats, child.est_card, self.default_v)
        return self._finish(op, child.est_cost, own)

    def _expand(self, child: LogicalOp, from_var: str, to_var: str, edge: QEdge) -> LogicalOp:
        op = Expand(child, from_var, to_var, edge)
        op.est_card = estimate_cardinality(op, self.stats, self.model)
        own = child.est_card * COST_EXPAND_PER_INPUT_ROW + op.est_card * COST_EXPAND_PER_OUTPUT_ROW
        op.est_cost = child.est_cost + own
        return op

    def _label_filter(self, child: LogicalOp, var: str, label: str) -> LogicalOp:
        pred = Predicate(f"label:{var}:{label}", HasLabel(var, label), frozenset([var]), False, "inline")
        op = StructuredFilter(child, pred, False)
        return self._finish(op, child.est_cost, child.est_card * COST_FILTER_SCAN_PER_ROW)

    # -- entries ----------------------------------------------------------------

    def leaf_entry(self, var: str) -> PlanEntry:
        plan = self._scan(var)
        applied = set()
        labels = self.qg.qnodes[var].labels
        if labels:
            applied.add(f"label:{var}:{labels[0]}")
            for label in labels[1:]:
                plan = self._label_filter(plan, var, label)
                applied.add(f"label:{var}:{label}")
        return PlanEntry(plan, frozenset([var]), frozenset(applied), frozenset(), plan.est_cost, plan.est_card)

    def apply_selections(self, entry: PlanEntry) -> PlanEntry:
        """Attach every applicable structured obligation, cheapest ids first."""
        plan, applied = entry.plan, set(entry.applied)
        changed = True
        while changed:
            changed = False
            for oid in sorted(self.label_obligations - applied):
                _, var, label = oid.split(":", 2)
                if var in entry.covered:
                    plan = self._label_filter(plan, var, label)
                    applied.add(oid)
                    changed = True
            for pid in sorted(set(self.filtering_preds) - applied):
                pred = self.filtering_preds[pid]
                if not pred.unstructured and pred.vars <= entry.covered:
                    plan = self._structured_filter(plan, pred)
                    applied.add(pid)
                    changed = True
        if plan is entry.plan:
            return entry
        return PlanEntry(plan, entry.covered, frozenset(applied), entry.realized, plan.est_cost, plan.est_card)

    # -- candidate generation ------------------------------------------------------

    def can_join(self, a: PlanEntry, b: PlanEntry) -> Optional[tuple]:
        """Join key for two entries, or None. Empty tuple means cross product."""
        shared = a.covered & b.covered
        if shared:
            if a.covered <= b.covered or b.covered <= a.covered:
                return None
            return tuple(sorted(shared))
        comps_a = {self.component_of[v] for v in a.covered}
        comps_b = {self.component_of[v] for v in b.covered}
        if comps_a & comps_b:
            return None  # same component without a shared var: expand instead
        return ()

    def _join_entry(self, a: PlanEntry, b: PlanEntry, on_vars: tuple) -> PlanEntry:
        op = Join(a.plan, b.plan, on_vars)
        op.est_card = estimate_cardinality(op, self.stats, self.model)
        own = (a.est_card + b.est_card + op.est_card) * COST_JOIN_PER_ROW
        op.est_cost = a.est_cost + b.est_cost + own
        entry = PlanEntry(
            op,
            a.covered | b.covered,
            a.applied | b.applied,
            a.realized | b.realized,
            op.est_cost,
            op.est_card,
        )
        return entry

    def _expand_entry(self, entry: PlanEntry, edge: QEdge, from_var: str, to_var: str) -> PlanEntry:
        plan = self._expand(entry.plan, from_var, to_var, edge)
        return PlanEntry(
            plan,
            entry.covered | {to_var},
            entry.applied,
            entry.realized | {edge.id},
            plan.est_cost,
            plan.est_card,
        )

    def _expand_into_entry(self, entry: PlanEntry, edge: QEdge) -> PlanEntry:
        op = ExpandInto(entry.plan, edge)
        op = self._finish(op, entry.plan.est_cost, entry.est_card * COST_EXPAND_PER_INPUT_ROW)
        return PlanEntry(op, entry.covered, entry.applied, entry.realized | {edge.id}, op.est_cost, op.est_card)

    def _filter_entry(self, entry: PlanEntry, pred: Predicate) -> PlanEntry:
        if pred.unstructured:
            plan = self._unstructured_filter(entry.plan, pred)
        else:
            plan = self._structured_filter(entry.plan, pred)
        return PlanEntry(
            plan,
            entry.covered,
            entry.applied | {pred.id},
            entry.realized,
            plan.est_cost,
            plan.est_card,
        )

    def _ready_for_projection(self, entry: PlanEntry) -> bool:
        return (
            entry.covered == self.all_vars
            and entry.applied >= self.all_obligations
            and entry.realized >= self.all_edges
        )

    def _projection_entry(self, entry: PlanEntry) -> PlanEntry:
        plan = entry.plan
        # bind shortestPath results beneath the projection
        binds = {}
        for i, item in enumerate(self.qg.return_items):
            fn = _find_shortest_path(item.expr)
            if fn is not None and fn not in binds:
                bind_name = f"_sp{i}"
                op = ShortestPathOp(plan, fn, bind_name)
                op = self._finish(op, plan.est_cost, plan.est_card * COST_SHORTEST_PATH_PER_ROW)
                plan = op
                binds[fn] = bind_name
        op = Projection(plan, tuple(self.qg.return_items))
        own = plan.est_card * COST_PROJECTION_PER_ROW
        # non-filtering semantic work in RETURN is costed like a filter pass
        for pid in self.qg.detached:
            pred = self.qg.predicates[pid]
            if not pred.filtering:
                fid = filter_signature(pred.expr, self.default_sub_key) or f"pred:{pid}"
                own += expected_cost(self.speeds.get(fid), plan.est_card, self.default_v)
        op = self._finish(op, plan.est_cost, own)
        return PlanEntry(op, self.all_vars, entry.applied, entry.realized, op.est_cost, op.est_card)

    def _fragment_components(self, entries) -> set:
        """Components that already have a multi-variable entry growing."""
        out = set()
        for entry in entries:
            per_comp: dict[int, int] = {}
            for var in entry.covered:
                c = self.component_of[var]
                per_comp[c] = per_comp.get(c, 0) + 1
            out.update(c for c, count in per_comp.items() if count >= 2)
        return out

    def _may_expand(self, entry: PlanEntry, to_var: str, fragments: set) -> bool:
        """One growing fragment per component keeps the loop within n picks.

        A component's coverage grows from a single entry; other entries
        stay as seeds to be absorbed, so every merge pick shrinks the
        table and the greedy loop stays within the advertised bound.
        """
        comp = self.component_of[to_var]
        if comp not in fragments:
            return True
        return sum(1 for v in entry.covered if self.component_of[v] == comp) >= 2

    def greedy_ordering(self, table: PlanTable) -> list:
        """All candidate entries constructible from the current table."""
        cands: list[PlanEntry] = []
        entries = table.entries
        fragments = self._fragment_components(entries)
        for i, a in enumerate(entries):
            for b in entries[i + 1 :]:
                key = self.can_join(a, b)
                if key is not None:
                    cands.append(self._join_entry(a, b, key))
        for entry in entries:
            for edge in self.qg.qedges:
                if edge.id in entry.realized:
                    continue
                src_in = edge.src_var in entry.covered
                dst_in = edge.dst_var in entry.covered
                if src_in and dst_in:
                    cands.append(self._expand_into_entry(entry, edge))
                elif src_in and self._may_expand(entry, edge.dst_var, fragments):
                    cands.append(self._expand_entry(entry, edge, edge.src_var, edge.dst_var))
                elif dst_in and self._may_expand(entry, edge.src_var, fragments):
                    cands.append(self._expand_entry(entry, edge, edge.dst_var, edge.src_var))
            for pid in sorted(set(self.filtering_preds) - set(entry.applied)):
                pred = self.filtering_preds[pid]
                if pred.vars <= entry.covered:
                    cands.append(self._filter_entry(entry, pred))
            if self._ready_for_projection(entry):
                cands.append(self._projection_entry(entry))
        return cands

    @staticmethod
    def pick_best(cands: list) -> PlanEntry:
        return min(cands, key=lambda e: (e.est_cost, len(e.covered), e.fingerprint()))

    def optimize(self) -> LogicalOp:
        if not self.qg.qnodes:
            # queries without MATCH: a bare projection over one empty row
            op = Projection(_UnitRow(), tuple(self.qg.return_items))
            op.est_cost, op.est_card = COST_PROJECTION_PER_ROW, 1.0
            return op

        table = PlanTable()
        for var in self.qg.qnodes:
            table.insert(self.leaf_entry(var))

        max_picks = (
            len(self.all_vars) + len(self.all_edges) + len(self.all_obligations) + len(self.qg.detached) + 2
        )
        while True:
            if len(table) == 1:
                entry = table.entries[0]
                if isinstance(entry.plan, Projection):
                    return entry.plan
            cands = self.greedy_ordering(table)
            if not cands:
                raise Unsatisfiable("no candidates can complete the query graph")
            best = self.pick_best(cands)
            self.info.loop_picks += 1
            if isinstance(best.plan, (Join, Expand, ExpandInto)):
                self.info.merge_picks += 1
            if not isinstance(best.plan, Projection):
                best = self.apply_selections(best)
            table.insert(best)
            if self.info.loop_picks > max_picks:
                raise Unsatisfiable("greedy loop exceeded its pick budget")


@dataclass
class _UnitRow(LogicalOp):
    """Leaf producing a single empty row (for MATCH-less RETURN)."""

    def describe(self) -> str:
        return "UnitRow"


def optimize(
    qg: QueryGraph,
    stats: GraphStats,
    speed_stats=None,
    **kwargs,
) -> LogicalOp:
    """Greedy cost-based optimization; returns the plan tree."""
    return _Planner(qg, stats, speed_stats, **kwargs).optimize()


def optimize_detailed(qg: QueryGraph, stats: GraphStats, speed_stats=None, **kwargs) -> tuple:
    planner = _Planner(qg, stats, speed_stats, **kwargs)
    plan = planner.optimize()
    return plan, planner.info


def _find_shortest_path(expr) -> Optional[ShortestPathFn]:
    from .lang.syntax import And, Compare, Not, Or

    if isinstance(expr, ShortestPathFn):
        return expr
    if isinstance(expr, Compare):
        return _find_shortest_path(expr.lhs) or _find_shortest_path(expr.rhs)
    if isinstance(expr, (And, Or)):
        return _find_shortest_path(expr.lhs) or _find_shortest_path(expr.rhs)
    if isinstance(expr, Not):
        return _find_shortest_path(expr.operand)
    return None


# -- naive plan (the unoptimized baseline) -----------------------------------------


def naive_plan(
    qg: QueryGraph,
    stats: GraphStats,
    speed_stats=None,
    **kwargs,
) -> LogicalOp:
    """Filters-on-scans baseline: every predicate at its first opportunity.

    Each variable's scan eagerly applies all of its single-variable
    predicates (unstructured ones included, so they run over the whole
    scan), then the filtered scans are stitched together left-deep in
    declaration order. This is the plan shape an optimizer is judged
    against.
    """
    planner = _Planner(qg, stats, speed_stats, **kwargs)
    if not qg.qnodes:
        return planner.optimize()

    def attach_pending(entry: PlanEntry, unstructured_too: bool) -> PlanEntry:
        entry = planner.apply_selections(entry)
        plan, applied = entry.plan, set(entry.applied)
        if unstructured_too:
            for pid in sorted(set(planner.filtering_preds) - applied):
                pred = planner.filtering_preds[pid]
                if pred.unstructured and pred.vars <= entry.covered:
                    plan = planner._unstructured_filter(plan, pred)
                    applied.add(pid)
        if plan is entry.plan:
            return entry
        return PlanEntry(plan, entry.covered, frozenset(applied), entry.realized, plan.est_cost, plan.est_card)

    def eager_leaf(var: str) -> PlanEntry:
        return attach_pending(planner.leaf_entry(var), unstructured_too=True)

    pending = {var: eager_leaf(var) for var in qg.qnodes}
    first = next(iter(qg.qnodes))
    entry = pending.pop(first)
    remaining_edges = list(qg.qedges)
    while remaining_edges or pending:
        progressed = False
        for edge in list(remaining_edges):
            src_in = edge.src_var in entry.covered
            dst_in = edge.dst_var in entry.covered
            if src_in and dst_in:
                entry = planner._expand_into_entry(entry, edge)
            elif src_in or dst_in:
                from_var, to_var = (
                    (edge.src_var, edge.dst_var) if src_in else (edge.dst_var, edge.src_var)
                )
                entry = planner._expand_entry(entry, edge, from_var, to_var)
                if to_var in pending:
                    entry = planner._join_entry(entry, pending.pop(to_var), (to_var,))
            else:
                continue
            remaining_edges.remove(edge)
            entry = attach_pending(entry, unstructured_too=True)
            progressed = True
            break
        if progressed:
            continue
        if pending:
            var, other = next(iter(pending.items()))
            pending.pop(var)
            entry = attach_pending(planner._join_entry(entry, other, ()), unstructured_too=True)
            continue
        raise Unsatisfiable("naive plan cannot realize remaining edges")

    entry = attach_pending(entry, unstructured_too=True)
    return planner._projection_entry(entry).plan


# -- explain ------------------------------------------------------------------------


def explain(plan: LogicalOp) -> str:
    """Indented operator tree with per-node cumulative cost and row estimate."""
    lines: list[str] = []

    def walk(op: LogicalOp, depth: int):
        lines.append("  " * depth + f"{op.describe()} (cost={op.est_cost:.4g}, card={op.est_card:.4g})")
        for child in op.children():
            walk(child, depth + 1)

    walk(plan, 0)
    return "\n".join(lines)
