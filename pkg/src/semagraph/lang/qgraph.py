"""Query graph: the optimizer's view of a parsed query.

One q-node per distinct pattern variable, one q-edge per relationship
pattern. The WHERE tree is split at top-level ANDs; each conjunct is
attached to its variable's q-node when it mentions exactly one variable
and kept detached otherwise. Inline property maps in MATCH patterns
become attached equality predicates. RETURN expressions are scanned for
cross-variable semantic comparisons, which join the detached list as
non-filtering entries: they cost extraction work and the planner has to
schedule them, but they never drop rows.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from ..errors import UnboundVariable
from .syntax import (
    And,
    Ast,
    Compare,
    Expr,
    HasLabel,
    Literal,
    LiteralFn,
    Not,
    Or,
    Param,
    PropAccess,
    SEMANTIC_SYMBOLS,
    ShortestPathFn,
    SubProp,
    Var,
)


@dataclass(frozen=True)
class QNode:
    var: str
    labels: tuple = ()
    anonymous: bool = False


@dataclass(frozen=True)
class QEdge:
    id: int
    src_var: str
    dst_var: str
    rel_type: Optional[str]
    direction: str  # out | in | both (relative to src_var)
    var: Optional[str] = None


@dataclass(frozen=True)
class Predicate:
    id: str
    expr: Expr
    vars: frozenset
    unstructured: bool
    source: str  # where | inline | return
    prop_key: Optional[str] = None  # set for single-var structured equality/range

    @property
    def filtering(self) -> bool:
        return self.source != "return"


@dataclass
class QueryGraph:
    qnodes: dict = field(default_factory=dict)  # var -> QNode
    qedges: list = field(default_factory=list)
    predicates: dict = field(default_factory=dict)  # pid -> Predicate
    attached: dict = field(default_factory=dict)  # var -> [pid]
    detached: list = field(default_factory=list)  # [pid]
    return_items: tuple = ()
    paths: tuple = ()  # (path_var, node_vars, edge_keys) per MATCH pattern

    def node_vars(self) -> list:
        return list(self.qnodes)

    def components(self) -> list:
        """Connected components of the q-node set, sorted for determinism."""
        parent = {v: v for v in self.qnodes}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.qedges:
            ra, rb = find(e.src_var), find(e.dst_var)
            if ra != rb:
                parent[ra] = rb
        groups: dict[str, list] = {}
        for v in self.qnodes:
            groups.setdefault(find(v), []).append(v)
        return sorted(sorted(g) for g in groups.values())

    def component_of(self) -> dict:
        comp = {}
        for i, group in enumerate(self.components()):
            for v in group:
                comp[v] = i
        return comp


# -- expression analysis -------------------------------------------------------


def expr_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, PropAccess):
        return frozenset([e.var])
    if isinstance(e, HasLabel):
        return frozenset([e.var])
    if isinstance(e, SubProp):
        return expr_vars(e.base)
    if isinstance(e, LiteralFn):
        return expr_vars(e.arg)
    if isinstance(e, Compare):
        return expr_vars(e.lhs) | expr_vars(e.rhs)
    if isinstance(e, (And, Or)):
        return expr_vars(e.lhs) | expr_vars(e.rhs)
    if isinstance(e, Not):
        return expr_vars(e.operand)
    if isinstance(e, ShortestPathFn):
        return frozenset([e.src_var, e.dst_var])
    return frozenset()


def is_unstructured(e: Expr) -> bool:
    """True when evaluating the expression may touch blob contents."""
    if isinstance(e, (SubProp, LiteralFn)):
        return True
    if isinstance(e, Compare):
        return e.symbol in SEMANTIC_SYMBOLS or is_unstructured(e.lhs) or is_unstructured(e.rhs)
    if isinstance(e, (And, Or)):
        return is_unstructured(e.lhs) or is_unstructured(e.rhs)
    if isinstance(e, Not):
        return is_unstructured(e.operand)
    return False


def split_conjuncts(e: Expr) -> list:
    if isinstance(e, And):
        return split_conjuncts(e.lhs) + split_conjuncts(e.rhs)
    return [e]


def _side_key(e: Expr, default_sub_key: Optional[str]) -> Optional[str]:
    if isinstance(e, SubProp):
        return e.sub_key
    if isinstance(e, PropAccess):
        return default_sub_key or e.key
    if isinstance(e, LiteralFn):
        return default_sub_key
    return None


def filter_signature(e: Expr, default_sub_key: Optional[str] = None) -> Optional[str]:
    """Identity of an unstructured filter: its sub-property keys + symbol.

    Speed statistics are recorded under this signature, so the same
    semantic filter shares one speed estimate across queries regardless
    of variable naming.
    """
    comparisons = []

    def walk(node: Expr):
        if isinstance(node, Compare):
            keys = set()
            for side in (node.lhs, node.rhs):
                k = _side_key(side, default_sub_key)
                if k:
                    keys.add(k)
            if node.symbol in SEMANTIC_SYMBOLS or any(
                isinstance(s, SubProp) for s in (node.lhs, node.rhs)
            ):
                comparisons.append("+".join(sorted(keys)) + node.symbol)
            return
        if isinstance(node, (And, Or)):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, Not):
            walk(node.operand)

    walk(e)
    if not comparisons:
        return None
    return "&".join(sorted(comparisons))


def _structured_prop_key(e: Expr) -> Optional[str]:
    """Property key probed by a single-variable structured comparison."""
    if isinstance(e, Compare) and e.symbol in ("=", "<", ">", "<=", ">="):
        if isinstance(e.lhs, PropAccess) and isinstance(e.rhs, (Literal, Param)):
            return e.lhs.key
        if isinstance(e.rhs, PropAccess) and isinstance(e.lhs, (Literal, Param)):
            return e.rhs.key
    return None


# -- binding checks ------------------------------------------------------------


def check_bound_variables(ast: Ast) -> set:
    """Verify every referenced variable is bound; returns the bound set."""
    bound: set = set()
    for pattern in ast.matches:
        for node in pattern.nodes:
            if node.var:
                bound.add(node.var)
        for rel in pattern.rels:
            if rel.var:
                bound.add(rel.var)
        if pattern.path_var:
            bound.add(pattern.path_var)
    for pattern in ast.creates:
        for node in pattern.nodes:
            if node.var:
                bound.add(node.var)

    def check_expr(e: Expr):
        for v in expr_vars(e):
            if v not in bound:
                raise UnboundVariable(v)

    for pattern in itertools.chain(ast.matches, ast.creates):
        for node in pattern.nodes:
            for _, v in node.props:
                check_expr(v)
    if ast.where is not None:
        check_expr(ast.where)
    for item in ast.returns:
        check_expr(item.expr)
    for s in ast.sets:
        if s.var not in bound:
            raise UnboundVariable(s.var)
        check_expr(s.expr)
    for v in ast.deletes:
        if v not in bound:
            raise UnboundVariable(v)
    return bound


# -- construction ---------------------------------------------------------------


def to_query_graph(ast: Ast) -> QueryGraph:
    """Build the query graph for the MATCH/WHERE/RETURN part of a query."""
    check_bound_variables(ast)
    qg = QueryGraph(return_items=ast.returns)
    anon_nodes = itertools.count()
    edge_ids = itertools.count()
    pred_ids = itertools.count()
    paths = []

    def fresh_pid() -> str:
        return f"p{next(pred_ids)}"

    def add_node(pat) -> str:
        var = pat.var or f"_n{next(anon_nodes)}"
        existing = qg.qnodes.get(var)
        if existing is None:
            qg.qnodes[var] = QNode(var, tuple(pat.labels), anonymous=pat.var is None)
            qg.attached.setdefault(var, [])
        elif pat.labels:
            merged = tuple(dict.fromkeys(existing.labels + tuple(pat.labels)))
            qg.qnodes[var] = QNode(var, merged, existing.anonymous)
        for key, value_expr in pat.props:
            pid = fresh_pid()
            expr = Compare("=", PropAccess(var, key), value_expr)
            qg.predicates[pid] = Predicate(
                pid, expr, frozenset([var]), is_unstructured(expr), "inline", prop_key=key
            )
            qg.attached[var].append(pid)
        return var

    for pattern in ast.matches:
        node_vars = [add_node(n) for n in pattern.nodes]
        edge_keys = []
        for i, rel in enumerate(pattern.rels):
            eid = next(edge_ids)
            qg.qedges.append(
                QEdge(eid, node_vars[i], node_vars[i + 1], rel.rel_type, rel.direction, rel.var)
            )
            edge_keys.append((eid, rel.var))
        paths.append((pattern.path_var, tuple(node_vars), tuple(edge_keys)))
    qg.paths = tuple(paths)

    if ast.where is not None:
        for conjunct in split_conjuncts(ast.where):
            pid = fresh_pid()
            vars_ = expr_vars(conjunct)
            pred = Predicate(
                pid,
                conjunct,
                vars_,
                is_unstructured(conjunct),
                "where",
                prop_key=_structured_prop_key(conjunct) if len(vars_) == 1 else None,
            )
            qg.predicates[pid] = pred
            if len(vars_) == 1:
                qg.attached[next(iter(vars_))].append(pid)
            else:
                qg.detached.append(pid)

    # cross-variable semantic comparisons in RETURN are planning obligations
    for item in ast.returns:
        for comparison in _return_comparisons(item.expr):
            vars_ = expr_vars(comparison)
            if len(vars_) >= 2 and is_unstructured(comparison):
                pid = fresh_pid()
                qg.predicates[pid] = Predicate(pid, comparison, vars_, True, "return")
                qg.detached.append(pid)

    return qg


def _return_comparisons(e: Expr) -> list:
    if isinstance(e, Compare):
        return [e]
    if isinstance(e, (And, Or)):
        return _return_comparisons(e.lhs) + _return_comparisons(e.rhs)
    if isinstance(e, Not):
        return _return_comparisons(e.operand)
    return []
