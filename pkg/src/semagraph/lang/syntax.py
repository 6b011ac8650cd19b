"""AST node types and the canonical pretty-printer.

``unparse`` emits text that parses back to a structurally equal tree
(the round-trip property the parser tests pin down).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..graph import Value, ValueKind

COMPARISON_SYMBOLS = ("::", "~:", "!:", "<:", ">:", "=", "<", ">", "<=", ">=", "<>")
SEMANTIC_SYMBOLS = ("::", "~:", "!:", "<:", ">:")
LITERAL_FNS = ("fromURL", "fromFile", "fromBytes")


class Expr:
    pass


@dataclass(frozen=True)
class Literal(Expr):
    value: Value


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class PropAccess(Expr):
    var: str
    key: str


@dataclass(frozen=True)
class SubProp(Expr):
    """``base -> sub_key``: semantic extraction from a blob-typed value."""

    base: Expr
    sub_key: str


@dataclass(frozen=True)
class LiteralFn(Expr):
    """``Blob.fromURL/fromFile/fromBytes`` source constructors."""

    fn: str
    arg: Expr


@dataclass(frozen=True)
class Compare(Expr):
    symbol: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class And(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Or(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@dataclass(frozen=True)
class ShortestPathFn(Expr):
    src_var: str
    dst_var: str
    min_hops: int = 1
    max_hops: int = 1


@dataclass(frozen=True)
class HasLabel(Expr):
    """Synthesized label check; never produced by the parser."""

    var: str
    label: str


@dataclass(frozen=True)
class NodePat:
    var: Optional[str]
    labels: tuple = ()
    props: tuple = ()  # of (key, Expr) pairs, source order


@dataclass(frozen=True)
class RelPat:
    var: Optional[str] = None
    rel_type: Optional[str] = None
    direction: str = "out"  # out | in | both
    min_hops: int = 1
    max_hops: int = 1
    props: tuple = ()


@dataclass(frozen=True)
class PathPattern:
    nodes: tuple
    rels: tuple = ()
    path_var: Optional[str] = None


@dataclass(frozen=True)
class ReturnItem:
    expr: Expr
    alias: Optional[str] = None


@dataclass(frozen=True)
class SetItem:
    var: str
    key: str
    expr: Expr


@dataclass(frozen=True)
class Ast:
    matches: tuple = ()
    where: Optional[Expr] = None
    creates: tuple = ()
    sets: tuple = ()
    deletes: tuple = ()
    returns: tuple = ()
    explain: bool = False

    @property
    def is_write(self) -> bool:
        return bool(self.creates or self.sets or self.deletes)


# -- pretty printer -----------------------------------------------------------


def _quote(s: str) -> str:
    return "'" + s.replace("\\", "\\\\").replace("'", "\\'") + "'"


def unparse_expr(e: Expr, parent_prec: int = 0) -> str:
    # precedence: OR=1, AND=2, NOT=3, comparison=4, postfix=5
    if isinstance(e, Literal):
        v = e.value
        if v.kind is ValueKind.TEXT:
            return _quote(v.data)
        if v.kind is ValueKind.BOOL:
            return "true" if v.data else "false"
        if v.kind is ValueKind.FLOAT:
            text = repr(v.data)
            return text if any(c in text for c in ".eE") else text + ".0"
        return str(v.data)
    if isinstance(e, Param):
        return f"${e.name}"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, PropAccess):
        return f"{e.var}.{e.key}"
    if isinstance(e, SubProp):
        return f"{unparse_expr(e.base, 5)}->{e.sub_key}"
    if isinstance(e, LiteralFn):
        return f"Blob.{e.fn}({unparse_expr(e.arg)})"
    if isinstance(e, ShortestPathFn):
        hops = f"*{e.min_hops}..{e.max_hops}"
        return f"shortestPath(({e.src_var})-[{hops}]-({e.dst_var}))"
    if isinstance(e, HasLabel):
        return f"{e.var}:{e.label}"
    if isinstance(e, Compare):
        text = f"{unparse_expr(e.lhs, 4)} {e.symbol} {unparse_expr(e.rhs, 4)}"
        return f"({text})" if parent_prec > 4 else text
    if isinstance(e, Not):
        text = f"NOT {unparse_expr(e.operand, 3)}"
        return f"({text})" if parent_prec > 3 else text
    if isinstance(e, And):
        text = f"{unparse_expr(e.lhs, 2)} AND {unparse_expr(e.rhs, 2)}"
        return f"({text})" if parent_prec > 2 else text
    if isinstance(e, Or):
        text = f"{unparse_expr(e.lhs, 1)} OR {unparse_expr(e.rhs, 1)}"
        return f"({text})" if parent_prec > 1 else text
    raise TypeError(f"cannot unparse {type(e).__name__}")


def _unparse_props(props: tuple) -> str:
    if not props:
        return ""
    inner = ", ".join(f"{k}: {unparse_expr(v)}" for k, v in props)
    return "{" + inner + "}"


def _unparse_node(n: NodePat) -> str:
    parts = n.var or ""
    for l in n.labels:
        parts += f":{l}"
    props = _unparse_props(n.props)
    if props:
        parts += (" " if parts else "") + props
    return f"({parts})"


def _unparse_rel(r: RelPat) -> str:
    body = r.var or ""
    if r.rel_type:
        body += f":{r.rel_type}"
    if (r.min_hops, r.max_hops) != (1, 1):
        body += f"*{r.min_hops}..{r.max_hops}"
    props = _unparse_props(r.props)
    if props:
        body += props
    inner = f"[{body}]" if body else "[]"
    if r.direction == "out":
        return f"-{inner}->"
    if r.direction == "in":
        return f"<-{inner}-"
    return f"-{inner}-"


def unparse_pattern(p: PathPattern) -> str:
    parts = []
    if p.path_var:
        parts.append(f"{p.path_var} = ")
    parts.append(_unparse_node(p.nodes[0]))
    for rel, node in zip(p.rels, p.nodes[1:]):
        parts.append(_unparse_rel(rel))
        parts.append(_unparse_node(node))
    return "".join(parts)


def unparse(ast: Ast) -> str:
    chunks = []
    if ast.explain:
        chunks.append("EXPLAIN")
    if ast.matches:
        chunks.append("MATCH " + ", ".join(unparse_pattern(p) for p in ast.matches))
    if ast.where is not None:
        chunks.append("WHERE " + unparse_expr(ast.where))
    if ast.sets:
        chunks.append("SET " + ", ".join(f"{s.var}.{s.key} = {unparse_expr(s.expr)}" for s in ast.sets))
    if ast.deletes:
        chunks.append("DELETE " + ", ".join(ast.deletes))
    for c in ast.creates:
        chunks.append("CREATE " + unparse_pattern(c))
    if ast.returns:
        items = []
        for item in ast.returns:
            text = unparse_expr(item.expr)
            if item.alias:
                text += f" AS {item.alias}"
            items.append(text)
        chunks.append("RETURN " + ", ".join(items))
    return "\n".join(chunks) + ";"
