"""Query language front end: tokenizer, parser, query graph builder."""

from .tokens import Token, TokenKind, tokenize
from .syntax import (
    Ast,
    Compare,
    And,
    Or,
    Not,
    HasLabel,
    Literal,
    LiteralFn,
    NodePat,
    Param,
    PathPattern,
    PropAccess,
    RelPat,
    ReturnItem,
    SetItem,
    ShortestPathFn,
    SubProp,
    Var,
    unparse,
    unparse_expr,
)
from .parser import parse, parse_text
from .qgraph import Predicate, QEdge, QNode, QueryGraph, check_bound_variables, filter_signature, to_query_graph

__all__ = [
    "Token",
    "TokenKind",
    "tokenize",
    "Ast",
    "Compare",
    "And",
    "Or",
    "Not",
    "HasLabel",
    "Literal",
    "LiteralFn",
    "NodePat",
    "Param",
    "PathPattern",
    "PropAccess",
    "RelPat",
    "ReturnItem",
    "SetItem",
    "ShortestPathFn",
    "SubProp",
    "Var",
    "unparse",
    "unparse_expr",
    "parse",
    "parse_text",
    "Predicate",
    "QEdge",
    "QNode",
    "QueryGraph",
    "check_bound_variables",
    "filter_signature",
    "to_query_graph",
]
