"""Recursive-descent parser.

Grammar (clauses appear in this order, each optional unless noted):

    query   := EXPLAIN? (MATCH pattern (',' pattern)*)* (WHERE expr)?
               (SET setitem (',' setitem)*)? (DELETE ident (',' ident)*)?
               (CREATE pattern)* (RETURN item (',' item)*)? ';'?
    pattern := (ident '=')? node (rel node)*
    node    := '(' ident? (':' ident)* props? ')'
    rel     := '-' '[' relbody ']' ('->' | '-')  |  '<' '-' '[' relbody ']' '-'

Operator precedence, loosest first: OR, AND, NOT, comparisons; the
sub-property arrow and property dot are postfix and bind tightest.
Variable-length hops (``*1..3``) are accepted only inside
``shortestPath``.
"""

from __future__ import annotations

from ..errors import ParseError
from ..graph import Value
from .syntax import (
    And,
    Ast,
    Compare,
    Expr,
    Literal,
    LiteralFn,
    LITERAL_FNS,
    NodePat,
    Not,
    Or,
    Param,
    PathPattern,
    PropAccess,
    RelPat,
    ReturnItem,
    SetItem,
    ShortestPathFn,
    SubProp,
    Var,
)
from .tokens import Token, TokenKind, tokenize

_COMPARE_TOKENS = {
    TokenKind.EQ: "=",
    TokenKind.LT: "<",
    TokenKind.GT: ">",
    TokenKind.LE: "<=",
    TokenKind.GE: ">=",
    TokenKind.NE: "<>",
    TokenKind.SIM_SCORE: "::",
    TokenKind.SIM: "~:",
    TokenKind.NOT_SIM: "!:",
    TokenKind.CONTAINED_IN: "<:",
    TokenKind.CONTAINS: ">:",
}


class _Parser:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind is not TokenKind.EOF:
            self.pos += 1
        return tok

    def at(self, kind: TokenKind) -> bool:
        return self.peek().kind is kind

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind is TokenKind.KEYWORD and tok.value == word

    def accept(self, kind: TokenKind) -> bool:
        if self.at(kind):
            self.next()
            return True
        return False

    def accept_keyword(self, word: str) -> bool:
        if self.at_keyword(word):
            self.next()
            return True
        return False

    def expect(self, kind: TokenKind, what: str = "") -> Token:
        tok = self.peek()
        if tok.kind is not kind:
            expected = what or kind.value
            raise ParseError(f"expected {expected}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.next()

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError(f"{message}, found {tok.text or 'end of input'!r}", tok.line, tok.col)

    # -- grammar ------------------------------------------------------------

    def parse_query(self) -> Ast:
        explain = self.accept_keyword("EXPLAIN")
        matches: list[PathPattern] = []
        while self.accept_keyword("MATCH"):
            matches.append(self.parse_pattern())
            while self.accept(TokenKind.COMMA):
                matches.append(self.parse_pattern())
        where = None
        if self.accept_keyword("WHERE"):
            where = self.parse_expr()
        sets: list[SetItem] = []
        if self.accept_keyword("SET"):
            sets.append(self.parse_set_item())
            while self.accept(TokenKind.COMMA):
                sets.append(self.parse_set_item())
        deletes: list[str] = []
        if self.accept_keyword("DELETE"):
            deletes.append(self.expect(TokenKind.IDENT, "variable").value)
            while self.accept(TokenKind.COMMA):
                deletes.append(self.expect(TokenKind.IDENT, "variable").value)
        creates: list[PathPattern] = []
        while self.accept_keyword("CREATE"):
            creates.append(self.parse_pattern())
        returns: list[ReturnItem] = []
        if self.accept_keyword("RETURN"):
            returns.append(self.parse_return_item())
            while self.accept(TokenKind.COMMA):
                returns.append(self.parse_return_item())
        self.accept(TokenKind.SEMI)
        if not self.at(TokenKind.EOF):
            self.fail("expected end of query")
        if not (matches or creates or returns or sets or deletes):
            self.fail("empty query")
        return Ast(
            matches=tuple(matches),
            where=where,
            creates=tuple(creates),
            sets=tuple(sets),
            deletes=tuple(deletes),
            returns=tuple(returns),
            explain=explain,
        )

    def parse_set_item(self) -> SetItem:
        var = self.expect(TokenKind.IDENT, "variable").value
        self.expect(TokenKind.DOT)
        key = self.expect(TokenKind.IDENT, "property key").value
        self.expect(TokenKind.EQ)
        return SetItem(var, key, self.parse_expr())

    def parse_return_item(self) -> ReturnItem:
        expr = self.parse_expr()
        alias = None
        if self.accept_keyword("AS"):
            alias = self.expect(TokenKind.IDENT, "alias").value
        return ReturnItem(expr, alias)

    # -- patterns -------------------------------------------------------------

    def parse_pattern(self, allow_hops: bool = False) -> PathPattern:
        path_var = None
        if self.at(TokenKind.IDENT) and self.peek(1).kind is TokenKind.EQ:
            path_var = self.next().value
            self.next()
        nodes = [self.parse_node_pattern()]
        rels: list[RelPat] = []
        while self.at(TokenKind.MINUS) or self.at(TokenKind.LT):
            rels.append(self.parse_rel_pattern(allow_hops))
            nodes.append(self.parse_node_pattern())
        return PathPattern(nodes=tuple(nodes), rels=tuple(rels), path_var=path_var)

    def parse_node_pattern(self) -> NodePat:
        self.expect(TokenKind.LPAREN)
        var = self.next().value if self.at(TokenKind.IDENT) else None
        labels = []
        while self.accept(TokenKind.COLON):
            labels.append(self.expect(TokenKind.IDENT, "label").value)
        props = self.parse_props() if self.at(TokenKind.LBRACE) else ()
        self.expect(TokenKind.RPAREN)
        return NodePat(var=var, labels=tuple(labels), props=props)

    def parse_rel_pattern(self, allow_hops: bool) -> RelPat:
        if self.accept(TokenKind.LT):
            self.expect(TokenKind.MINUS)
            body = self.parse_rel_body(allow_hops)
            self.expect(TokenKind.MINUS)
            return RelPat(
                var=body.var,
                rel_type=body.rel_type,
                direction="in",
                min_hops=body.min_hops,
                max_hops=body.max_hops,
                props=body.props,
            )
        self.expect(TokenKind.MINUS)
        body = self.parse_rel_body(allow_hops)
        if self.accept(TokenKind.ARROW):
            return body
        self.expect(TokenKind.MINUS)
        return RelPat(
            var=body.var,
            rel_type=body.rel_type,
            direction="both",
            min_hops=body.min_hops,
            max_hops=body.max_hops,
            props=body.props,
        )

    def parse_rel_body(self, allow_hops: bool) -> RelPat:
        self.expect(TokenKind.LBRACKET)
        var = self.next().value if self.at(TokenKind.IDENT) else None
        rel_type = None
        if self.accept(TokenKind.COLON):
            rel_type = self.expect(TokenKind.IDENT, "relationship type").value
        min_hops, max_hops = 1, 1
        if self.at(TokenKind.STAR):
            star = self.next()
            if not allow_hops:
                raise ParseError(
                    "variable-length patterns are only allowed inside shortestPath", star.line, star.col
                )
            min_hops = int(self.expect(TokenKind.INT, "hop count").value)
            self.expect(TokenKind.DOTDOT)
            max_hops = int(self.expect(TokenKind.INT, "hop count").value)
            if min_hops < 1 or max_hops < min_hops:
                raise ParseError("hop range must satisfy 1 <= min <= max", star.line, star.col)
        props = self.parse_props() if self.at(TokenKind.LBRACE) else ()
        self.expect(TokenKind.RBRACKET)
        return RelPat(var=var, rel_type=rel_type, direction="out", min_hops=min_hops, max_hops=max_hops, props=props)

    def parse_props(self) -> tuple:
        self.expect(TokenKind.LBRACE)
        pairs = []
        if not self.at(TokenKind.RBRACE):
            while True:
                key = self.expect(TokenKind.IDENT, "property key").value
                self.expect(TokenKind.COLON)
                pairs.append((key, self.parse_expr()))
                if not self.accept(TokenKind.COMMA):
                    break
        self.expect(TokenKind.RBRACE)
        return tuple(pairs)

    # -- expressions ------------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        lhs = self.parse_and()
        while self.accept_keyword("OR"):
            lhs = Or(lhs, self.parse_and())
        return lhs

    def parse_and(self) -> Expr:
        lhs = self.parse_not()
        while self.accept_keyword("AND"):
            lhs = And(lhs, self.parse_not())
        return lhs

    def parse_not(self) -> Expr:
        if self.accept_keyword("NOT"):
            return Not(self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        lhs = self.parse_postfix()
        symbol = _COMPARE_TOKENS.get(self.peek().kind)
        if symbol is not None:
            self.next()
            rhs = self.parse_postfix()
            return Compare(symbol, lhs, rhs)
        return lhs

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while True:
            if self.at(TokenKind.DOT):
                dot = self.next()
                key = self.expect(TokenKind.IDENT, "property key").value
                if isinstance(expr, Var):
                    if key in LITERAL_FNS and self.at(TokenKind.LPAREN) and expr.name.lower() == "blob":
                        self.next()
                        arg = self.parse_expr()
                        self.expect(TokenKind.RPAREN)
                        expr = LiteralFn(key, arg)
                    else:
                        expr = PropAccess(expr.name, key)
                else:
                    raise ParseError(f"'.' can only follow a variable", dot.line, dot.col)
                continue
            if self.at(TokenKind.ARROW):
                self.next()
                sub_key = self.expect(TokenKind.IDENT, "sub-property key").value
                expr = SubProp(expr, sub_key)
                continue
            return expr

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind is TokenKind.INT:
            self.next()
            return Literal(Value.integer(tok.value))
        if tok.kind is TokenKind.FLOAT:
            self.next()
            return Literal(Value.real(tok.value))
        if tok.kind is TokenKind.STRING:
            self.next()
            return Literal(Value.text(tok.value))
        if tok.kind is TokenKind.MINUS:
            self.next()
            num = self.peek()
            if num.kind is TokenKind.INT:
                self.next()
                return Literal(Value.integer(-num.value))
            if num.kind is TokenKind.FLOAT:
                self.next()
                return Literal(Value.real(-num.value))
            self.fail("expected a number after '-'")
        if tok.kind is TokenKind.KEYWORD and tok.value in ("TRUE", "FALSE"):
            self.next()
            return Literal(Value.boolean(tok.value == "TRUE"))
        if tok.kind is TokenKind.PARAM:
            self.next()
            return Param(tok.value)
        if tok.kind is TokenKind.IDENT:
            if tok.value.lower() == "shortestpath" and self.peek(1).kind is TokenKind.LPAREN:
                return self.parse_shortest_path()
            self.next()
            return Var(tok.value)
        if tok.kind is TokenKind.LPAREN:
            self.next()
            inner = self.parse_expr()
            self.expect(TokenKind.RPAREN)
            return inner
        self.fail("expected an expression")

    def parse_shortest_path(self) -> Expr:
        self.next()  # shortestPath
        self.expect(TokenKind.LPAREN)
        pattern = self.parse_pattern(allow_hops=True)
        self.expect(TokenKind.RPAREN)
        if len(pattern.nodes) != 2 or len(pattern.rels) != 1:
            self.fail("shortestPath takes a single two-node pattern")
        a, b = pattern.nodes
        rel = pattern.rels[0]
        if a.var is None or b.var is None:
            self.fail("shortestPath endpoints must be bound variables")
        return ShortestPathFn(a.var, b.var, rel.min_hops, rel.max_hops)


def parse(tokens: list) -> Ast:
    """Parse a token stream into an AST."""
    return _Parser(tokens).parse_query()


def parse_text(text: str) -> Ast:
    """Tokenize and parse query text."""
    return parse(tokenize(text))
