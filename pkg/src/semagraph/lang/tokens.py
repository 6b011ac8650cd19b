"""Tokenizer for the query language.

Keywords are case-insensitive. Multi-character symbols (``->``, ``::``,
``~:``, ``!:``, ``<:``, ``>:``, ``<=``, ``>=``, ``<>``, ``..``) lex with
maximal munch. A lone colon is only a token when it is attached to the
thing it labels (no whitespace before it), which is what separates
``a <:b`` (containment) from the ill-formed ``a < :b``.

``--`` starts a line comment; the grammar has no arithmetic, so a double
dash can never be two minus tokens.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import LexError

KEYWORDS = {
    "MATCH",
    "WHERE",
    "RETURN",
    "CREATE",
    "SET",
    "DELETE",
    "AND",
    "OR",
    "NOT",
    "AS",
    "TRUE",
    "FALSE",
    "NULL",
    "EXPLAIN",
}


class TokenKind(Enum):
    IDENT = "ident"
    KEYWORD = "keyword"
    INT = "int"
    FLOAT = "float"
    STRING = "string"
    PARAM = "param"
    LPAREN = "("
    RPAREN = ")"
    LBRACKET = "["
    RBRACKET = "]"
    LBRACE = "{"
    RBRACE = "}"
    COMMA = ","
    DOT = "."
    DOTDOT = ".."
    COLON = ":"
    SEMI = ";"
    STAR = "*"
    MINUS = "-"
    ARROW = "->"
    EQ = "="
    LT = "<"
    GT = ">"
    LE = "<="
    GE = ">="
    NE = "<>"
    SIM_SCORE = "::"
    SIM = "~:"
    NOT_SIM = "!:"
    CONTAINED_IN = "<:"
    CONTAINS = ">:"
    EOF = "eof"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int
    col: int
    value: object = None

    def __repr__(self) -> str:
        return f"Token({self.kind.name}, {self.text!r}, {self.line}:{self.col})"


_SINGLE = {
    "(": TokenKind.LPAREN,
    ")": TokenKind.RPAREN,
    "[": TokenKind.LBRACKET,
    "]": TokenKind.RBRACKET,
    "{": TokenKind.LBRACE,
    "}": TokenKind.RBRACE,
    ",": TokenKind.COMMA,
    ";": TokenKind.SEMI,
    "*": TokenKind.STAR,
    "=": TokenKind.EQ,
}

_ESCAPES = {"'": "'", "\\": "\\", "n": "\n", "t": "\t"}


def tokenize(text: str) -> list:
    """Lex the query text into a token list ending with EOF."""
    tokens: list[Token] = []
    i = 0
    line, col = 1, 1

    def err(message: str):
        raise LexError(message, line, col)

    def emit(kind: TokenKind, raw: str, value=None):
        tokens.append(Token(kind, raw, line, col, value))

    n = len(text)
    while i < n:
        ch = text[i]

        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == "-":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
            continue

        start_col = col

        def emit_at(kind: TokenKind, raw: str, value=None):
            tokens.append(Token(kind, raw, line, start_col, value))

        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in KEYWORDS:
                emit_at(TokenKind.KEYWORD, word, upper)
            else:
                emit_at(TokenKind.IDENT, word, word)
            col += j - i
            i = j
            continue

        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_float = False
            # a digit must follow the dot, otherwise this is the '..' of a range
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            raw = text[i:j]
            if is_float:
                emit_at(TokenKind.FLOAT, raw, float(raw))
            else:
                emit_at(TokenKind.INT, raw, int(raw))
            col += j - i
            i = j
            continue

        if ch == "'":
            j = i + 1
            out = []
            while True:
                if j >= n:
                    err("unterminated string literal")
                c = text[j]
                if c == "\\":
                    if j + 1 >= n or text[j + 1] not in _ESCAPES:
                        err("bad string escape")
                    out.append(_ESCAPES[text[j + 1]])
                    j += 2
                    continue
                if c == "'":
                    break
                if c == "\n":
                    err("unterminated string literal")
                out.append(c)
                j += 1
            raw = text[i : j + 1]
            emit_at(TokenKind.STRING, raw, "".join(out))
            col += j + 1 - i
            i = j + 1
            continue

        if ch == "$":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                err("'$' must be followed by a parameter name")
            emit_at(TokenKind.PARAM, text[i:j], text[i + 1 : j])
            col += j - i
            i = j
            continue

        nxt = text[i + 1] if i + 1 < n else ""
        two = ch + nxt
        if two == "->":
            emit_at(TokenKind.ARROW, two)
        elif two == "::":
            emit_at(TokenKind.SIM_SCORE, two)
        elif two == "~:":
            emit_at(TokenKind.SIM, two)
        elif two == "!:":
            emit_at(TokenKind.NOT_SIM, two)
        elif two == "<:":
            emit_at(TokenKind.CONTAINED_IN, two)
        elif two == ">:":
            emit_at(TokenKind.CONTAINS, two)
        elif two == "<=":
            emit_at(TokenKind.LE, two)
        elif two == ">=":
            emit_at(TokenKind.GE, two)
        elif two == "<>":
            emit_at(TokenKind.NE, two)
        elif two == "..":
            emit_at(TokenKind.DOTDOT, two)
        else:
            if ch == "<":
                emit_at(TokenKind.LT, ch)
            elif ch == ">":
                emit_at(TokenKind.GT, ch)
            elif ch == "-":
                emit_at(TokenKind.MINUS, ch)
            elif ch == ".":
                emit_at(TokenKind.DOT, ch)
            elif ch == ":":
                # a label/key colon must be attached to what it annotates
                if i == 0 or text[i - 1] in " \t\r\n":
                    err("bare ':' (did you mean '::', '<:' or '>:'?)")
                emit_at(TokenKind.COLON, ch)
            elif ch == "~" or ch == "!":
                err(f"bare {ch!r} (did you mean '{ch}:'?)")
            elif ch in _SINGLE:
                emit_at(_SINGLE[ch], ch)
            else:
                err(f"unexpected character {ch!r}")
            i += 1
            col += 1
            continue

        i += 2
        col += 2

    tokens.append(Token(TokenKind.EOF, "", line, col))
    return tokens
