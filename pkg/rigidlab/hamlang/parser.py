"""
Recursive-descent parser for the Hamiltonian expression language.

    expr   := term (("+"|"-") term)* ;
    term   := factor (("*"|"/") factor)* ;
    factor := base ("^" integer)? ;
    base   := number | var | func "(" expr ("," expr)* ")" | "(" expr ")" | "-" base ;
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from rigidlab.errors import ParseError
from rigidlab.hamlang.models import (
    FUNCTION_ARITY,
    NONSMOOTH_FUNCTIONS,
    VARIABLE_PATTERN,
    BinaryOp,
    Call,
    Expression,
    Layout,
    Negate,
    Node,
    Number,
    Power,
    Variable,
    uses_nonsmooth,
)
from rigidlab.phase import Regularity

logger = logging.getLogger(__name__)

_NUMBER = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_INTEGER = re.compile(r"^[0-9]+$")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_OPERATORS = set("+-*/^(),")


@dataclass(frozen=True)
class Token:
    kind: str  # "number", "ident", "op", "eof"
    text: str
    line: int
    column: int


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    line, col, i = 1, 1, 0
    while i < len(source):
        ch = source[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch.isspace():
            col, i = col + 1, i + 1
            continue
        # numbers and names are ASCII
        number = _NUMBER.match(source, i)
        ident = _IDENT.match(source, i)
        if number is not None:
            text = number.group(0)
            tokens.append(Token("number", text, line, col))
        elif ident is not None:
            text = ident.group(0)
            tokens.append(Token("ident", text, line, col))
        elif ch in _OPERATORS:
            text = ch
            tokens.append(Token("op", text, line, col))
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
        col += len(text)
        i += len(text)
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: List[Token], d: int, k: int, layout: Layout):
        self.tokens = tokens
        self.pos = 0
        self.d = d
        self.k = k
        self.layout = layout

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _expect(self, text: str) -> Token:
        tok = self.current
        if tok.kind != "op" or tok.text != text:
            found = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", tok.line, tok.column)
        return self._advance()

    def _is_op(self, *texts: str) -> bool:
        return self.current.kind == "op" and self.current.text in texts

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "eof":
            tok = self.current
            raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.column)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._is_op("+", "-"):
            op = self._advance().text
            node = BinaryOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self._is_op("*", "/"):
            op = self._advance().text
            node = BinaryOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        node = self.base()
        if self._is_op("^"):
            self._advance()
            tok = self.current
            if tok.kind != "number" or not _INTEGER.match(tok.text):
                raise ParseError(
                    "exponent must be a non-negative integer literal",
                    tok.line,
                    tok.column,
                )
            self._advance()
            node = Power(node, int(tok.text))
        return node

    def base(self) -> Node:
        tok = self.current
        if tok.kind == "number":
            self._advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ParseError(
                    f"numeric literal {tok.text!r} is out of range",
                    tok.line,
                    tok.column,
                )
            return Number(value)
        if tok.kind == "ident":
            self._advance()
            if tok.text in FUNCTION_ARITY:
                return self._call(tok)
            return self._variable(tok)
        if self._is_op("("):
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        if self._is_op("-"):
            self._advance()
            return Negate(self.base())
        found = tok.text or "end of input"
        raise ParseError(f"unexpected token {found!r}", tok.line, tok.column)

    def _call(self, name: Token) -> Node:
        if not self._is_op("("):
            raise ParseError(
                f"function {name.text!r} needs an argument list", name.line, name.column
            )
        self._advance()
        args = [self.expr()]
        while self._is_op(","):
            self._advance()
            args.append(self.expr())
        self._expect(")")
        arity = FUNCTION_ARITY[name.text]
        if arity is None and len(args) < 2:
            raise ParseError(
                f"arity mismatch: {name.text} takes at least 2 arguments, got {len(args)}",
                name.line,
                name.column,
            )
        if arity is not None and len(args) != arity:
            raise ParseError(
                f"arity mismatch: {name.text} takes {arity} argument(s), got {len(args)}",
                name.line,
                name.column,
            )
        return Call(name.text, tuple(args))

    def _variable(self, tok: Token) -> Node:
        if tok.text == "t":
            return Variable("t", 0)
        match = VARIABLE_PATTERN.match(tok.text)
        if not match:
            raise ParseError(f"unknown identifier {tok.text!r}", tok.line, tok.column)
        kind, index = match.group(1), int(match.group(2))
        if kind == "p" and self.layout is Layout.GENERATING:
            raise ParseError(
                f"unknown identifier {tok.text!r}: generating cores have no p",
                tok.line,
                tok.column,
            )
        bound = self.k if kind == "xi" else self.d
        if index < 1 or index > bound:
            raise ParseError(
                f"variable index out of range: {tok.text} (declared {kind}1..{kind}{bound})",
                tok.line,
                tok.column,
            )
        return Variable(kind, index)


def parse_expression(
    source: str,
    dims: Tuple[int, int] = (1, 0),
    layout: Layout = Layout.PHASE,
    declared: Optional[Regularity] = None,
) -> Expression:
    """
    Parse expression source text.

    Args:
        source: expression text
        dims: (d, k); d counts q (and p) variables, k counts xi variables
        layout: PHASE points are (q, p, xi), GENERATING points are (q, xi)
        declared: author flag; only Regularity.C11 may be declared

    Returns:
        Expression: the parsed AST with its regularity flag
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 1, 1)
    d, k = int(dims[0]), int(dims[1])
    if d < 1 or k < 0:
        raise ParseError(f"invalid dimensions (d={d}, k={k})", 1, 1)
    if declared not in (None, Regularity.C11):
        raise ValueError("only the C1,1 regularity flag can be declared")

    root = _Parser(tokenize(source), d, k, layout).parse()
    if not uses_nonsmooth(root):
        regularity = Regularity.SMOOTH
    elif declared is Regularity.C11:
        regularity = Regularity.C11
    else:
        regularity = Regularity.LIPSCHITZ
    logger.debug(f"parsed {source!r} as {regularity.value}")
    return Expression(root, d, k, layout, regularity, source)


__all__ = ["parse_expression", "tokenize", "NONSMOOTH_FUNCTIONS"]
