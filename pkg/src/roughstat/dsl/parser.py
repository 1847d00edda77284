"""Recursive-descent parser.

Grammar (lowest precedence first)::

    expr     := "if" orcond "then" expr "else" expr | sum
    orcond   := andcond { "or" andcond }
    andcond  := atomcond { "and" atomcond }
    atomcond := "not" atomcond | sum relop sum | boolcall | "(" orcond ")"
    sum      := term { ("+" | "-") term }
    term     := factor { ("*" | "/" | "%") factor }
    factor   := "-" factor | base [ "^" factor ]
    base     := number | "k" | "x" | ident "(" expr { "," expr } ")" | "(" expr ")"

Unary minus sits at the factor level so ``-x^2`` parses as ``-(x^2)``.
"""

from __future__ import annotations

import math

from ..errors import ParseError
from .ast import (
    FUNCTIONS,
    REL_OPS,
    Binary,
    Call,
    Comparison,
    Conditional,
    Expr,
    Literal,
    Unary,
    Variable,
    is_boolean,
)
from .lexer import Token

_ARITH_FOLLOW = {"+", "-", "*", "/", "%", "^"}


class _Parser:
    def __init__(self, tokens: list[Token]):
        if not tokens or tokens[-1].kind != "end":
            raise ParseError("token stream must end with an end token", 1)
        self.tokens = tokens
        self.pos = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def at(self, kind: str, lexeme: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (lexeme is None or t.lexeme == lexeme)

    def take(self) -> Token:
        t = self.tok
        if t.kind != "end":
            self.pos += 1
        return t

    def expect(self, kind: str, lexeme: str | None, what: str) -> Token:
        if not self.at(kind, lexeme):
            self.fail(f"expected {what}")
        return self.take()

    def fail(self, message: str, token: Token | None = None):
        t = token or self.tok
        found = "end of input" if t.kind == "end" else repr(t.lexeme)
        raise ParseError(f"{message}, found {found}", t.position)

    def numeric(self, node: Expr, token: Token) -> Expr:
        if is_boolean(node):
            raise ParseError("expected numeric expression, found a condition", token.position)
        return node

    # grammar
    def expr(self) -> Expr:
        if self.at("keyword", "if"):
            self.take()
            cond = self.orcond()
            self.expect("keyword", "then", "'then'")
            start = self.tok
            then = self.numeric(self.expr(), start)
            self.expect("keyword", "else", "'else'")
            start = self.tok
            orelse = self.numeric(self.expr(), start)
            return Conditional(cond, then, orelse)
        start = self.tok
        return self.numeric(self.sum(), start)

    def orcond(self) -> Expr:
        node = self.andcond()
        while self.at("logical", "or"):
            self.take()
            node = Binary("or", node, self.andcond())
        return node

    def andcond(self) -> Expr:
        node = self.atomcond()
        while self.at("logical", "and"):
            self.take()
            node = Binary("and", node, self.atomcond())
        return node

    def atomcond(self) -> Expr:
        if self.at("logical", "not"):
            self.take()
            return Unary("not", self.atomcond())
        if self.at("lparen"):
            saved = self.pos
            try:
                self.take()
                node = self.orcond()
                self.expect("rparen", None, "')'")
            except ParseError as exc:
                first_error = exc
            else:
                if not (self.at("operator") and (self.tok.lexeme in REL_OPS or self.tok.lexeme in _ARITH_FOLLOW)):
                    return node
                first_error = None
            self.pos = saved
            try:
                return self._relation()
            except ParseError as exc:
                if first_error is not None and (first_error.position or 0) > (exc.position or 0):
                    raise first_error from None
                raise
        return self._relation()

    def _relation(self) -> Expr:
        start = self.tok
        left = self.sum()
        if self.at("operator") and self.tok.lexeme in REL_OPS:
            op = self.take().lexeme
            self.numeric(left, start)
            rstart = self.tok
            right = self.numeric(self.sum(), rstart)
            return Comparison(op, left, right)
        if is_boolean(left):
            return left
        self.fail("expected comparison operator")

    def sum(self) -> Expr:
        start = self.tok
        node = self.term()
        while self.at("operator") and self.tok.lexeme in ("+", "-"):
            self.numeric(node, start)
            op = self.take().lexeme
            rstart = self.tok
            node = Binary(op, node, self.numeric(self.term(), rstart))
        return node

    def term(self) -> Expr:
        start = self.tok
        node = self.factor()
        while self.at("operator") and self.tok.lexeme in ("*", "/", "%"):
            self.numeric(node, start)
            op = self.take().lexeme
            rstart = self.tok
            node = Binary(op, node, self.numeric(self.factor(), rstart))
        return node

    def factor(self) -> Expr:
        if self.at("operator", "-"):
            self.take()
            start = self.tok
            return Unary("neg", self.numeric(self.factor(), start))
        start = self.tok
        node = self.base()
        if self.at("operator", "^"):
            self.numeric(node, start)
            self.take()
            rstart = self.tok
            return Binary("^", node, self.numeric(self.factor(), rstart))
        return node

    def base(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.take()
            value = float(t.lexeme)
            if not math.isfinite(value):
                raise ParseError("number out of range", t.position)
            return Literal(value)
        if t.kind == "identifier":
            self.take()
            if t.lexeme in ("k", "x"):
                return Variable(t.lexeme)
            if not self.at("lparen"):
                raise ParseError(f"unknown identifier {t.lexeme!r}", t.position)
            if t.lexeme not in FUNCTIONS:
                raise ParseError(f"unknown function {t.lexeme!r}", t.position)
            self.take()
            args = [self.expr()]
            while self.at("comma"):
                self.take()
                args.append(self.expr())
            self.expect("rparen", None, "')' or ','")
            arity = FUNCTIONS[t.lexeme][0]
            if len(args) != arity:
                raise ParseError(
                    f"function {t.lexeme!r} takes {arity} argument(s), got {len(args)}", t.position
                )
            return Call(t.lexeme, tuple(args))
        if t.kind == "lparen":
            self.take()
            node = self.expr()
            self.expect("rparen", None, "')'")
            return node
        self.fail("expected base expression")

    def finish(self, node: Expr) -> Expr:
        if not self.at("end"):
            self.fail("expected end of input")
        return node


def parse_expression(tokens: list[Token], predicate: bool = False) -> Expr:
    """Parse a numeric expression, or a condition when ``predicate`` is set."""
    p = _Parser(tokens)
    return p.finish(p.orcond() if predicate else p.expr())
