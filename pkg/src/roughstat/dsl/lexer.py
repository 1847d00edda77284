"""Tokenizer for the sequence language."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import LexError

KEYWORDS = frozenset({"if", "then", "else"})
LOGICAL = frozenset({"and", "or", "not"})

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
# longest operators first
_OPERATORS = ("<=", ">=", "==", "!=", "+", "-", "*", "/", "^", "%", "<", ">")
_SINGLE = {"(": "lparen", ")": "rparen", ",": "comma"}


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    position: int  # 1-based byte offset

    def __repr__(self):
        return f"Token({self.kind}, {self.lexeme!r}, {self.position})"


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens, ending with an ``end`` token.

    Whitespace and ``#`` line comments are skipped; anything else that is
    not a token raises :class:`LexError` with its byte position.
    """
    tokens: list[Token] = []
    i = 0
    byte = 1  # 1-based byte offset of source[i]
    n = len(source)

    def advance(count: int) -> None:
        nonlocal i, byte
        byte += len(source[i:i + count].encode("utf-8"))
        i += count

    while i < n:
        ch = source[i]
        if ch.isspace():
            advance(1)
            continue
        if ch == "#":
            end = source.find("\n", i)
            advance((n if end < 0 else end) - i)
            continue
        m = _NUMBER.match(source, i)
        if m:
            tokens.append(Token("number", m.group(), byte))
            advance(m.end() - i)
            continue
        m = _IDENT.match(source, i)
        if m:
            word = m.group()
            if word in KEYWORDS:
                kind = "keyword"
            elif word in LOGICAL:
                kind = "logical"
            else:
                kind = "identifier"
            tokens.append(Token(kind, word, byte))
            advance(m.end() - i)
            continue
        if ch in _SINGLE:
            tokens.append(Token(_SINGLE[ch], ch, byte))
            advance(1)
            continue
        for op in _OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token("operator", op, byte))
                advance(len(op))
                break
        else:
            raise LexError(f"unexpected character {ch!r}", byte)
    tokens.append(Token("end", "", byte))
    return tokens
