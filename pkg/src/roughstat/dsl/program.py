"""Compiled sequence programs and the built-in registry."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ProgramError
from .ast import Expr, variables
from .evaluate import EvalError, evaluate_expr, evaluate_many
from .lexer import Token, tokenize
from .parser import parse_expression
from .printer import format_expr

BUILTINS = {
    "example21": ("if issquare(k) then k else 1/(1 + x^k)", (0.0, 1.0)),
}

_DOMAIN = re.compile(r"#\s*domain\s*:\s*\[\s*([^,\]]+)\s*,\s*([^\]]+)\]")


@dataclass(frozen=True)
class SequenceProgram:
    """An evaluable family ``(k, x) -> f_k(x)``.

    ``domain_hint`` is an optional closed interval for x; grids outside it
    are rejected by the analysis front ends.
    """

    ast: Expr
    uses_index: bool
    domain_hint: tuple[float, float] | None = None
    source: str = field(default="", compare=False)

    @property
    def uses_x(self) -> bool:
        return "x" in variables(self.ast)

    def __call__(self, k, x):
        return evaluate(self, k, x)

    def values(self, ks, x: float) -> np.ndarray:
        """Vectorized values with evaluation errors mapped to NaN."""
        v, err = evaluate_many(self.ast, ks, x)
        v = v.astype(float, copy=False)
        v[err] = np.nan
        return v

    def mask(self, ks, x: float = 0.0) -> np.ndarray:
        """Vectorized truth values of a condition program; errors count as False."""
        v, err = evaluate_many(self.ast, ks, x)
        return np.asarray(v, dtype=bool) & ~err

    def in_domain(self, x: float) -> bool:
        if self.domain_hint is None:
            return True
        lo, hi = self.domain_hint
        return lo <= x <= hi


def parse(tokens: list[Token], predicate: bool = False, domain_hint=None, source: str = "") -> SequenceProgram:
    ast = parse_expression(tokens, predicate=predicate)
    return SequenceProgram(ast, "k" in variables(ast), domain_hint, source)


def _domain_from_comments(source: str):
    m = _DOMAIN.search(source)
    if not m:
        return None
    lo, hi = float(m.group(1)), float(m.group(2))
    if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
        raise ProgramError(f"invalid domain [{lo}, {hi}]", m.start() + 1)
    return (lo, hi)


def compile_program(source: str, predicate: bool = False) -> SequenceProgram:
    """Tokenize and parse ``source``.

    A comment of the form ``# domain: [a, b]`` sets the domain hint.
    """
    domain = _domain_from_comments(source)
    return parse(tokenize(source), predicate=predicate, domain_hint=domain, source=source)


def compile_target(source: str) -> SequenceProgram:
    """Compile a limit function ``x -> f(x)``; it must not use the index k."""
    program = compile_program(source)
    if program.uses_index:
        raise ProgramError("target program must not reference the index variable k", 1)
    return program


def compile_index_set(source: str) -> SequenceProgram:
    """Compile a condition over k describing an index set."""
    program = compile_program(source, predicate=True)
    if program.uses_x:
        raise ProgramError("index-set condition must not reference x", 1)
    return program


def builtin(name: str) -> SequenceProgram:
    try:
        source, domain = BUILTINS[name]
    except KeyError:
        raise ProgramError(f"unknown built-in program {name!r}; known: {', '.join(sorted(BUILTINS))}") from None
    program = compile_program(source)
    return SequenceProgram(program.ast, program.uses_index, domain, source)


def load_program(path) -> SequenceProgram:
    """Read a ``.seq`` file: UTF-8 text holding one expression."""
    return compile_program(Path(path).read_text(encoding="utf-8"))


def evaluate(program: SequenceProgram, k: int, x: float):
    """f_k(x) as float (possibly infinite), bool for conditions, or :class:`EvalError`."""
    if k < 1:
        raise ValueError("index k must be >= 1")
    return evaluate_expr(program.ast, k, x)


def format_program(program: SequenceProgram) -> str:
    return format_expr(program.ast)


__all__ = [
    "BUILTINS",
    "EvalError",
    "SequenceProgram",
    "builtin",
    "compile_index_set",
    "compile_program",
    "compile_target",
    "evaluate",
    "format_program",
    "load_program",
    "parse",
]
