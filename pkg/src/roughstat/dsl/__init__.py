"""A small expression language for sequences of real functions ``(k, x) -> f_k(x)``."""

from .ast import Binary, Call, Comparison, Conditional, Expr, Literal, Unary, Variable
from .evaluate import EvalError, evaluate_expr, evaluate_many
from .lexer import Token, tokenize
from .parser import parse_expression
from .printer import format_expr
from .program import (
    BUILTINS,
    SequenceProgram,
    builtin,
    compile_index_set,
    compile_program,
    compile_target,
    evaluate,
    format_program,
    load_program,
    parse,
)

__all__ = [
    "BUILTINS",
    "Binary",
    "Call",
    "Comparison",
    "Conditional",
    "EvalError",
    "Expr",
    "Literal",
    "SequenceProgram",
    "Token",
    "Unary",
    "Variable",
    "builtin",
    "compile_index_set",
    "compile_program",
    "compile_target",
    "evaluate",
    "evaluate_expr",
    "evaluate_many",
    "format_expr",
    "format_program",
    "load_program",
    "parse",
    "parse_expression",
    "tokenize",
]
