"""Canonical pretty-printer with minimal parentheses.

Re-parsing the output yields a structurally equal tree.
"""

from __future__ import annotations

import math

from .ast import Binary, Call, Comparison, Conditional, Expr, Literal, Unary, Variable

# binding strength; higher binds tighter
_COND, _OR, _AND, _NOT, _REL, _SUM, _TERM, _FACTOR, _ATOM = range(9)
_BINARY_LEVEL = {"or": _OR, "and": _AND, "+": _SUM, "-": _SUM, "*": _TERM, "/": _TERM, "%": _TERM}


def _level(node: Expr) -> int:
    if isinstance(node, Conditional):
        return _COND
    if isinstance(node, Binary):
        return _FACTOR if node.op == "^" else _BINARY_LEVEL[node.op]
    if isinstance(node, Comparison):
        return _REL
    if isinstance(node, Unary):
        return _NOT if node.op == "not" else _FACTOR
    return _ATOM


def format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    text = repr(value)
    if not math.isfinite(value):
        raise ValueError(f"literal {text} has no source form")
    return text


def format_expr(node: Expr) -> str:
    if isinstance(node, Literal):
        return format_number(node.value)
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(format_expr(a) for a in node.args)})"
    if isinstance(node, Conditional):
        return (
            f"if {format_expr(node.cond)} then {format_expr(node.then)} "
            f"else {format_expr(node.orelse)}"
        )
    if isinstance(node, Unary):
        if node.op == "not":
            return "not " + _wrap(node.operand, _NOT)
        return "-" + _wrap(node.operand, _FACTOR)
    if isinstance(node, Comparison):
        return f"{_wrap(node.left, _SUM)} {node.op} {_wrap(node.right, _SUM)}"
    if node.op == "^":
        return f"{_wrap(node.left, _ATOM)} ^ {_wrap(node.right, _FACTOR)}"
    level = _BINARY_LEVEL[node.op]
    # left-associative: the right operand must bind strictly tighter
    return f"{_wrap(node.left, level)} {node.op} {_wrap(node.right, level + 1)}"


def _wrap(node: Expr, minimum: int) -> str:
    text = format_expr(node)
    return text if _level(node) >= minimum else f"({text})"
