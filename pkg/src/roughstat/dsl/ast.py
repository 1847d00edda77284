"""Expression tree for the sequence language.

Nodes are frozen dataclasses, so structural equality is plain ``==``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

ARITH_OPS = ("+", "-", "*", "/", "%", "^")
REL_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGIC_OPS = ("and", "or")

# name -> (arity, returns_bool)
FUNCTIONS = {
    "abs": (1, False),
    "sqrt": (1, False),
    "min": (2, False),
    "max": (2, False),
    "floor": (1, False),
    "exp": (1, False),
    "ln": (1, False),
    "issquare": (1, True),
}


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str  # "k" or "x"


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or "not"
    operand: Expr


@dataclass(frozen=True)
class Binary:
    op: str  # one of ARITH_OPS or LOGIC_OPS
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Conditional:
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Expr, ...]


Expr = Union[Literal, Variable, Unary, Binary, Comparison, Conditional, Call]


def is_boolean(node: Expr) -> bool:
    """True when ``node`` produces a truth value rather than a number."""
    if isinstance(node, Comparison):
        return True
    if isinstance(node, Unary):
        return node.op == "not"
    if isinstance(node, Binary):
        return node.op in LOGIC_OPS
    if isinstance(node, Call):
        return FUNCTIONS[node.name][1]
    return False


def variables(node: Expr) -> set[str]:
    if isinstance(node, Variable):
        return {node.name}
    if isinstance(node, Literal):
        return set()
    if isinstance(node, Unary):
        return variables(node.operand)
    if isinstance(node, (Binary, Comparison)):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Conditional):
        return variables(node.cond) | variables(node.then) | variables(node.orelse)
    out: set[str] = set()
    for arg in node.args:
        out |= variables(arg)
    return out
