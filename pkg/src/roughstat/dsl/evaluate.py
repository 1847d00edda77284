"""Evaluation of expression trees.

Two entry points share one set of numeric rules:

* :func:`evaluate_expr` walks the tree for a single ``(k, x)`` and returns a
  float or an :class:`EvalError` value. It never raises for numeric trouble.
* :func:`evaluate_many` evaluates over a whole array of indices with numpy.
  Errors come back as a boolean mask. Operations whose numpy kernels are not
  guaranteed to round like libm (exp, ln, non-integer powers) go through the
  scalar helpers element by element, so both paths agree bit-for-bit.

Numeric rules: IEEE-754 binary64. Integer-valued exponents use
exponentiation by squaring; other exponents use exp(e * ln b). Division by
zero, sqrt of a negative, ln of a non-positive number, NaN results, and
non-integer operands to ``%`` or ``issquare`` are evaluation errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ast import Binary, Call, Comparison, Conditional, Expr, Literal, Unary, Variable


@dataclass(frozen=True)
class EvalError:
    """Marker value returned when a term cannot be evaluated."""

    reason: str

    def __bool__(self):
        return False


class _Fail(Exception):
    pass


# largest |exponent| handled by the vectorized squaring loop
_SQUARING_LIMIT = 2.0**62
# issquare arguments below this are handled by the float sqrt fast path
_ISQRT_FAST_LIMIT = 2.0**52


def _is_int(v: float) -> bool:
    return math.isfinite(v) and v == math.floor(v)


def _checked(v: float) -> float:
    if v != v:
        raise _Fail("not a number")
    return v


def _exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _ln(v: float) -> float:
    if not v > 0.0:
        raise _Fail("ln of non-positive number")
    return math.log(v)


def _int_power(base: float, n: int) -> float:
    result = 1.0
    while n:
        if n & 1:
            result *= base
        n >>= 1
        base *= base
    return result


def power(base: float, exponent: float) -> float:
    if _is_int(exponent):
        result = _int_power(base, int(abs(exponent)))
        if exponent < 0:
            if result == 0.0:
                raise _Fail("division by zero")
            result = 1.0 / result
        return _checked(result)
    if base > 0.0:
        return _checked(_exp(_checked(exponent * math.log(base))))
    if base == 0.0 and exponent > 0.0:
        return 0.0
    raise _Fail("power outside domain")


def divide(a: float, b: float) -> float:
    if b == 0.0:
        raise _Fail("division by zero")
    return _checked(a / b)


def modulo(a: float, b: float) -> float:
    if not (_is_int(a) and _is_int(b)):
        raise _Fail("% needs integer operands")
    if b == 0.0:
        raise _Fail("division by zero")
    return a % b


def issquare(t: float) -> bool:
    if not _is_int(t) or t < 0:
        raise _Fail("issquare needs a nonnegative integer")
    n = int(t)
    return math.isqrt(n) ** 2 == n


def _floor(v: float) -> float:
    # integral inputs (including -0.0 and infinities) pass through unchanged, as np.floor does
    if not math.isfinite(v) or v == math.floor(v):
        return v
    return float(math.floor(v))


def _sqrt(v: float) -> float:
    if v < 0.0:
        raise _Fail("sqrt of negative number")
    return math.sqrt(v)


def _min(a: float, b: float) -> float:
    return a if a <= b else b


def _max(a: float, b: float) -> float:
    return a if a >= b else b


_UNARY_FUNCS = {"abs": abs, "sqrt": _sqrt, "floor": _floor, "exp": _exp, "ln": _ln}
_REL = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _eval(node: Expr, k: float, x: float):
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Variable):
        return k if node.name == "k" else x
    if isinstance(node, Unary):
        v = _eval(node.operand, k, x)
        return (not v) if node.op == "not" else -v
    if isinstance(node, Comparison):
        return _REL[node.op](_eval(node.left, k, x), _eval(node.right, k, x))
    if isinstance(node, Conditional):
        branch = node.then if _eval(node.cond, k, x) else node.orelse
        return _eval(branch, k, x)
    if isinstance(node, Call):
        args = [_eval(a, k, x) for a in node.args]
        if node.name == "issquare":
            return issquare(args[0])
        if node.name == "min":
            return _min(*args)
        if node.name == "max":
            return _max(*args)
        return _checked(_UNARY_FUNCS[node.name](args[0]))
    op = node.op
    if op == "and":
        return bool(_eval(node.left, k, x)) and bool(_eval(node.right, k, x))
    if op == "or":
        return bool(_eval(node.left, k, x)) or bool(_eval(node.right, k, x))
    a = _eval(node.left, k, x)
    b = _eval(node.right, k, x)
    if op == "+":
        return _checked(a + b)
    if op == "-":
        return _checked(a - b)
    if op == "*":
        return _checked(a * b)
    if op == "/":
        return divide(a, b)
    if op == "%":
        return modulo(a, b)
    return power(a, b)


def evaluate_expr(node: Expr, k: float, x: float):
    """Value of ``node`` at ``(k, x)``: float, bool (for conditions) or EvalError."""
    try:
        return _eval(node, float(k), float(x))
    except _Fail as exc:
        return EvalError(str(exc))


# ---------------------------------------------------------------- vectorized


def _scalar_map(func, mask, *arrays):
    """Apply a scalar helper where ``mask`` holds; return (values, errors)."""
    out = np.zeros(mask.shape, dtype=float)
    err = np.zeros(mask.shape, dtype=bool)
    for i in np.flatnonzero(mask):
        try:
            out[i] = func(*(float(a[i]) for a in arrays))
        except _Fail:
            err[i] = True
    return out, err


def _vpower(a, b, err):
    out = np.zeros(a.shape)
    fast = ~err & np.isfinite(b) & (b == np.floor(b)) & (np.abs(b) < _SQUARING_LIMIT)
    n = np.where(fast, np.abs(np.where(fast, b, 0.0)), 0.0).astype(np.int64)
    result = np.ones(a.shape)
    base = a.copy()
    while n.any():
        bit = (n & 1).astype(bool)
        result = np.where(bit, result * base, result)
        n >>= 1
        base = base * base
    neg = fast & (b < 0)
    zero_div = neg & (result == 0.0)
    result = np.where(neg & ~zero_div, 1.0 / np.where(zero_div, 1.0, result), result)
    out[fast] = result[fast]
    new_err = zero_div | (fast & np.isnan(out))
    slow = ~err & ~fast
    if slow.any():
        vals, serr = _scalar_map(power, slow, a, b)
        out[slow] = vals[slow]
        new_err |= serr
    return out, new_err


def _vissquare(t, err):
    valid = ~err & np.isfinite(t) & (t == np.floor(t)) & (t >= 0)
    new_err = ~err & ~valid
    out = np.zeros(t.shape, dtype=bool)
    fast = valid & (t < _ISQRT_FAST_LIMIT)
    ti = np.where(fast, t, 0.0).astype(np.int64)
    s = np.floor(np.sqrt(ti.astype(float))).astype(np.int64)
    s = np.where(s * s > ti, s - 1, s)
    s = np.where((s + 1) * (s + 1) <= ti, s + 1, s)
    out[fast] = (s * s == ti)[fast]
    slow = valid & ~fast
    for i in np.flatnonzero(slow):
        out[i] = issquare(float(t[i]))
    return out, new_err


def _veval(node: Expr, k: np.ndarray, x: np.ndarray):
    """Return (values, errors) arrays shaped like ``k``."""
    shape = k.shape
    if isinstance(node, Literal):
        return np.full(shape, node.value), np.zeros(shape, dtype=bool)
    if isinstance(node, Variable):
        return (k if node.name == "k" else x), np.zeros(shape, dtype=bool)
    if isinstance(node, Unary):
        v, e = _veval(node.operand, k, x)
        return (~v if node.op == "not" else -v), e
    if isinstance(node, Comparison):
        a, ea = _veval(node.left, k, x)
        b, eb = _veval(node.right, k, x)
        return _REL[node.op](a, b), ea | eb
    if isinstance(node, Conditional):
        c, ec = _veval(node.cond, k, x)
        t, et = _veval(node.then, k, x)
        f, ef = _veval(node.orelse, k, x)
        return np.where(c, t, f), ec | (c & et) | (~c & ef)
    if isinstance(node, Call):
        args = [_veval(a, k, x) for a in node.args]
        err = args[0][1] if len(args) == 1 else args[0][1] | args[1][1]
        if node.name == "issquare":
            v, e = _vissquare(args[0][0], err)
            return v, err | e
        if node.name in ("min", "max"):
            a, b = args[0][0], args[1][0]
            pick = a <= b if node.name == "min" else a >= b
            return np.where(pick, a, b), err
        a = args[0][0]
        if node.name == "abs":
            return np.abs(a), err
        if node.name == "floor":
            return np.floor(a), err
        if node.name == "sqrt":
            bad = a < 0
            return np.sqrt(np.where(bad, 0.0, a)), err | bad
        func = _UNARY_FUNCS[node.name]
        v, e = _scalar_map(lambda t: _checked(func(t)), ~err, a)
        return v, err | e
    op = node.op
    if op in ("and", "or"):
        a, ea = _veval(node.left, k, x)
        b, eb = _veval(node.right, k, x)
        if op == "and":
            return a & b, ea | (a & eb)
        return a | b, ea | (~a & eb)
    a, ea = _veval(node.left, k, x)
    b, eb = _veval(node.right, k, x)
    err = ea | eb
    if op == "+":
        v = a + b
    elif op == "-":
        v = a - b
    elif op == "*":
        v = a * b
    elif op == "/":
        zero = b == 0.0
        v = a / np.where(zero, 1.0, b)
        err = err | zero
    elif op == "%":
        bad = ~(np.isfinite(a) & (a == np.floor(a)) & np.isfinite(b) & (b == np.floor(b))) | (b == 0.0)
        v = np.mod(a, np.where(bad, 1.0, b))
        err = err | bad
    else:
        v, e = _vpower(a, b, err)
        err = err | e
    return v, err | np.isnan(v)


def evaluate_many(node: Expr, ks, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``node`` at every index in ``ks`` with a fixed ``x``.

    Returns ``(values, errors)``. Where ``errors`` is set the value is
    meaningless.
    """
    k = np.asarray(ks, dtype=float)
    xs = np.full(k.shape, float(x))
    with np.errstate(all="ignore"):
        v, e = _veval(node, k, xs)
        v = np.broadcast_to(v, k.shape).copy()
        e = np.broadcast_to(e, k.shape).copy()
    return v, e
