"""Prefix counts, empirical natural density, and three-valued density verdicts.

The natural density of K is lim |K_n|/n with K_n = {k in K : k <= n}. A limit
cannot be read off finite data, so :func:`density_verdict` samples |K_n|/n at
the checkpoints of an :class:`AnalysisProtocol` and answers Zero, Positive or
Undecided from the final stability window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError

ZERO = "zero"
POSITIVE = "positive"
UNDECIDED = "undecided"


@dataclass(frozen=True)
class IndexPredicate:
    """Membership test over the positive integers.

    ``bulk`` is an optional fast path returning the membership mask of
    1..n as a boolean array; it must agree with ``membership``.
    """

    membership: Callable[[int], bool]
    description: str = ""
    bulk: Callable[[int], np.ndarray] | None = field(default=None, compare=False, repr=False)

    def __call__(self, k: int) -> bool:
        return bool(self.membership(k))

    def mask(self, n: int) -> np.ndarray:
        """Boolean array whose entry i tells whether i + 1 is a member."""
        if self.bulk is not None:
            out = np.asarray(self.bulk(n), dtype=bool)
            if out.shape != (n,):
                raise ValueError(f"bulk membership returned shape {out.shape}, expected ({n},)")
            return out
        return np.fromiter((bool(self.membership(k)) for k in range(1, n + 1)), dtype=bool, count=n)

    def members(self, n: int, limit: int | None = None) -> list[int]:
        idx = np.flatnonzero(self.mask(n)) + 1
        if limit is not None:
            idx = idx[:limit]
        return [int(i) for i in idx]

    def __invert__(self) -> IndexPredicate:
        bulk = None if self.bulk is None else (lambda n: ~self.mask(n))
        return IndexPredicate(lambda k: not self(k), f"not ({self.description})", bulk)

    def __or__(self, other: IndexPredicate) -> IndexPredicate:
        bulk = None
        if self.bulk is not None and other.bulk is not None:
            bulk = lambda n: self.mask(n) | other.mask(n)  # noqa: E731
        return IndexPredicate(
            lambda k: self(k) or other(k), f"({self.description}) or ({other.description})", bulk
        )

    def __and__(self, other: IndexPredicate) -> IndexPredicate:
        bulk = None
        if self.bulk is not None and other.bulk is not None:
            bulk = lambda n: self.mask(n) & other.mask(n)  # noqa: E731
        return IndexPredicate(
            lambda k: self(k) and other(k), f"({self.description}) and ({other.description})", bulk
        )

    @classmethod
    def from_mask_function(cls, bulk: Callable[[int], np.ndarray], description: str = "") -> IndexPredicate:
        def membership(k: int) -> bool:
            return bool(bulk(k)[k - 1])

        return cls(membership, description, bulk)


def _check_positive(n) -> int:
    if int(n) != n or n < 1:
        raise ConfigurationError(f"prefix length must be a positive integer, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class AnalysisProtocol:
    """Finite stand-in for the (epsilon, delta, N) quantifiers of a density limit."""

    checkpoints: tuple[int, ...] = (1_000, 10_000, 100_000, 1_000_000)
    zero_tol: float = 0.01
    stability_window: int = 2
    positive_tol: float = 0.02

    def __post_init__(self):
        cps = tuple(int(c) for c in self.checkpoints)
        object.__setattr__(self, "checkpoints", cps)
        if not cps:
            raise ConfigurationError("protocol needs at least one checkpoint")
        if cps[0] < 1 or any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigurationError(f"checkpoints must be positive and strictly increasing: {cps}")
        if not 0 < self.zero_tol < 1:
            raise ConfigurationError(f"zero_tol must lie in (0, 1), got {self.zero_tol}")
        if not 0 < self.positive_tol < 1:
            raise ConfigurationError(f"positive_tol must lie in (0, 1), got {self.positive_tol}")
        if not 1 <= self.stability_window <= len(cps):
            raise ConfigurationError(
                f"stability_window must lie in [1, {len(cps)}], got {self.stability_window}"
            )

    @property
    def n_max(self) -> int:
        return self.checkpoints[-1]

    def to_dict(self) -> dict:
        return {
            "checkpoints": list(self.checkpoints),
            "zero_tol": self.zero_tol,
            "stability_window": self.stability_window,
            "positive_tol": self.positive_tol,
        }


DEFAULT_PROTOCOL = AnalysisProtocol()


@dataclass(frozen=True)
class CheckpointRecord:
    n: int
    count: int

    @property
    def density(self) -> Fraction:
        return Fraction(self.count, self.n)

    @property
    def density_text(self) -> str:
        return f"{self.count}/{self.n}"


@dataclass(frozen=True)
class DensityVerdict:
    kind: str  # ZERO, POSITIVE or UNDECIDED
    evidence: tuple[Fraction, ...]
    estimate: float | None = None


@dataclass(frozen=True)
class DensityReport:
    checkpoints: tuple[CheckpointRecord, ...]
    verdict: DensityVerdict

    @property
    def final(self) -> CheckpointRecord:
        return self.checkpoints[-1]


def prefix_count(pred: IndexPredicate, n: int) -> int:
    """|{k : 1 <= k <= n, pred(k)}|."""
    n = _check_positive(n)
    return int(np.count_nonzero(pred.mask(n)))


def empirical_density(pred: IndexPredicate, n: int) -> Fraction:
    """|K_n| / n as an exact rational."""
    n = _check_positive(n)
    return Fraction(prefix_count(pred, n), n)


def prefix_counts(mask: np.ndarray, checkpoints: Sequence[int]) -> list[int]:
    """Counts of ``mask[:n]`` at each checkpoint n, in one pass."""
    cumulative = np.cumsum(mask, dtype=np.int64)
    return [int(cumulative[n - 1]) for n in checkpoints]


def _decimal(value: float) -> Fraction:
    # tolerances are read as the decimals the user wrote, not their binary images
    return Fraction(repr(float(value)))


def classify(densities: Sequence[Fraction], protocol: AnalysisProtocol) -> DensityVerdict:
    """Three-valued decision from the final ``stability_window`` densities."""
    window = tuple(densities[-protocol.stability_window:])
    zero_tol = _decimal(protocol.zero_tol)
    if all(d <= zero_tol for d in window):
        return DensityVerdict(ZERO, window)
    if all(d > zero_tol for d in window) and max(window) - min(window) <= _decimal(protocol.positive_tol):
        estimate = float(sum(window) / len(window))
        return DensityVerdict(POSITIVE, window, estimate)
    return DensityVerdict(UNDECIDED, window)


def report_from_mask(mask: np.ndarray, protocol: AnalysisProtocol) -> DensityReport:
    counts = prefix_counts(mask, protocol.checkpoints)
    records = tuple(CheckpointRecord(n, c) for n, c in zip(protocol.checkpoints, counts))
    return DensityReport(records, classify([r.density for r in records], protocol))


def density_verdict(pred: IndexPredicate, protocol: AnalysisProtocol = DEFAULT_PROTOCOL) -> DensityReport:
    """Sample |K_n|/n at every checkpoint and classify the tail."""
    return report_from_mask(pred.mask(protocol.n_max), protocol)


# ------------------------------------------------------------ common index sets


def _square_mask(n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    roots = np.arange(1, math.isqrt(n) + 1)
    mask[roots * roots - 1] = True
    return mask


def _prime_mask(n: int) -> np.ndarray:
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return sieve[1:]


def _leading_one_mask(n: int) -> np.ndarray:
    k = np.arange(1, n + 1)
    lead = k.copy()
    while (lead >= 10).any():
        lead = np.where(lead >= 10, lead // 10, lead)
    return lead == 1


def squares() -> IndexPredicate:
    return IndexPredicate(lambda k: math.isqrt(k) ** 2 == k, "perfect squares", _square_mask)


def evens() -> IndexPredicate:
    return IndexPredicate(lambda k: k % 2 == 0, "even integers", lambda n: np.arange(1, n + 1) % 2 == 0)


def everything() -> IndexPredicate:
    return IndexPredicate(lambda k: True, "all positive integers", lambda n: np.ones(n, dtype=bool))


def nothing() -> IndexPredicate:
    return IndexPredicate(lambda k: False, "empty set", lambda n: np.zeros(n, dtype=bool))


def primes() -> IndexPredicate:
    def is_prime(k: int) -> bool:
        if k < 2:
            return False
        return all(k % d for d in range(2, math.isqrt(k) + 1))

    return IndexPredicate(is_prime, "primes", _prime_mask)


def leading_digit_one() -> IndexPredicate:
    return IndexPredicate(lambda k: str(k)[0] == "1", "decimal representation starts with 1", _leading_one_mask)


def finite_set(members) -> IndexPredicate:
    members = frozenset(int(m) for m in members)

    def bulk(n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        idx = [m - 1 for m in members if 1 <= m <= n]
        mask[idx] = True
        return mask

    return IndexPredicate(lambda k: k in members, f"finite set of {len(members)}", bulk)


def program_predicate(program) -> IndexPredicate:
    """Index set described by a condition program over k."""

    def membership(k: int) -> bool:
        from .dsl.evaluate import EvalError, evaluate_expr

        value = evaluate_expr(program.ast, k, 0.0)
        return False if isinstance(value, EvalError) else bool(value)

    return IndexPredicate(
        membership, program.source or "program", lambda n: program.mask(np.arange(1, n + 1))
    )


NAMED_SETS = {
    "squares": squares,
    "evens": evens,
    "primes": primes,
    "all": everything,
    "empty": nothing,
    "leading1": leading_digit_one,
}
