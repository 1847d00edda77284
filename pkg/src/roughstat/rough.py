"""Rough statistical convergence, rough statistical Cauchy tests, roughness estimation.

A sequence x_k is rough statistically convergent to xi with degree r when
for every eps > 0 the index set {k : |x_k - xi| >= r + eps} has natural
density zero. The degree r is fixed first and eps varies; with r = 0 this is
ordinary statistical convergence.

Non-finite terms and evaluation errors are always counted as bad indices.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .density import (
    DEFAULT_PROTOCOL,
    POSITIVE,
    UNDECIDED,
    ZERO,
    AnalysisProtocol,
    DensityReport,
    IndexPredicate,
    report_from_mask,
)
from .dsl.ast import Binary, Expr, Literal
from .dsl.program import SequenceProgram
from .errors import CandidateError, ConfigurationError, EstimationError, ProgramError

ACCEPT = "accept"
REJECT = "reject"

_VERDICT_FROM_DENSITY = {ZERO: ACCEPT, POSITIVE: REJECT, UNDECIDED: UNDECIDED}
WITNESS_LIMIT = 16


class SequenceView:
    """A real sequence x_1, ..., x_{max_index}.

    ``value_at(k)`` returns a float; NaN marks an evaluation error. When a
    vectorized ``bulk(n)`` is supplied it must agree with ``value_at`` on
    1..n. Prefix arrays are cached, so repeated analyses of one view only
    evaluate it once.
    """

    def __init__(
        self,
        value_at: Callable[[int], float],
        max_index: int,
        bulk: Callable[[int], np.ndarray] | None = None,
        description: str = "",
    ):
        if max_index < 1:
            raise ConfigurationError("max_index must be >= 1")
        self._value_at = value_at
        self.max_index = int(max_index)
        self._bulk = bulk
        self.description = description
        self._cache: np.ndarray | None = None

    def value_at(self, k: int) -> float:
        if not 1 <= k <= self.max_index:
            raise ConfigurationError(f"index {k} outside 1..{self.max_index}")
        if self._cache is not None and k <= len(self._cache):
            return float(self._cache[k - 1])
        return float(self._value_at(k))

    def values(self, n: int | None = None) -> np.ndarray:
        """Read-only array of x_1..x_n."""
        n = self.max_index if n is None else int(n)
        if n > self.max_index:
            raise ConfigurationError(f"prefix {n} exceeds the view's budget of {self.max_index}")
        if self._cache is None or len(self._cache) < n:
            if self._bulk is not None:
                arr = np.asarray(self._bulk(n), dtype=float)
            else:
                arr = np.fromiter((self._value_at(k) for k in range(1, n + 1)), dtype=float, count=n)
            arr = arr.copy()
            arr.flags.writeable = False
            self._cache = arr
        return self._cache[:n]

    @classmethod
    def from_array(cls, values, description: str = "") -> SequenceView:
        arr = np.array(values, dtype=float)
        arr.flags.writeable = False
        return cls(lambda k: arr[k - 1], len(arr), lambda n: arr[:n], description)

    @classmethod
    def from_function(cls, func: Callable[[int], float], max_index: int, description: str = "") -> SequenceView:
        """Wrap a scalar function; exceptions and non-real results become NaN."""

        def safe(k: int) -> float:
            try:
                return float(func(k))
            except (ArithmeticError, ValueError, TypeError):
                return math.nan

        return cls(safe, max_index, None, description)

    @classmethod
    def from_program(cls, program: SequenceProgram, x: float, max_index: int) -> SequenceView:
        """The scalar sequence k -> f_k(x) of a program at a fixed grid point."""

        def scalar(k: int) -> float:
            v = program(k, x)
            return math.nan if not isinstance(v, float) else v

        def bulk(n: int) -> np.ndarray:
            return program.values(np.arange(1, n + 1), x)

        return cls(scalar, max_index, bulk, f"{program.source or 'program'} at x={x!r}")

    def map(self, func: Callable[[np.ndarray], np.ndarray], description: str = "") -> SequenceView:
        """Apply an elementwise numpy transform to every term."""
        return SequenceView(
            lambda k: float(func(np.array([self.value_at(k)]))[0]),
            self.max_index,
            lambda n: func(self.values(n)),
            description or self.description,
        )

    def __repr__(self):
        return f"SequenceView({self.description!r}, max_index={self.max_index})"


@dataclass(frozen=True)
class RoughParams:
    target: float
    r: float
    eps: float

    def __post_init__(self):
        if not math.isfinite(self.target):
            raise ConfigurationError(f"target must be finite, got {self.target}")
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ConfigurationError(f"roughness r must be finite and >= 0, got {self.r}")
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ConfigurationError(f"eps must be finite and > 0, got {self.eps}")

    @property
    def threshold(self) -> float:
        return self.r + self.eps


@dataclass(frozen=True)
class ConvergenceReport:
    params: RoughParams
    density_report: DensityReport
    witness_bad_indices: tuple[int, ...]

    @property
    def verdict(self) -> str:
        return _VERDICT_FROM_DENSITY[self.density_report.verdict.kind]


@dataclass(frozen=True)
class ClassicalVerdict:
    verdict: str  # ACCEPT or REJECT
    horizon: int
    latest_violation: int | None  # witness on reject; None when nothing violates


@dataclass(frozen=True)
class RoughnessEstimate:
    r_hat: float
    bracket: tuple[float, float]
    tail_delta: float
    per_checkpoint: tuple[tuple[int, float], ...]
    cross_check: ConvergenceReport | None = None


@dataclass(frozen=True)
class CauchyReport:
    r: float
    eps: float
    candidates_tried: tuple[int, ...]
    witness_N: int | None
    verdict: str
    per_candidate: tuple[tuple[int, DensityReport], ...]
    skipped: tuple[int, ...] = ()


def _require_budget(seq: SequenceView, protocol: AnalysisProtocol) -> None:
    if protocol.n_max > seq.max_index:
        raise ConfigurationError(
            f"checkpoint {protocol.n_max} exceeds the sequence's prefix budget {seq.max_index}"
        )


def _bad_mask(values: np.ndarray, center: float, threshold: float) -> np.ndarray:
    with np.errstate(invalid="ignore", over="ignore"):
        dev = np.abs(values - center)
    return ~np.isfinite(dev) | (dev >= threshold)


def _is_bad(value: float, center: float, threshold: float) -> bool:
    dev = abs(value - center)
    return not math.isfinite(dev) or dev >= threshold


def bad_index_set(seq: SequenceView, params: RoughParams) -> IndexPredicate:
    """{k : |x_k - target| >= r + eps}, with errors and infinities counted as bad."""
    center, threshold = params.target, params.threshold
    return IndexPredicate(
        lambda k: _is_bad(seq.value_at(k), center, threshold),
        f"|x_k - {center!r}| >= {params.r!r} + {params.eps!r}",
        lambda n: _bad_mask(seq.values(n), center, threshold),
    )


def rough_stat_verdict(
    seq: SequenceView, params: RoughParams, protocol: AnalysisProtocol = DEFAULT_PROTOCOL
) -> ConvergenceReport:
    """Decide rough statistical convergence of ``seq`` to ``params.target``.

    accept / reject / undecided mirror the Zero / Positive / Undecided
    density verdict of the bad index set.
    """
    _require_budget(seq, protocol)
    mask = bad_index_set(seq, params).mask(protocol.n_max)
    report = report_from_mask(mask, protocol)
    witness = tuple(int(i) + 1 for i in np.flatnonzero(mask)[:WITNESS_LIMIT])
    return ConvergenceReport(params, report, witness)


def classical_rough_verdict(seq: SequenceView, params: RoughParams, horizon: int) -> ClassicalVerdict:
    """Finite check of rough convergence in the "for all k >= N" sense.

    Accepts when some N <= horizon // 2 has |x_k - target| < r + eps for
    every N <= k <= horizon; otherwise rejects with the latest violating index.
    """
    if not 1 <= horizon <= seq.max_index:
        raise ConfigurationError(f"horizon {horizon} outside 1..{seq.max_index}")
    mask = _bad_mask(seq.values(horizon), params.target, params.threshold)
    bad = np.flatnonzero(mask)
    if bad.size == 0:
        return ClassicalVerdict(ACCEPT, horizon, None)
    latest = int(bad[-1]) + 1
    if latest + 1 <= horizon // 2:
        return ClassicalVerdict(ACCEPT, horizon, latest)
    return ClassicalVerdict(REJECT, horizon, latest)


def _tail_quantile(deviations: np.ndarray, delta: Fraction) -> float:
    """Smallest t with |{i : dev_i > t}| <= delta * n."""
    n = len(deviations)
    allowed = math.floor(delta * n)
    if allowed >= n:
        return 0.0
    # the (allowed + 1)-th largest deviation
    return float(np.partition(deviations, n - 1 - allowed)[n - 1 - allowed])


def minimal_roughness(
    seq: SequenceView,
    target: float,
    protocol: AnalysisProtocol = DEFAULT_PROTOCOL,
    tail_delta: float = 0.01,
    margin: float = 0.01,
) -> RoughnessEstimate:
    """Estimate the least roughness degree from empirical tail quantiles.

    At each checkpoint n the estimate is the smallest t such that at most
    ``tail_delta * n`` of the first n deviations exceed t. ``r_hat`` is the
    value at the final checkpoint, ``bracket`` pairs the delta and delta/2
    quantiles. The estimate is cross-checked with :func:`rough_stat_verdict`
    at r = r_hat * (1 + margin), eps = margin.
    """
    if not 0 < tail_delta < 1:
        raise ConfigurationError(f"tail_delta must lie in (0, 1), got {tail_delta}")
    if not math.isfinite(target):
        raise ConfigurationError("target must be finite")
    _require_budget(seq, protocol)
    with np.errstate(invalid="ignore", over="ignore"):
        dev = np.abs(seq.values(protocol.n_max) - target)
    dev = np.where(np.isfinite(dev), dev, np.inf)
    if not np.isfinite(dev).any():
        raise EstimationError("every deviation is non-finite")
    delta = Fraction(repr(float(tail_delta)))
    per_checkpoint = tuple((n, _tail_quantile(dev[:n], delta)) for n in protocol.checkpoints)
    r_hat = per_checkpoint[-1][1]
    half = _tail_quantile(dev, delta / 2)
    bracket = (min(r_hat, half), max(r_hat, half))
    cross = None
    if math.isfinite(r_hat):
        cross = rough_stat_verdict(seq, RoughParams(target, r_hat * (1 + margin), margin), protocol)
    return RoughnessEstimate(r_hat, bracket, tail_delta, per_checkpoint, cross)


def default_candidates(n_max: int, max_index: int | None = None) -> list[int]:
    """Quartile indices of 1..n_max plus five draws from a generator seeded with n_max."""
    rng = random.Random(n_max)
    pool = [n_max // 4, n_max // 2, (3 * n_max) // 4] + [rng.randint(1, n_max) for _ in range(5)]
    limit = n_max if max_index is None else min(n_max, max_index)
    out: list[int] = []
    for c in pool:
        c = min(max(c, 1), limit)
        if c not in out:
            out.append(c)
    return out


def rough_cauchy_verdict(
    seq: SequenceView,
    r: float,
    eps: float,
    candidate_Ns: Sequence[int] | None = None,
    protocol: AnalysisProtocol = DEFAULT_PROTOCOL,
) -> CauchyReport:
    """Search for an anchor N with |x_k - x_N| < r + eps for almost all k.

    Accepts at the first candidate whose bad set has density verdict Zero,
    rejects when every evaluated candidate is Positive, and is undecided
    otherwise. Candidates with a non-finite x_N are skipped.
    """
    RoughParams(0.0, r, eps)  # validation
    _require_budget(seq, protocol)
    if candidate_Ns is None:
        candidate_Ns = default_candidates(protocol.n_max, seq.max_index)
    candidates = [int(c) for c in candidate_Ns]
    if not candidates:
        raise CandidateError("candidate list is empty")
    for c in candidates:
        if not 1 <= c <= seq.max_index:
            raise ConfigurationError(f"candidate N={c} outside 1..{seq.max_index}")
    values = seq.values(protocol.n_max)
    threshold = r + eps
    tried: list[int] = []
    skipped: list[int] = []
    per: list[tuple[int, DensityReport]] = []
    for N in candidates:
        anchor = seq.value_at(N)
        if not math.isfinite(anchor):
            skipped.append(N)
            continue
        tried.append(N)
        report = report_from_mask(_bad_mask(values, anchor, threshold), protocol)
        per.append((N, report))
        if report.verdict.kind == ZERO:
            return CauchyReport(r, eps, tuple(tried), N, ACCEPT, tuple(per), tuple(skipped))
    if not tried:
        raise CandidateError("x_N is non-finite at every candidate N")
    verdict = REJECT if all(rep.verdict.kind == POSITIVE for _, rep in per) else UNDECIDED
    return CauchyReport(r, eps, tuple(tried), None, verdict, tuple(per), tuple(skipped))


# ------------------------------------------------------------- function sequences


@dataclass(frozen=True)
class PointwiseReport:
    points: tuple[tuple[float, ConvergenceReport], ...]

    @property
    def overall(self) -> str:
        return combine_verdicts(rep.verdict for _, rep in self.points)


def combine_verdicts(verdicts) -> str:
    """accept iff every point accepts, reject iff any point rejects."""
    verdicts = list(verdicts)
    if any(v == REJECT for v in verdicts):
        return REJECT
    if verdicts and all(v == ACCEPT for v in verdicts):
        return ACCEPT
    return UNDECIDED


def check_grid(program: SequenceProgram, grid: Sequence[float]) -> list[float]:
    grid = [float(x) for x in grid]
    if not grid:
        raise ConfigurationError("grid must be nonempty")
    for x in grid:
        if not math.isfinite(x):
            raise ConfigurationError(f"grid point {x} is not finite")
        if not program.in_domain(x):
            raise ConfigurationError(f"grid point {x} outside the program's domain {program.domain_hint}")
    return grid


def target_value(target_program: SequenceProgram, x: float) -> float:
    if target_program.uses_index:
        raise ProgramError("target program must not reference the index variable k", 1)
    value = target_program(1, x)
    if not isinstance(value, float) or not math.isfinite(value):
        raise ConfigurationError(f"target is not a finite real at x={x!r}: {value!r}")
    return value


def map_points(func, grid, jobs: int = 1) -> list:
    """Apply ``func`` per grid point; results keep grid order for any ``jobs``."""
    if jobs <= 1 or len(grid) <= 1:
        return [func(x) for x in grid]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, grid))


def pointwise_report(
    program: SequenceProgram,
    target_program: SequenceProgram,
    grid: Sequence[float],
    r: float,
    eps: float,
    protocol: AnalysisProtocol = DEFAULT_PROTOCOL,
    jobs: int = 1,
    max_index: int | None = None,
) -> PointwiseReport:
    """Run :func:`rough_stat_verdict` for k -> f_k(x) against f(x) at each grid point."""
    if target_program.uses_index:
        raise ProgramError("target program must not reference the index variable k", 1)
    grid = check_grid(program, grid)
    budget = protocol.n_max if max_index is None else max_index

    def one(x: float):
        seq = SequenceView.from_program(program, x, budget)
        params = RoughParams(target_value(target_program, x), r, eps)
        return x, rough_stat_verdict(seq, params, protocol)

    return PointwiseReport(tuple(map_points(one, grid, jobs)))


@dataclass(frozen=True)
class LinearityResult:
    premise_holds: bool
    verdict: str  # accept / reject / undecided, or "vacuous" when the premise fails
    roughness: float
    combined: PointwiseReport | None = None
    premise_reports: tuple[PointwiseReport, PointwiseReport] | None = field(default=None, repr=False)


def linear_combination(alpha: float, f: SequenceProgram, beta: float, g: SequenceProgram) -> SequenceProgram:
    """Program for alpha * f + beta * g; zero coefficients drop their term."""
    terms: list[Expr] = []
    for coeff, prog in ((alpha, f), (beta, g)):
        if coeff != 0:
            terms.append(Binary("*", Literal(float(coeff)), prog.ast))
    if not terms:
        ast: Expr = Literal(0.0)
    elif len(terms) == 1:
        ast = terms[0]
    else:
        ast = Binary("+", terms[0], terms[1])
    domains = [p.domain_hint for c, p in ((alpha, f), (beta, g)) if c != 0 and p.domain_hint]
    domain = None
    if domains:
        domain = (max(d[0] for d in domains), min(d[1] for d in domains))
    uses_index = any(c != 0 and p.uses_index for c, p in ((alpha, f), (beta, g)))
    return SequenceProgram(ast, uses_index, domain, f"{alpha!r}*({f.source}) + {beta!r}*({g.source})")


def linearity_check(
    f: SequenceProgram,
    g: SequenceProgram,
    f_limit: SequenceProgram,
    g_limit: SequenceProgram,
    alpha: float,
    beta: float,
    r_f: float,
    r_g: float,
    grid: Sequence[float],
    eps: float = 0.01,
    protocol: AnalysisProtocol = DEFAULT_PROTOCOL,
    roughness: float | None = None,
) -> LinearityResult:
    """Check that alpha*f + beta*g converges to alpha*f_limit + beta*g_limit.

    The combination is tested at degree |alpha| r_f + |beta| r_g (or at an
    explicit ``roughness``) with tolerance ``eps``. The premises are checked
    first at eps / (|alpha| + |beta|), which is what the triangle inequality
    needs; if either premise fails the result is "vacuous".
    """
    weight = abs(alpha) + abs(beta)
    bound = abs(alpha) * r_f + abs(beta) * r_g
    degree = bound if roughness is None else roughness
    if weight == 0:
        combined = pointwise_report(
            linear_combination(0.0, f, 0.0, g), linear_combination(0.0, f_limit, 0.0, g_limit),
            grid, degree, eps, protocol,
        )
        return LinearityResult(True, combined.overall, degree, combined)
    premise_eps = eps / weight
    pf = pointwise_report(f, f_limit, grid, r_f, premise_eps, protocol) if alpha != 0 else None
    pg = pointwise_report(g, g_limit, grid, r_g, premise_eps, protocol) if beta != 0 else None
    premise = all(p is None or p.overall == ACCEPT for p in (pf, pg))
    if not premise:
        return LinearityResult(False, "vacuous", degree, None, (pf, pg))
    combined = pointwise_report(
        linear_combination(alpha, f, beta, g),
        linear_combination(alpha, f_limit, beta, g_limit),
        grid, degree, eps, protocol,
    )
    return LinearityResult(True, combined.overall, degree, combined, (pf, pg))
