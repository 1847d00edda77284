"""Turning a statistically Cauchy sequence into a convergent one.

The construction runs in four steps:

1. :func:`build_band_chain` picks an anchor N with x_k in [x_N - 1, x_N + 1]
   for almost all k, then for m = 1, 2, ... intersects the running band with
   [x_{N_m} - 2^-m, x_{N_m} + 2^-m] for an anchor N_m whose band still holds
   almost all terms. Band I_m therefore has height at most 2^(1-m), and the
   bands are nested.
2. :func:`derive_thresholds` finds increasing prefix lengths J_m beyond which
   fewer than n/m of the first n terms leave I_m.
3. :func:`repair_sequence` replaces x_k by the limit estimate whenever
   J_m < k <= J_{m+1} and x_k lies outside I_m. The replaced indices form a
   density-zero set and the result converges in the ordinary sense.
4. :func:`verify_repair` checks those claims on the finite data.

Everything runs on one scalar sequence; function sequences are repaired
one grid point at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .density import DEFAULT_PROTOCOL, ZERO, AnalysisProtocol, DensityReport, IndexPredicate, report_from_mask
from .errors import NotCauchyError, ThresholdError
from .rough import (
    ACCEPT,
    ClassicalVerdict,
    ConvergenceReport,
    RoughParams,
    SequenceView,
    _require_budget,
    classical_rough_verdict,
    default_candidates,
    rough_stat_verdict,
)

DEFAULT_M_MAX = 20


def _round_up(q: Fraction) -> float:
    f = float(q)
    return math.nextafter(f, math.inf) if Fraction(f) < q else f


def _round_down(q: Fraction) -> float:
    f = float(q)
    return math.nextafter(f, -math.inf) if Fraction(f) > q else f


@dataclass(frozen=True)
class Band:
    """Closed interval [lo, hi] with positive length.

    Endpoints are stored directly; building a band from a center and a
    halfwidth rounds both ends inward so the float band never exceeds the
    exact one.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.hi > self.lo):
            raise ValueError(f"band needs finite lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def around(cls, center: float, halfwidth: float) -> Band:
        c, h = Fraction(center), Fraction(halfwidth)
        return cls(_round_up(c - h), _round_down(c + h))

    @property
    def center(self) -> float:
        return self.lo / 2 + self.hi / 2

    @property
    def halfwidth(self) -> float:
        return (self.hi - self.lo) / 2

    @property
    def height(self) -> float:
        return self.hi - self.lo

    def intersect(self, other: Band) -> Band | None:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Band(lo, hi) if hi > lo else None

    def contains(self, values: np.ndarray) -> np.ndarray:
        return np.isfinite(values) & (values >= self.lo) & (values <= self.hi)

    def within(self, other: Band) -> bool:
        return other.lo <= self.lo and self.hi <= other.hi


@dataclass(frozen=True)
class Stage:
    m: int
    band: Band  # I_m, the running intersection
    anchor_index: int
    threshold: int | None = None  # J_m once derived


@dataclass(frozen=True)
class BandChain:
    seed: Band  # [x_N - 1, x_N + 1]
    seed_index: int
    stages: tuple[Stage, ...]
    notes: tuple[str, ...] = ()

    @property
    def limit_estimate(self) -> float:
        return self.stages[-1].band.center if self.stages else self.seed.center

    @property
    def final_band(self) -> Band:
        return self.stages[-1].band if self.stages else self.seed

    @property
    def thresholds(self) -> tuple[int | None, ...]:
        return tuple(s.threshold for s in self.stages)


@dataclass(frozen=True)
class RepairResult:
    chain: BandChain
    exceptional: IndexPredicate
    repaired_view: SequenceView
    modification_density: DensityReport


@dataclass(frozen=True)
class RepairVerification:
    modification_zero: bool
    threshold_bound: bool  # fewer than n/m modifications at every checkpoint n > J_m
    threshold_violations: tuple[tuple[int, int, int], ...]  # (m, n, count)
    classical: ClassicalVerdict
    exception_count: int  # p: indices k <= max_index with |g_k - f| >= eps_classical
    rough_check: ConvergenceReport
    eps_classical: float

    @property
    def classical_ok(self) -> bool:
        return self.classical.verdict == ACCEPT

    @property
    def rough_ok(self) -> bool:
        return self.rough_check.verdict == ACCEPT

    @property
    def passed(self) -> bool:
        return self.modification_zero and self.threshold_bound and self.classical_ok and self.rough_ok


def _outside_report(values: np.ndarray, band: Band, protocol: AnalysisProtocol) -> DensityReport:
    return report_from_mask(~band.contains(values), protocol)


def build_band_chain(
    seq: SequenceView,
    m_max: int = DEFAULT_M_MAX,
    protocol: AnalysisProtocol = DEFAULT_PROTOCOL,
    candidates=None,
) -> BandChain:
    """Build nested bands I_1 ⊇ I_2 ⊇ ... with height(I_m) <= 2^(1-m).

    Stops early when no candidate anchor keeps the intersection nonempty and
    capturing almost all terms. Raises :class:`NotCauchyError` when not even
    the seed band or I_1 can be built.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    _require_budget(seq, protocol)
    values = seq.values(protocol.n_max)
    if candidates is None:
        candidates = default_candidates(protocol.n_max, seq.max_index)
    anchors = [(int(N), seq.value_at(int(N))) for N in candidates]
    anchors = [(N, v) for N, v in anchors if math.isfinite(v)]

    seed = seed_index = None
    for N, v in anchors:
        try:
            band = Band.around(v, 1.0)
        except ValueError:  # |v| so large that v +- 1 is not representable
            continue
        if _outside_report(values, band, protocol).verdict.kind == ZERO:
            seed, seed_index = band, N
            break
    if seed is None:
        raise NotCauchyError("no anchor N has x_k within 1 of x_N for almost all k")

    stages: list[Stage] = []
    notes: list[str] = []
    running = seed
    for m in range(1, m_max + 1):
        h = 2.0 ** -m
        chosen = None
        for N, v in anchors:
            try:
                band = running.intersect(Band.around(v, h))
            except ValueError:  # v +- h collapsed to a point
                continue
            if band is None:
                continue
            if _outside_report(values, band, protocol).verdict.kind == ZERO:
                chosen = Stage(m, band, N)
                running = band
                break
        if chosen is None:
            notes.append(f"stopped before stage {m}: no anchor keeps almost all terms in a band of halfwidth 2^-{m}")
            break
        stages.append(chosen)
    if not stages:
        raise NotCauchyError("no anchor N has x_k within 1/2 of x_N for almost all k")
    return BandChain(seed, seed_index, tuple(stages), tuple(notes))


def derive_thresholds(
    seq: SequenceView, chain: BandChain, protocol: AnalysisProtocol = DEFAULT_PROTOCOL
) -> BandChain:
    """Fill in J_m for every stage.

    J_m is the smallest checkpoint n such that fewer than n/m of the first n
    terms lie outside I_m at n and at every later checkpoint, and at least
    ``stability_window`` checkpoints confirm it. J_m is bumped to
    J_{m-1} + 1 when needed so the sequence strictly increases. The chain is
    truncated at the first stage without a qualifying checkpoint.
    """
    _require_budget(seq, protocol)
    values = seq.values(protocol.n_max)
    cps = protocol.checkpoints
    last_allowed = len(cps) - protocol.stability_window
    stages: list[Stage] = []
    notes = list(chain.notes)
    previous = 0
    for stage in chain.stages:
        counts = report_from_mask(~stage.band.contains(values), protocol).checkpoints
        # counts * m < n  <=>  density < 1/m
        ok = [rec.count * stage.m < rec.n for rec in counts]
        start = None
        for i in range(len(cps) - 1, -1, -1):
            if not ok[i]:
                break
            start = i
        if start is None or start > last_allowed:
            notes.append(f"truncated at stage {stage.m - 1}: no confirmed threshold for stage {stage.m}")
            break
        J = max(cps[start], previous + 1)
        if J > cps[last_allowed]:
            notes.append(f"truncated at stage {stage.m - 1}: threshold for stage {stage.m} overran the checkpoints")
            break
        stages.append(replace(stage, threshold=J))
        previous = J
    if not stages:
        raise ThresholdError("no qualifying checkpoint for stage 1")
    return BandChain(chain.seed, chain.seed_index, tuple(stages), tuple(notes))


def _stage_arrays(chain: BandChain):
    Js = np.array([s.threshold for s in chain.stages], dtype=np.int64)
    los = np.array([s.band.lo for s in chain.stages])
    his = np.array([s.band.hi for s in chain.stages])
    return Js, los, his


def _exceptional_mask(values: np.ndarray, chain: BandChain) -> np.ndarray:
    Js, los, his = _stage_arrays(chain)
    k = np.arange(1, len(values) + 1)
    stage = np.searchsorted(Js, k, side="left") - 1  # largest m with J_m < k
    active = stage >= 0
    idx = np.where(active, stage, 0)
    inside = np.isfinite(values) & (values >= los[idx]) & (values <= his[idx])
    return active & ~inside


def repair_sequence(
    seq: SequenceView, chain: BandChain, protocol: AnalysisProtocol = DEFAULT_PROTOCOL
) -> RepairResult:
    """Replace the terms that escape their stage band by the limit estimate."""
    if not chain.stages or any(s.threshold is None for s in chain.stages):
        raise ValueError("chain needs at least one stage with derived thresholds")
    _require_budget(seq, protocol)
    limit = chain.limit_estimate
    Js, los, his = _stage_arrays(chain)

    def exceptional_at(k: int) -> bool:
        m = int(np.searchsorted(Js, k, side="left")) - 1
        if m < 0:
            return False
        v = seq.value_at(k)
        return not (math.isfinite(v) and los[m] <= v <= his[m])

    def exceptional_bulk(n: int) -> np.ndarray:
        return _exceptional_mask(seq.values(n), chain)

    exceptional = IndexPredicate(exceptional_at, "terms replaced by the limit estimate", exceptional_bulk)

    def repaired_at(k: int) -> float:
        return limit if exceptional_at(k) else seq.value_at(k)

    def repaired_bulk(n: int) -> np.ndarray:
        values = seq.values(n)
        return np.where(_exceptional_mask(values, chain), limit, values)

    repaired = SequenceView(repaired_at, seq.max_index, repaired_bulk, f"repaired {seq.description}")
    modification = report_from_mask(exceptional.mask(protocol.n_max), protocol)
    return RepairResult(chain, exceptional, repaired, modification)


def verify_repair(
    seq: SequenceView,
    result: RepairResult,
    protocol: AnalysisProtocol = DEFAULT_PROTOCOL,
    eps_classical: float | None = None,
) -> RepairVerification:
    """Check a repair on the finite data.

    (a) the modified indices have density verdict Zero, with fewer than n/m
        of them below every checkpoint n > J_m;
    (b) the repaired sequence converges classically to the limit estimate
        within ``eps_classical`` (default: height of the final band), all
        violations lying in the first half of 1..max_index;
    (c) the original sequence is rough statistically convergent to the limit
        estimate with degree equal to the final band height.
    """
    chain = result.chain
    limit = chain.limit_estimate
    height = chain.final_band.height
    if eps_classical is None:
        eps_classical = height
    modification_zero = result.modification_density.verdict.kind == ZERO

    violations = []
    records = result.modification_density.checkpoints
    for stage in chain.stages:
        for rec in records:
            if rec.n > stage.threshold and not rec.count * stage.m < rec.n:
                violations.append((stage.m, rec.n, rec.count))

    horizon = seq.max_index
    params = RoughParams(limit, 0.0, eps_classical)
    classical = classical_rough_verdict(result.repaired_view, params, horizon)
    with np.errstate(invalid="ignore", over="ignore"):
        dev = np.abs(result.repaired_view.values(horizon) - limit)
    p = int(np.count_nonzero(~(dev < eps_classical)))

    rough = rough_stat_verdict(seq, RoughParams(limit, height, eps_classical), protocol)
    return RepairVerification(
        modification_zero, not violations, tuple(violations), classical, p, rough, eps_classical
    )


def repair_pipeline(
    seq: SequenceView,
    m_max: int = DEFAULT_M_MAX,
    protocol: AnalysisProtocol = DEFAULT_PROTOCOL,
    eps_classical: float | None = None,
) -> tuple[RepairResult, RepairVerification]:
    """build_band_chain -> derive_thresholds -> repair_sequence -> verify_repair."""
    chain = derive_thresholds(seq, build_band_chain(seq, m_max, protocol), protocol)
    result = repair_sequence(seq, chain, protocol)
    return result, verify_repair(seq, result, protocol, eps_classical)
