import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughstat.density import DEFAULT_PROTOCOL, AnalysisProtocol
from roughstat.dsl import builtin
from roughstat.errors import NotCauchyError, ThresholdError
from roughstat.repair import (
    Band,
    BandChain,
    Stage,
    build_band_chain,
    derive_thresholds,
    repair_pipeline,
    repair_sequence,
    verify_repair,
)
from roughstat.rough import SequenceView

EX21 = builtin("example21")
SMALL = AnalysisProtocol(checkpoints=(100, 200, 400, 800), zero_tol=0.05, stability_window=2, positive_tol=0.05)


def constant(c, n=10**6):
    return SequenceView(lambda k: c, n, lambda m: np.full(m, c))


def spiked_harmonic(n=10**6):
    def bulk(m):
        k = np.arange(1, m + 1, dtype=float)
        root = np.floor(np.sqrt(k))
        return np.where(root * root == k, k, 1.0 / k)

    return SequenceView(lambda k: float(bulk(k)[-1]), n, bulk)


def assert_nested(chain):
    previous = chain.seed
    for i, stage in enumerate(chain.stages, start=1):
        assert stage.m == i
        assert stage.band.within(previous)
        assert stage.band.height <= 2.0 ** (1 - stage.m)
        previous = stage.band


# ------------------------------------------------------------------- bands


def test_band_around_rounds_inward():
    band = Band.around(0.1, 0.2)
    assert band.lo >= -0.1 and band.hi <= 0.30000000000000004
    assert Band.around(5.0, 0.5) == Band(4.5, 5.5)
    with pytest.raises(ValueError):
        Band(1.0, 1.0)


def test_band_intersect():
    a, b = Band(0.0, 2.0), Band(1.0, 3.0)
    assert a.intersect(b) == Band(1.0, 2.0)
    assert a.intersect(Band(2.5, 3.0)) is None


# ------------------------------------------------------------------ chains


def test_constant_chain():
    chain = derive_thresholds(constant(5.0), build_band_chain(constant(5.0), m_max=4))
    assert [s.band.center for s in chain.stages] == [5.0] * 4
    assert [s.band.height for s in chain.stages] == [1.0, 0.5, 0.25, 0.125]
    assert chain.seed.height == 2.0
    assert chain.limit_estimate == 5.0
    assert chain.thresholds == (1000, 1001, 1002, 1003)
    assert_nested(chain)


def test_spiked_harmonic_limit():
    seq = spiked_harmonic()
    chain = build_band_chain(seq, m_max=10)
    assert abs(chain.limit_estimate) <= 2.0**-9
    assert_nested(chain)


def test_example21_limit_at_03():
    seq = SequenceView.from_program(EX21, 0.3, 10**6)
    chain = build_band_chain(seq, m_max=10)
    assert len(chain.stages) == 10
    assert abs(chain.limit_estimate - 1.0) <= 2.0**-9
    assert_nested(chain)


def test_alternating_is_not_cauchy_at_half():
    seq = SequenceView(lambda k: (-1.0) ** k, 10**6, lambda m: np.where(np.arange(1, m + 1) % 2 == 0, 1.0, -1.0))
    with pytest.raises(NotCauchyError):
        build_band_chain(seq)


def test_unbounded_is_not_cauchy():
    seq = SequenceView(float, 10**6, lambda m: np.arange(1, m + 1, dtype=float))
    with pytest.raises(NotCauchyError):
        build_band_chain(seq)


def brute_thresholds(values, chain, protocol):
    """J_m straight from the definition, one stage at a time."""
    cps = protocol.checkpoints
    last_allowed = cps[len(cps) - protocol.stability_window]
    out, previous = [], 0
    for stage in chain.stages:
        qualifying = None
        for n in reversed(cps):
            outside = sum(
                1 for v in values[:n] if not (math.isfinite(v) and stage.band.lo <= v <= stage.band.hi)
            )
            if outside * stage.m < n:
                qualifying = n
            else:
                break
        if qualifying is None or qualifying > last_allowed:
            break
        J = max(qualifying, previous + 1)
        if J > last_allowed:
            break
        out.append(J)
        previous = J
    return tuple(out)


def test_thresholds_against_definition():
    cps = (100, 400, 1600, 6400, 25600)
    proto = AnalysisProtocol(checkpoints=cps, zero_tol=0.1, stability_window=2)
    seq = spiked_harmonic(25600)
    chain = derive_thresholds(seq, build_band_chain(seq, 6, proto), proto)
    assert chain.thresholds == brute_thresholds(list(seq.values(25600)), chain, proto)
    # outside density ~ 1/sqrt(n) + 2^m/n drops below 1/m only once n clears m^2
    assert all(J > s.m**2 for J, s in zip(chain.thresholds, chain.stages))


def test_threshold_error_without_stage_one():
    # stage 1 only needs one term inside; a band below every term has none
    chain = BandChain(Band.around(-10.0, 1.0), 1, (Stage(1, Band.around(-10.0, 0.5), 1),))
    seq = SequenceView(float, 10**6, lambda m: np.arange(1, m + 1, dtype=float))
    with pytest.raises(ThresholdError):
        derive_thresholds(seq, chain)


# ------------------------------------------------------------------ repair


def test_constant_repair():
    result, check = repair_pipeline(constant(5.0), m_max=4)
    assert result.exceptional.members(10**6) == []
    assert (result.repaired_view.values() == 5.0).all()
    assert check.passed and check.exception_count == 0


def test_example21_repair():
    seq = SequenceView.from_program(EX21, 0.5, 10**6)
    result, check = repair_pipeline(seq, eps_classical=0.01)
    assert check.passed
    J1 = result.chain.stages[0].threshold
    members = result.exceptional.members(10**6)
    assert members and all(k > J1 and math.isqrt(k) ** 2 == k for k in members)
    # every violation of |g_k - 1| < 0.01 sits before the threshold J_1 or before
    # the first k with 0.5^k small enough, here k = 7
    g = result.repaired_view.values()
    bad = np.flatnonzero(~(np.abs(g - result.chain.limit_estimate) < 0.01)) + 1
    assert len(bad) == check.exception_count
    assert bad.max() <= J1
    assert all(math.isqrt(int(k)) ** 2 == k for k in bad if k >= 7)
    assert not any(abs(seq.value_at(k) - 1.0) < 0.01 for k in range(2, 7) if math.isqrt(k) ** 2 != k)


def test_forced_chain_on_unbounded_sequence_fails_check_a():
    seq = SequenceView(float, 10**6, lambda m: np.arange(1, m + 1, dtype=float))
    chain = BandChain(Band.around(1.0, 1.0), 1, (Stage(1, Band.around(1.0, 0.5), 1, threshold=1000),))
    result = repair_sequence(seq, chain)
    check = verify_repair(seq, result)
    assert result.modification_density.verdict.kind == "positive"
    assert not check.modification_zero and not check.passed


def test_substitution_exact_on_exceptional_set():
    seq = spiked_harmonic()
    result, check = repair_pipeline(seq)
    assert check.passed
    original = seq.values()
    repaired = result.repaired_view.values()
    changed = np.flatnonzero(original != repaired) + 1
    assert list(changed) == result.exceptional.members(10**6)
    assert all(result.repaired_view.value_at(int(k)) == result.chain.limit_estimate for k in changed[:50])


def test_repair_is_idempotent_on_convergent_sequence():
    seq = SequenceView(lambda k: 1.0 / k, 10**6, lambda m: 1.0 / np.arange(1, m + 1))
    result, check = repair_pipeline(seq, m_max=9)
    assert result.exceptional.members(10**6) == []
    assert check.passed


def test_modification_counts_below_n_over_m():
    seq = SequenceView.from_program(EX21, 0.3, 10**6)
    result, check = repair_pipeline(seq)
    assert check.threshold_bound and not check.threshold_violations
    for stage in result.chain.stages:
        for rec in result.modification_density.checkpoints:
            if rec.n > stage.threshold:
                assert rec.count * stage.m < rec.n


# -------------------------------------------------------------- properties


@st.composite
def cauchy_like(draw):
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    limit = draw(st.floats(-100, 100))
    decay = draw(st.sampled_from([0.5, 1.0, 2.0]))
    k = np.arange(1, 801, dtype=float)
    values = limit + rng.uniform(-1, 1, 800) / k**decay
    spikes = rng.random(800) < draw(st.sampled_from([0.0, 0.005, 0.02]))
    values[spikes] = rng.uniform(-1e6, 1e6, int(spikes.sum()))
    return values


@settings(max_examples=40, deadline=None)
@given(cauchy_like(), st.integers(1, 20))
def test_chain_invariants(values, m_max):
    seq = SequenceView.from_array(values)
    chain = build_band_chain(seq, m_max, SMALL)
    assert_nested(chain)
    assert chain.final_band.within(chain.seed)
    try:
        derived = derive_thresholds(seq, chain, SMALL)
    except ThresholdError:
        return
    Js = derived.thresholds
    assert all(b > a for a, b in zip(Js, Js[1:]))
    assert_nested(derived)


def test_default_protocol_budget():
    with pytest.raises(Exception):
        build_band_chain(constant(1.0, 1000), protocol=DEFAULT_PROTOCOL)
