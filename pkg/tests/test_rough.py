import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from roughstat.density import AnalysisProtocol
from roughstat.dsl import builtin, compile_program, compile_target
from roughstat.errors import CandidateError, ConfigurationError, EstimationError, ProgramError
from roughstat.rough import (
    RoughParams,
    SequenceView,
    bad_index_set,
    classical_rough_verdict,
    combine_verdicts,
    default_candidates,
    linearity_check,
    minimal_roughness,
    pointwise_report,
    rough_cauchy_verdict,
    rough_stat_verdict,
)

EX21 = builtin("example21")
SMALL = AnalysisProtocol(checkpoints=(100, 200, 400, 800), zero_tol=0.05, stability_window=2, positive_tol=0.05)


def ex21(x, n=10**6):
    return SequenceView.from_program(EX21, x, n)


def alternating(n=10**6):
    return SequenceView(lambda k: (-1.0) ** k, n, lambda m: np.where(np.arange(1, m + 1) % 2 == 0, 1.0, -1.0))


def constant(c, n=10**6):
    return SequenceView(lambda k: c, n, lambda m: np.full(m, c))


# ----------------------------------------------------------------- examples


def test_bad_index_set_example21():
    bad = bad_index_set(ex21(0.5, 100), RoughParams(0.0, 1.0, 0.01))
    assert bad.members(100) == [4, 9, 16, 25, 36, 49, 64, 81, 100]
    assert [k for k in range(1, 101) if bad(k)] == bad.members(100)


def test_bad_index_set_trivial_cases():
    assert bad_index_set(constant(5.0, 100), RoughParams(5.0, 0.0, 0.1)).members(100) == []
    assert bad_index_set(alternating(100), RoughParams(0.0, 0.5, 0.1)).members(100) == list(range(1, 101))


def test_rough_stat_verdict_examples():
    assert rough_stat_verdict(ex21(0.5), RoughParams(0.0, 1.0, 0.01)).verdict == "accept"
    rep = rough_stat_verdict(alternating(), RoughParams(0.0, 0.5, 0.1))
    assert rep.verdict == "reject"
    assert all(rec.count == rec.n for rec in rep.density_report.checkpoints)
    assert rough_stat_verdict(constant(3.25), RoughParams(3.25, 0.0, 1e-9)).verdict == "accept"


def test_rough_stat_budget():
    with pytest.raises(ConfigurationError):
        rough_stat_verdict(constant(1.0, 1000), RoughParams(1.0, 0.0, 0.1))


def test_classical_examples():
    assert classical_rough_verdict(alternating(10**4), RoughParams(0.0, 1.0, 0.1), 10**4).verdict == "accept"
    v = classical_rough_verdict(ex21(0.5, 10**4), RoughParams(0.0, 1.0, 0.01), 10**4)
    # 10000 = 100^2 is itself within the horizon, so it is the latest square spike
    assert (v.verdict, v.latest_violation) == ("reject", 10000)
    v = classical_rough_verdict(ex21(0.5, 9999), RoughParams(0.0, 1.0, 0.01), 9999)
    assert (v.verdict, v.latest_violation) == ("reject", 9801)
    seq = SequenceView(lambda k: 1 / k, 10**4, lambda m: 1.0 / np.arange(1, m + 1))
    assert classical_rough_verdict(seq, RoughParams(0.0, 0.0, 0.01), 10**4).verdict == "accept"


def test_minimal_roughness_examples():
    assert minimal_roughness(constant(2.5), 2.5).r_hat == 0.0
    assert minimal_roughness(alternating(), 0.0).r_hat == 1.0
    est = minimal_roughness(ex21(0.5), 0.0)
    assert 0.98 <= est.r_hat <= 1.0
    assert est.cross_check.verdict == "accept"


def test_minimal_roughness_errors():
    seq = SequenceView(lambda k: math.nan, 10**6, lambda m: np.full(m, np.nan))
    with pytest.raises(EstimationError):
        minimal_roughness(seq, 0.0)
    with pytest.raises(ConfigurationError):
        minimal_roughness(constant(1.0), 1.0, tail_delta=1.5)


def test_cauchy_examples():
    assert rough_cauchy_verdict(alternating(), 2.0, 0.1).verdict == "accept"
    rep = rough_cauchy_verdict(ex21(0.5), 2.0, 0.01, candidate_Ns=[250001, 10])
    assert (rep.verdict, rep.witness_N) == ("accept", 250001)
    seq = SequenceView(float, 10**6, lambda m: np.arange(1, m + 1, dtype=float))
    assert rough_cauchy_verdict(seq, 5.0, 0.5).verdict == "reject"


def test_cauchy_skips_nonfinite_anchors():
    values = np.ones(1000)
    values[9] = np.inf
    seq = SequenceView.from_array(values)
    rep = rough_cauchy_verdict(seq, 0.0, 0.1, candidate_Ns=[10, 20], protocol=SMALL)
    assert rep.skipped == (10,) and rep.witness_N == 20
    with pytest.raises(CandidateError):
        rough_cauchy_verdict(seq, 0.0, 0.1, candidate_Ns=[10], protocol=SMALL)


def test_default_candidates_deterministic():
    assert default_candidates(10**6) == default_candidates(10**6)
    pool = default_candidates(10**6)
    assert pool[:3] == [250000, 500000, 750000] and len(set(pool)) == len(pool)


def test_pointwise_examples():
    zero = compile_target("0")
    grid = [i / 10 for i in range(11)]
    report = pointwise_report(EX21, zero, grid, 1.0, 0.01)
    assert report.overall == "accept" and len(report.points) == 11
    assert pointwise_report(EX21, zero, [0.5], 0.5, 0.01).overall == "reject"
    assert pointwise_report(compile_program("0"), zero, [-3.0, 7.0], 0.0, 1e-6, SMALL).overall == "accept"


def test_pointwise_errors():
    with pytest.raises(ProgramError):
        pointwise_report(EX21, compile_program("k"), [0.5], 1.0, 0.01)
    with pytest.raises(ConfigurationError):
        pointwise_report(EX21, compile_target("0"), [1.5], 1.0, 0.01)


def test_pointwise_eval_errors_are_bad():
    prog = compile_program("1 / (k - 10)")
    rep = pointwise_report(prog, compile_target("0"), [0.0], 0.0, 0.5, SMALL)
    # |1/(k-10)| >= 0.5 for k in 8..12, and k = 10 is a division error
    assert rep.points[0][1].witness_bad_indices == (8, 9, 10, 11, 12)


def test_combine_verdicts():
    assert combine_verdicts(["accept", "accept"]) == "accept"
    assert combine_verdicts(["accept", "undecided", "reject"]) == "reject"
    assert combine_verdicts(["accept", "undecided"]) == "undecided"


def test_linearity_examples():
    zero = compile_target("0")
    grid = [0.2, 0.5]
    assert linearity_check(EX21, EX21, zero, zero, 0.0, 0.0, 1.0, 1.0, grid, protocol=SMALL).verdict == "accept"
    res = linearity_check(EX21, EX21, zero, zero, 1.0, 1.0, 1.0, 1.0, grid)
    assert res.verdict == "accept" and res.roughness == 2.0
    res = linearity_check(EX21, compile_program("k"), zero, zero, 1.0, 0.0, 1.0, 0.0, grid)
    assert res.verdict == "accept" and res.roughness == 1.0


def test_linearity_vacuous_premise():
    zero = compile_target("0")
    res = linearity_check(EX21, EX21, zero, zero, 1.0, 1.0, 0.5, 0.5, [0.5], protocol=SMALL)
    assert res.verdict == "vacuous" and not res.premise_holds


# ---------------------------------------------------------------- properties

dyadic = st.integers(-2**12, 2**12).map(lambda i: i / 64.0)
radii = st.integers(0, 2**8).map(lambda i: i / 64.0)
epsilons = st.integers(1, 2**8).map(lambda i: i / 64.0)
powers_of_two = st.sampled_from([0.25, 0.5, 2.0, 4.0, 1024.0, -0.5, -2.0, -8.0])


@st.composite
def dyadic_arrays(draw, n=800):
    """A noisy band around a center plus sparse spikes, all multiples of 1/64."""
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    center = draw(st.integers(-256, 256))
    spread = draw(st.integers(0, 128))
    spike_rate = draw(st.sampled_from([0.0, 0.001, 0.01, 0.2, 0.6]))
    ints = center + rng.integers(-spread, spread + 1, n)
    spikes = rng.random(n) < spike_rate
    ints = np.where(spikes, ints + rng.integers(-4096, 4097, n), ints)
    return [float(i) / 64.0 for i in ints]


arrays = dyadic_arrays()


@settings(max_examples=60, deadline=None)
@given(arrays, dyadic, radii, radii, epsilons)
def test_monotone_in_r(values, target, r1, r2, eps):
    r1, r2 = sorted((r1, r2))
    seq = SequenceView.from_array(values)
    lo = bad_index_set(seq, RoughParams(target, r1, eps)).mask(800)
    hi = bad_index_set(seq, RoughParams(target, r2, eps)).mask(800)
    assert not (hi & ~lo).any()
    if rough_stat_verdict(seq, RoughParams(target, r1, eps), SMALL).verdict == "accept":
        assert rough_stat_verdict(seq, RoughParams(target, r2, eps), SMALL).verdict == "accept"


@settings(max_examples=60, deadline=None)
@given(arrays, dyadic, radii, epsilons, epsilons)
def test_monotone_in_eps(values, target, r, e1, e2):
    e1, e2 = sorted((e1, e2))
    seq = SequenceView.from_array(values)
    small = bad_index_set(seq, RoughParams(target, r, e1)).mask(800)
    large = bad_index_set(seq, RoughParams(target, r, e2)).mask(800)
    assert not (large & ~small).any()


@settings(max_examples=60, deadline=None)
@given(arrays, dyadic, radii, epsilons, powers_of_two)
def test_scaling_is_exact(values, target, r, eps, c):
    seq = SequenceView.from_array(values)
    scaled = SequenceView.from_array([c * v for v in values])
    a = bad_index_set(seq, RoughParams(target, r, eps)).mask(800)
    b = bad_index_set(scaled, RoughParams(c * target, abs(c) * r, abs(c) * eps)).mask(800)
    assert (a == b).all()
    ra = minimal_roughness(seq, target, SMALL)
    rb = minimal_roughness(scaled, c * target, SMALL)
    assert [abs(c) * q for _, q in ra.per_checkpoint] == [q for _, q in rb.per_checkpoint]
    assert rb.r_hat == abs(c) * ra.r_hat


@settings(max_examples=60, deadline=None)
@given(arrays, dyadic, radii, epsilons, dyadic)
def test_translation_invariance(values, target, r, eps, shift):
    seq = SequenceView.from_array(values)
    moved = SequenceView.from_array([v + shift for v in values])
    p, q = RoughParams(target, r, eps), RoughParams(target + shift, r, eps)
    assert (bad_index_set(seq, p).mask(800) == bad_index_set(moved, q).mask(800)).all()
    assert rough_stat_verdict(seq, p, SMALL).verdict == rough_stat_verdict(moved, q, SMALL).verdict
    assert minimal_roughness(seq, target, SMALL).r_hat == minimal_roughness(moved, target + shift, SMALL).r_hat


@settings(max_examples=60, deadline=None)
@given(arrays, dyadic, radii, epsilons)
def test_classical_implies_statistical(values, target, r, eps):
    seq = SequenceView.from_array(values)
    params = RoughParams(target, r, eps)
    if classical_rough_verdict(seq, params, 800).verdict == "accept":
        assert rough_stat_verdict(seq, params, SMALL).verdict == "accept"


@settings(max_examples=60, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.floats(-5, 5),
    st.floats(0, 2),
    st.floats(0.01, 1),
    st.integers(1, 800),
)
def test_convergence_implies_cauchy_at_double(seed, target, r, eps, N):
    rng = np.random.default_rng(seed)
    values = target + r * rng.uniform(-1, 1, 800)
    values[rng.random(800) < 0.01] += 50.0
    seq = SequenceView.from_array(values)
    assume(abs(values[N - 1] - target) < r + eps)
    if rough_stat_verdict(seq, RoughParams(target, r, eps), SMALL).verdict == "accept":
        rep = rough_cauchy_verdict(seq, 2 * r, 2 * eps, [N], SMALL)
        assert rep.verdict == "accept"


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.one_of(st.floats(-10, 10), st.just(math.nan), st.just(math.inf)), min_size=1, max_size=400),
    st.floats(-10, 10),
    st.floats(0, 5),
    st.floats(0.001, 5),
)
def test_brute_force_count(values, target, r, eps):
    n = len(values)
    seq = SequenceView.from_array(values)
    proto = AnalysisProtocol(checkpoints=(n,), stability_window=1)
    rep = rough_stat_verdict(seq, RoughParams(target, r, eps), proto)
    count = 0
    for v in values:
        d = abs(v - target)
        if not (d < r + eps):
            count += 1
    assert rep.density_report.final.count == count
