import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.errors import ConfigurationError, EmptyCampaignError
from src.core.harness import CampaignResult, CompileResult, Verdict
from src.core.metrics import (
    MetricParams,
    aggregate_runs,
    compute_cq,
    compute_lcq,
    lcq_curve,
    lcq_window,
    relative_std_dev,
)


def campaign(pairs, language="toy", run_id="r") -> CampaignResult:
    results = [CompileResult(index=i, size=size, verdict=verdict) for i, (size, verdict) in enumerate(pairs)]
    return CampaignResult(language=language, run_id=run_id, results=results)


verdicts = st.sampled_from(list(Verdict))
outcomes = st.lists(st.tuples(st.integers(min_value=0, max_value=64), verdicts), min_size=1, max_size=40)


# ----------------------------------------------------------------------
# CQ
# ----------------------------------------------------------------------
def test_cq_counts_timeouts_and_crashes_as_failures():
    c = campaign([(1, Verdict.ACCEPTED), (2, Verdict.REJECTED), (3, Verdict.TIMEOUT), (4, Verdict.CRASHED)])

    assert compute_cq(c) == 25.0


def test_cq_extremes():
    assert compute_cq(campaign([(1, Verdict.ACCEPTED)] * 3)) == 100.0
    assert compute_cq(campaign([(1, Verdict.REJECTED)] * 3)) == 0.0


def test_cq_of_empty_campaign():
    with pytest.raises(EmptyCampaignError, match="'toy'"):
        compute_cq(campaign([]))


@settings(max_examples=1000, deadline=None)
@given(outcomes)
def test_cq_is_population_weighted_lcq(pairs):
    c = campaign(pairs)
    m = MetricParams(size_bound=64, epsilon=0)

    curve = [p for p in lcq_curve(c, m) if p.defined]
    weighted = sum(p.lcq * p.population for p in curve) / sum(p.population for p in curve)

    assert weighted == pytest.approx(compute_cq(c))


@settings(max_examples=1000, deadline=None)
@given(outcomes, st.data())
def test_accepting_one_more_program_never_lowers_any_quotient(pairs, data):
    flippable = [i for i, (_, verdict) in enumerate(pairs) if verdict != Verdict.ACCEPTED]
    if not flippable:
        return
    k = data.draw(st.sampled_from(flippable))
    flipped = list(pairs)
    flipped[k] = (pairs[k][0], Verdict.ACCEPTED)
    m = MetricParams(size_bound=64, epsilon=data.draw(st.integers(0, 8)))

    assert compute_cq(campaign(flipped)) > compute_cq(campaign(pairs))
    for before, after in zip(lcq_curve(campaign(pairs), m), lcq_curve(campaign(flipped), m)):
        assert before.population == after.population
        if before.defined:
            assert after.lcq >= before.lcq


@settings(max_examples=200, deadline=None)
@given(outcomes, st.integers(1, 5), st.integers(0, 8))
def test_quotients_ignore_uniform_replication(pairs, copies, epsilon):
    c = campaign(pairs)
    repeated = campaign([pair for pair in pairs for _ in range(copies)])
    m = MetricParams(size_bound=64, epsilon=epsilon)

    assert compute_cq(repeated) == pytest.approx(compute_cq(c))
    for once, many in zip(lcq_curve(c, m), lcq_curve(repeated, m)):
        assert many.population == copies * once.population
        assert many.defined == once.defined
        if once.defined:
            assert many.lcq == pytest.approx(once.lcq)


# ----------------------------------------------------------------------
# LCQ
# ----------------------------------------------------------------------
def test_lcq_window_is_closed():
    m = MetricParams(size_bound=64, epsilon=5)
    c = campaign([(5, Verdict.ACCEPTED), (15, Verdict.REJECTED), (4, Verdict.ACCEPTED), (16, Verdict.ACCEPTED)])

    assert lcq_window(c, 10, m) == (1, 2)
    assert compute_lcq(c, 10, m) == 50.0


def test_lcq_undefined_without_samples():
    m = MetricParams(size_bound=64, epsilon=2)
    c = campaign([(10, Verdict.ACCEPTED)])

    assert compute_lcq(c, 30, m) is None
    point = lcq_curve(c, m)[30]
    assert not point.defined
    assert point.population == 0


def test_curve_covers_zero_to_bound():
    m = MetricParams(size_bound=48, epsilon=5, lcq_step=4)

    curve = lcq_curve(campaign([(10, Verdict.ACCEPTED)]), m)

    assert [p.x for p in curve] == list(range(0, 49, 4))


@settings(max_examples=200, deadline=None)
@given(outcomes, st.integers(0, 10), st.integers(1, 5))
def test_curve_agrees_with_pointwise_lcq(pairs, epsilon, step):
    c = campaign(pairs)
    m = MetricParams(size_bound=64, epsilon=epsilon, lcq_step=step)

    for point in lcq_curve(c, m):
        accepted, population = lcq_window(c, point.x, m)
        assert point.population == population
        assert point.lcq == compute_lcq(c, point.x, m)
        assert point.defined == (population > 0)


def test_multi_run_curve_averages_defined_values_only():
    m = MetricParams(size_bound=50, epsilon=0)
    a = campaign([(10, Verdict.ACCEPTED)], run_id="a")
    b = campaign([(10, Verdict.REJECTED), (40, Verdict.ACCEPTED)], run_id="b")

    curve = lcq_curve([a, b], m)

    assert curve[10].lcq == 50.0
    assert curve[10].population == 2
    assert curve[40].lcq == 100.0
    assert curve[20].lcq is None


# ----------------------------------------------------------------------
# Aggregation
# ----------------------------------------------------------------------
def test_relative_std_dev_uses_sample_deviation():
    assert relative_std_dev([1.0, 2.0, 3.0]) == pytest.approx(50.0)
    assert relative_std_dev([42.0]) is None
    assert relative_std_dev([0.0, 0.0]) is None


def test_aggregate_runs():
    runs = [
        campaign([(1, Verdict.ACCEPTED), (2, Verdict.REJECTED)], run_id="a"),
        campaign([(1, Verdict.ACCEPTED), (2, Verdict.ACCEPTED), (3, Verdict.TIMEOUT), (3, Verdict.REJECTED)], run_id="b"),
    ]

    report = aggregate_runs(runs, MetricParams(size_bound=8, epsilon=1))

    assert report.per_run_cq == [50.0, 50.0]
    assert report.cq == 50.0
    assert report.relative_std_dev == 0.0
    assert report.run_ids == ["a", "b"]
    assert report.verdict_breakdown == {"accepted": 3, "rejected": 2, "timeout": 1, "crashed": 0}
    assert len(report.per_run_curves) == 2
    assert len(report.lcq_curve) == 9


def test_aggregate_single_run_has_no_deviation():
    report = aggregate_runs([campaign([(1, Verdict.ACCEPTED)])], MetricParams(size_bound=4))

    assert report.relative_std_dev is None


def test_aggregate_rejects_mixed_languages():
    with pytest.raises(ConfigurationError):
        aggregate_runs([campaign([(1, Verdict.ACCEPTED)], "C"), campaign([(1, Verdict.ACCEPTED)], "Go")], MetricParams())


def test_aggregate_needs_runs():
    with pytest.raises(EmptyCampaignError):
        aggregate_runs([], MetricParams())
