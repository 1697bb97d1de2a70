import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from photocells import (
    DegenerateInputError,
    MeanOccupancy,
    ModelMode,
    TruncatedPmf,
    TruncationCapExceeded,
    TruncationPolicy,
    absorption_pmf,
    cell_filling_pmf,
    conditional_response_pmf,
    detection_mean,
    detection_pmf,
    mean_transition_probability,
    no_response_probability,
    transition_probability,
)

GRID = [0.001, 0.01, 0.1, 1.0, 5.0, 10.0]
nbars = st.floats(min_value=0.0, max_value=20.0, allow_nan=False)


def assert_normalized(pmf, eps=1e-12):
    assert np.all(pmf.probs >= 0)
    assert abs(pmf.total() + pmf.tail_bound - 1.0) <= 2 * eps
    assert pmf.tail_bound <= eps


# -- types --------------------------------------------------------------


def test_mean_occupancy_validation():
    assert MeanOccupancy(1.0).transition_probability == 0.5
    for bad in (-1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            MeanOccupancy(bad)


@pytest.mark.parametrize("eps,terms", [(0.0, 10), (1.0, 10), (1e-6, 0), (1e-6, 2.5)])
def test_policy_validation(eps, terms):
    with pytest.raises(ValueError):
        TruncationPolicy(eps, terms)


def test_truncated_pmf_rejects_negative():
    with pytest.raises(ValueError):
        TruncatedPmf(np.array([0.5, -0.1]))


def test_functions_accept_mean_occupancy():
    assert detection_pmf(MeanOccupancy(1.0)).prob(0) == detection_pmf(1.0).prob(0)


# -- transition probability / cell filling / absorption -----------------


@pytest.mark.parametrize("nbar,expected", [(0, 0.0), (1, 0.5), (9, 0.9)])
def test_transition_probability(nbar, expected):
    assert transition_probability(nbar) == pytest.approx(expected, abs=1e-15)


def test_cell_filling_examples():
    empty = cell_filling_pmf(0.0)
    assert empty.prob(0) == 1.0 and empty.tail_bound == 0.0
    one = cell_filling_pmf(1.0)
    assert one.prob(0) == 0.5
    assert one.prob(2) == 0.125
    policy = TruncationPolicy()
    assert abs(one.mean() - 1.0) <= policy.epsilon * policy.max_terms


def test_cell_filling_tail_is_geometric_remainder():
    pmf = cell_filling_pmf(1.0, TruncationPolicy(1e-6))
    # P_x**(N+1) with N the last listed index
    assert pmf.tail_bound == pytest.approx(0.5 ** (pmf.k_max + 1), rel=1e-12)
    assert pmf.tail_bound <= 1e-6 < 0.5**pmf.k_max


def test_absorption_examples():
    assert absorption_pmf(0.0).prob(0) == 1.0
    assert absorption_pmf(1.0).prob(3) == pytest.approx(0.0625, abs=1e-15)
    pmf = absorption_pmf(2.0)
    direct = math.fsum(k * p for k, p in zip(pmf.k, pmf.probs))
    assert direct == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("nbar", GRID)
def test_cell_and_absorption_coincide(nbar):
    a, b = cell_filling_pmf(nbar), absorption_pmf(nbar)
    assert a.k_min == b.k_min and a.tail_bound == b.tail_bound
    np.testing.assert_array_equal(a.probs, b.probs)


def test_cap_exceeded():
    with pytest.raises(TruncationCapExceeded):
        cell_filling_pmf(10.0, TruncationPolicy(1e-12, 50))
    with pytest.raises(TruncationCapExceeded):
        detection_pmf(10.0, TruncationPolicy(1e-12, 200))


# -- detection PMF ------------------------------------------------------


def test_detection_zero_occupancy():
    pmf = detection_pmf(0.0)
    assert list(pmf.probs) == [1.0]
    assert pmf.k_min == 0 and pmf.tail_bound == 0.0


def test_detection_u0_is_ln2_at_unit_occupancy():
    assert detection_pmf(1.0).prob(0) == pytest.approx(math.log(2.0), abs=1e-12)
    assert no_response_probability(1.0) == pytest.approx(math.log(2.0), abs=1e-15)
    assert oracles.brute_u(1.0, 0) == pytest.approx(math.log(2.0), abs=1e-12)


def test_detection_low_intensity_ratio():
    pmf = detection_pmf(1e-4)
    for k in range(1, 6):
        assert abs(pmf.prob(k + 1) / pmf.prob(k) - 0.5) <= 1e-3


@pytest.mark.parametrize("nbar", [0.1, 1.0])
def test_detection_matches_brute_force(nbar):
    pmf = detection_pmf(nbar)
    for k in range(21):
        assert abs(pmf.prob(k) - oracles.brute_u(nbar, k)) <= 1e-10


@pytest.mark.parametrize("nbar", GRID)
def test_detection_normalized(nbar):
    assert_normalized(detection_pmf(nbar))


@settings(max_examples=40, deadline=None)
@given(nbars)
def test_detection_nonneg_normalized_monotone(nbar):
    pmf = detection_pmf(nbar)
    assert_normalized(pmf)
    assert np.all(np.diff(pmf.probs) <= 1e-300)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=1e-3, max_value=20.0), st.sampled_from([1e-6, 1e-9, 1e-12]))
def test_detection_respects_any_epsilon(nbar, eps):
    assert_normalized(detection_pmf(nbar, TruncationPolicy(eps)), eps)


# -- mean identity ------------------------------------------------------


@pytest.mark.parametrize("nbar", [0.0] + GRID)
def test_detection_mean_identity(nbar):
    est = detection_mean(nbar)
    assert abs(est.value - nbar) <= 1e-8
    # the remainder bound covers the gap
    assert est.value <= nbar + 1e-12
    assert nbar - est.value <= est.remainder + 1e-12


def test_detection_mean_five_against_direct_sum():
    pmf = detection_pmf(5.0, TruncationPolicy(1e-12))
    direct = math.fsum(k * p for k, p in zip(pmf.k, pmf.probs))
    assert direct == pytest.approx(5.0, abs=1e-8)
    assert detection_mean(5.0).value == pytest.approx(direct, abs=1e-12)


# -- mean transition probability ----------------------------------------


@pytest.mark.parametrize("mode", list(ModelMode))
def test_mean_transition_zero(mode):
    assert mean_transition_probability(0.0, mode) == 0.0


def test_mean_transition_exact_unit():
    assert mean_transition_probability(1.0) == pytest.approx(1 - math.log(2.0), abs=1e-15)
    assert oracles.brute_mean_ratio(1.0) == pytest.approx(1 - math.log(2.0), abs=1e-12)


def test_mean_transition_ratio_small_occupancy():
    exact = mean_transition_probability(0.01, ModelMode.EXACT)
    paper = mean_transition_probability(0.01, ModelMode.PAPER_APPROX)
    assert paper == transition_probability(0.01)
    assert 0.49 <= exact / paper <= 0.51
    assert exact == pytest.approx(oracles.brute_mean_ratio(0.01), rel=1e-12)


@pytest.mark.parametrize("nbar", [1e-8, 1e-5, 0.009, 0.011, 0.5, 3.0, 100.0])
def test_mean_transition_series_branch_matches_oracle(nbar):
    assert mean_transition_probability(nbar) == pytest.approx(oracles.brute_mean_ratio(nbar, 200_000), rel=1e-10)


@pytest.mark.parametrize("nbar", GRID + [0.3, 2.0, 20.0])
def test_bridge_identity(nbar):
    # closed form vs summed U_0: independent routes to the same number
    assert abs(mean_transition_probability(nbar) - (1.0 - detection_pmf(nbar).prob(0))) <= 1e-10


def test_mode_parse():
    assert ModelMode.parse("paper") is ModelMode.PAPER_APPROX
    assert ModelMode.parse("EXACT") is ModelMode.EXACT
    with pytest.raises(ValueError):
        ModelMode.parse("approx")


# -- conditional response PMF -------------------------------------------


def test_conditional_rejects_zero():
    with pytest.raises(DegenerateInputError):
        conditional_response_pmf(0.0)


@pytest.mark.parametrize("nbar", GRID + [1e-4, 50.0])
def test_conditional_exact_normalized(nbar):
    pmf = conditional_response_pmf(nbar)
    assert pmf.k_min == 1
    assert abs(pmf.total() + pmf.tail_bound - 1.0) <= 1e-9
    assert pmf.tail_bound <= 1e-12


def test_conditional_low_intensity_halving():
    pmf = conditional_response_pmf(1e-4)
    for k in range(1, 6):
        assert abs(pmf.prob(k) - 0.5**k) <= 1e-3


def test_conditional_h1_unit_occupancy():
    expected = oracles.brute_u(1.0, 1) / (1.0 - math.log(2.0))
    assert conditional_response_pmf(1.0).prob(1) == pytest.approx(expected, abs=1e-12)


def test_conditional_paper_mode_rescales():
    exact = conditional_response_pmf(1.0, ModelMode.EXACT)
    paper = conditional_response_pmf(1.0, "paper")
    ratio = mean_transition_probability(1.0) / transition_probability(1.0)
    np.testing.assert_allclose(paper.probs, exact.probs * ratio, rtol=1e-12)
    # not a distribution: sums to <n/(n+1)>/P_x
    assert paper.total() == pytest.approx(ratio, abs=1e-9)


def test_conditional_mean():
    pmf = conditional_response_pmf(0.5)
    assert pmf.mean() == pytest.approx(0.5 / mean_transition_probability(0.5), abs=1e-8)
