import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agglineage import GuaranteeParams, ParameterError, compute_budget, error_for_budget
from helpers import BUDGET_CASES


@pytest.mark.parametrize("m,p,epsilon,expected", BUDGET_CASES)
def test_budget_formula(m, p, epsilon, expected):
    assert compute_budget(GuaranteeParams(m=m, p=p, epsilon=epsilon)) == expected


def test_budget_is_deterministic():
    g = GuaranteeParams(m=10**6, p=1e-6, epsilon=0.04)
    assert compute_budget(g) == compute_budget(g) == 8852


@pytest.mark.parametrize(
    "m,p,epsilon",
    [
        (0, 0.5, 0.1),
        (-1, 0.5, 0.1),
        (10, 0.0, 0.1),
        (10, 1.0, 0.1),
        (10, 1.5, 0.1),
        (10, 0.5, 0.0),
        (10, 0.5, -0.1),
    ],
)
def test_bad_guarantee_params(m, p, epsilon):
    with pytest.raises(ParameterError):
        GuaranteeParams(m=m, p=p, epsilon=epsilon)


@pytest.mark.parametrize(
    "b,m,p",
    [(0, 10, 0.5), (-3, 10, 0.5), (10, 0, 0.5), (10, 10, 0.0), (10, 10, 1.0)],
)
def test_bad_inversion_params(b, m, p):
    with pytest.raises(ParameterError):
        error_for_budget(b, m, p)


def test_inversion_certifies_demo_budget():
    epsilon = error_for_budget(8852, 10**6, 1e-6)
    assert epsilon <= 0.04
    assert compute_budget(GuaranteeParams(10**6, 1e-6, epsilon)) <= 8852


def test_inversion_derived_case():
    epsilon = error_for_budget(415, 100, 0.05)
    assert epsilon <= 0.1
    assert compute_budget(GuaranteeParams(100, 0.05, epsilon)) <= 415


def test_quadruple_budget_halves_epsilon():
    for b in (1, 7, 415, 8852):
        full = error_for_budget(b, 10**6, 1e-6)
        quarter = error_for_budget(4 * b, 10**6, 1e-6)
        assert quarter == pytest.approx(full / 2, rel=1e-12)


@given(
    m=st.integers(min_value=1, max_value=10**9),
    p=st.floats(min_value=1e-9, max_value=0.999),
    epsilon=st.floats(min_value=1e-3, max_value=2.0),
)
def test_budget_round_trip_property(m, p, epsilon):
    g = GuaranteeParams(m=m, p=p, epsilon=epsilon)
    b = compute_budget(g)
    assert b >= 1
    certified = error_for_budget(b, m, p)
    # the budget's certified epsilon is never worse than requested, and
    # re-budgeting at it never asks for more trials
    assert certified <= epsilon or math.isclose(certified, epsilon, rel_tol=1e-12)
    assert compute_budget(GuaranteeParams(m, p, certified)) <= b


@given(m=st.integers(min_value=1, max_value=10**6))
def test_budget_monotone_in_m(m):
    g1 = GuaranteeParams(m=m, p=0.01, epsilon=0.05)
    g2 = GuaranteeParams(m=2 * m, p=0.01, epsilon=0.05)
    assert compute_budget(g2) >= compute_budget(g1)
