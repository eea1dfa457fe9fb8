"""Gamma, the truncated exponential, sharp constants and the coefficient
recursion.

Reference values for non-integer arguments were computed once with mpmath at
40 digits and are frozen here.
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from exactgrowth.errors import DomainError, HypothesisViolation, ParameterError
from exactgrowth.radial_core import SpaceParams
from exactgrowth.special_constants import (
    beta_0k,
    beta_0k_even_branch,
    c1m_closed,
    c_epsilon,
    coefficient_table,
    exp_p,
    exp_p_integer_reference,
    gamma_fn,
    hardy_chain_constants,
    hardy_constant_first_order,
    hardy_constant_second_order,
    log_exp_p,
    verify_beta_identities,
)

GAMMA_REFERENCE = {
    0.1: 9.5135076986687318363,
    0.5: 1.7724538509055160273,
    2.5: 1.3293403881791370205,
    7.3: 1271.4236336639092731,
    30.5: 4.8226969334909086011e31,
}

EXP_P_REFERENCE = {
    (1.5, 0.5): 1.1255646869698814035,
    (1.5, 3.0): 19.798195673654211493,
    (1.5, 20.0): 485165195.28657633788,
    (2.5, 0.5): 0.32768012616701604761,
    (2.5, 3.0): 17.843785626042531807,
    (2.5, 20.0): 485165190.24031129384,
    (3.7, 0.5): 0.042466105092601115687,
    (3.7, 3.0): 13.007180490472102885,
    (3.7, 20.0): 485165080.72311287633,
}

# (k, p, theta, gamma, eta) -> value from the Gamma-ratio formula in mpmath
BETA_REFERENCE = {
    (3, 2.0, 2.5, 3.0, 3.0): 36.0,
    (4, 2.0, 2.5, 3.0, 3.0): 9.0,
    (5, 2.0, 2.5, 3.0, 3.0): 81.0,
    (4, 1.5, 4.0, 4.5, 1.0): 2315.25,
    (3, 3.0, 3.0, 3.5, 0.5): 10.89276566120835999,
}


def space(k, p, theta, gamma, eta):
    alpha_k = k * p - 1.0
    alphas = tuple(alpha_k - (k - i) * p for i in range(k + 1))
    return SpaceParams(k, p, alphas, theta, gamma, eta)


@st.composite
def admissible_space(draw, max_k=8):
    """Random parameters satisfying the sharp-constant hypotheses."""
    k = draw(st.integers(1, max_k))
    p = draw(st.floats(1.2, 4.0))
    gap = draw(st.floats(0.2, 2.0))
    theta = (k // 2) * gap - 1.0 + draw(st.floats(0.1, 3.0))
    gamma = theta + 2.0 - gap
    eta = draw(st.floats(-0.9, 5.0))
    return space(k, p, theta, gamma, eta)


class TestGamma:
    @pytest.mark.parametrize("x,expected", [(1.0, 1.0), (5.0, 24.0), (10.0, 362880.0)])
    def test_factorials(self, x, expected):
        assert gamma_fn(x) == pytest.approx(expected, rel=1e-13)

    def test_half_squared_is_pi(self):
        assert gamma_fn(0.5) ** 2 == pytest.approx(math.pi, rel=1e-13)

    @pytest.mark.parametrize("x", sorted(GAMMA_REFERENCE))
    def test_reference_values(self, x):
        assert gamma_fn(x) == pytest.approx(GAMMA_REFERENCE[x], rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -0.5, -3.0])
    def test_rejects_non_positive(self, x):
        with pytest.raises(DomainError):
            gamma_fn(x)

    @given(st.floats(0.1, 50.0))
    def test_recurrence(self, x):
        assert gamma_fn(x + 1) == pytest.approx(x * gamma_fn(x), rel=1e-12)


class TestExpP:
    def test_two_at_one(self):
        assert exp_p(2, 1.0) == pytest.approx(math.e - 1, rel=1e-14)

    def test_three_at_one(self):
        assert exp_p(3, 1.0) == pytest.approx(math.e - 2, rel=1e-14)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.7])
    def test_zero(self, p):
        assert exp_p(p, 0.0) == 0.0

    @pytest.mark.parametrize("key", sorted(EXP_P_REFERENCE))
    def test_reference_values(self, key):
        p, t = key
        assert exp_p(p, t) == pytest.approx(EXP_P_REFERENCE[key], rel=1e-13)

    @pytest.mark.parametrize("p,t", [(1.5, 800.0), (2.5, 1000.0), (3.7, 750.0)])
    def test_log_space_beyond_threshold(self, p, t):
        # log exp_p(t) = t + log P(p-1, t) and the incomplete-Gamma tail is
        # below double precision here
        assert log_exp_p(p, t) == pytest.approx(t, rel=1e-15)
        assert math.isinf(exp_p(p, t))

    def test_log_matches_value_below_threshold(self):
        t = np.linspace(0.5, 600.0, 40)
        np.testing.assert_allclose(log_exp_p(2.5, t), np.log(exp_p(2.5, t)), rtol=1e-14)

    def test_log_continuous_across_threshold(self):
        lo, hi = log_exp_p(2.0, 699.999999), log_exp_p(2.0, 700.000001)
        assert hi - lo == pytest.approx(2e-6, rel=1e-3)

    def test_rejects_negative_argument(self):
        with pytest.raises(ParameterError):
            exp_p(2.0, -1.0)

    @pytest.mark.parametrize("p", [2, 3, 4, 5])
    def test_integer_closed_form(self, p):
        t = np.linspace(0.0, 50.0, 1000)
        err = np.abs(exp_p(p, t) - exp_p_integer_reference(p, t)) / np.exp(t)
        assert err.max() <= 1e-10

    @given(st.floats(1.01, 6.0), st.floats(0.0, 200.0))
    def test_bounded_by_exponential(self, p, t):
        assert exp_p(p, t) <= math.exp(t) * (1 + 1e-14)

    @given(st.floats(1.01, 6.0), st.floats(0.0, 50.0), st.floats(1.0, 5.0))
    def test_power_below_scaled_argument(self, p, t, q):
        assert exp_p(p, t) ** q <= exp_p(p, q * t) * (1 + 1e-12)


class TestBeta:
    def test_first_order(self):
        assert beta_0k(space(1, 2.0, 1.0, 1.0, 0.0)) == 1.0

    def test_second_order(self):
        assert beta_0k(SpaceParams.critical(2, 2.0, 3.0)) == pytest.approx(16.0, rel=1e-15)

    @given(admissible_space(max_k=2))
    def test_even_branch_reduces_at_two(self, params):
        assume(params.k == 2)
        assert beta_0k_even_branch(params) == pytest.approx(beta_0k(params), rel=1e-12)

    @pytest.mark.parametrize("key", sorted(BETA_REFERENCE))
    def test_reference_values(self, key):
        assert beta_0k(space(*key)) == pytest.approx(BETA_REFERENCE[key], rel=1e-12)

    def test_rejects_gap_violation(self):
        with pytest.raises(HypothesisViolation):
            beta_0k(space(2, 2.0, 1.0, 5.0, 0.0))

    def test_rejects_theta_bound(self):
        # floor(k/2)(theta+2-gamma) - 1 = 2*3 - 1 = 5 > theta
        with pytest.raises(HypothesisViolation):
            beta_0k(space(4, 2.0, 4.0, 3.0, 0.0))

    def test_identities_trivial_at_two(self):
        params = SpaceParams.critical(2, 2.0, 3.0)
        lhs, rhs = verify_beta_identities(params)
        assert lhs == pytest.approx(16.0) and rhs == pytest.approx(16.0)

    @pytest.mark.parametrize("k", [4, 5])
    def test_identities_fixed_params(self, k):
        # theta = gamma = 3 leaves the Gamma ratio with a pole at k = 5, so
        # the admissible example uses theta = 2.5
        lhs, rhs = verify_beta_identities(space(k, 2.0, 2.5, 3.0, 3.0))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @given(admissible_space())
    def test_identities(self, params):
        lhs, rhs = verify_beta_identities(params)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestCoefficients:
    def test_first_column(self):
        table = coefficient_table(1.7, 2.4, 3)
        assert table[1, 1] == 2.4 - 1.0
        assert table[2, 1] == -1.0

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_leading_vanishes_when_gap_is_two(self, m):
        table = coefficient_table(1.0, 3.0, 5)
        assert table[1, m] == 0.0

    def test_hand_unrolled_second_column(self):
        # theta=1, gamma=2: d = gamma-2-theta = -1 and
        # c12 = -1 * d * (gamma - 1 + d) * c11 = 1 * 0 * 1 = 0
        # c22 = -1*d*(gamma-1+d)*c21 + (gamma-1+2d)*c11 = 0 + (-1)(1) = -1
        # c32 = (gamma-1+2d)*c21 - c11 = (-1)(-1) - 1 = 0
        # c42 = -c21 = 1
        table = coefficient_table(1.0, 2.0, 2)
        np.testing.assert_allclose(table.column(2), [0.0, -1.0, 0.0, 1.0], atol=0)
        # the closed form sits on a Gamma pole here and is rejected
        with pytest.raises(ParameterError):
            c1m_closed(1.0, 2.0, 2)

    def test_closed_form_first(self):
        assert c1m_closed(2.0, 2.5, 1) == 1.5

    def test_closed_form_pole_rejected(self):
        with pytest.raises(ParameterError):
            c1m_closed(3.0, 3.0, 2)

    def test_closed_form_degenerate_gap(self):
        with pytest.raises(ParameterError):
            c1m_closed(1.0, 3.0, 2)

    @given(st.floats(0.1, 1.5), st.floats(8.5, 30.0))
    def test_closed_form_matches_recursion(self, gap, ratio):
        gamma = 1.0 + ratio * gap
        theta = gamma - 2.0 + gap
        table = coefficient_table(theta, gamma, 8)
        for m in range(1, 9):
            assert c1m_closed(theta, gamma, m) == pytest.approx(table[1, m], rel=1e-12)

    def test_entries_finite(self):
        table = coefficient_table(2.3, 2.9, 8)
        assert np.all(np.isfinite(table.c))


class TestHardyConstants:
    def test_first_order_values(self):
        assert hardy_constant_first_order(3.0, 2.0) == 1.0
        assert hardy_constant_first_order(2.0, 2.0) == 2.0

    def test_first_order_boundary(self):
        with pytest.raises(ParameterError):
            hardy_constant_first_order(1.0, 2.0)

    def test_second_order_values(self):
        assert hardy_constant_second_order(3.0, 1.0, 2.0) == 1.0
        assert hardy_constant_second_order(2.0, 0.0, 2.0) == 4.0

    def test_second_order_boundary(self):
        with pytest.raises(ParameterError):
            hardy_constant_second_order(3.0, 3.0, 2.0)

    def test_chain_steps(self):
        # gamma=4, theta=3: the weight moves by (theta+2-gamma)p = 2 per step
        chain = hardy_chain_constants(4.0, 3.0, 0.0, 2.0, 3)
        assert chain == [
            hardy_constant_second_order(4.0, 0.0, 2.0),
            hardy_constant_second_order(4.0, 2.0, 2.0),
        ]


class TestEpsilonConstant:
    def test_p_two(self):
        assert c_epsilon(1.0, 2.0) == pytest.approx(2.0, rel=1e-15)

    def test_p_three(self):
        assert c_epsilon(1.0, 3.0) == pytest.approx(1.1547005383792515, rel=1e-12)

    def test_large_epsilon_limit(self):
        assert c_epsilon(1e9, 2.0) == pytest.approx(1.0, rel=1e-8)

    @pytest.mark.parametrize("eps", [0.1, 1.0, 10.0])
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_elementary_inequality(self, eps, p):
        x = np.geomspace(1e-6, 1e3, 2000)
        conj = p / (p - 1)
        lhs = (1 + x) ** conj
        rhs = (1 + eps) * x**conj + c_epsilon(eps, p)
        assert np.all(lhs <= rhs * (1 + 1e-12))
