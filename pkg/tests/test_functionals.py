"""Exact-growth, subcritical and full-norm functionals and the sequence bound.

The reference values of the sequence bound come from an independent solve of
its optimality conditions: the minimizer has the form
``a_k = (s e^-k / (1 + t e^-k))^(1/(p-1))`` with multipliers ``(s, t)`` fixed by
the two constraints, and the values below were obtained by a two-dimensional
root find on ``(s, t)``, then frozen.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corpus import UNIT_GRID, bump_mixture
from exactgrowth.errors import InfeasibleError, ParameterError
from exactgrowth.functionals import (
    InequalityParams,
    evaluate_functional,
    exact_growth_functional,
    full_norm_constraint,
    lp_norm_power,
    mu_h_descent,
    mu_h_estimate,
    ratio_report,
    sequence_norm,
    subcritical_functional,
)
from exactgrowth.operators import OperatorParams, inverse_grad_Lk
from exactgrowth.radial_core import RadialFunction, SpaceParams, make_geometric_grid
from exactgrowth.special_constants import exp_p
from exactgrowth.symmetrize import equimeasurability_check, symmetrize

SEQUENCE_BOUND_REFERENCE = {
    1.5: 1.1935284658094423,
    2.0: 2.021177830722973,
    2.5: 4.728586414827732,
    3.0: 15.096170576151716,
    3.5: 64.51701095358854,
}

SPACE = SpaceParams.critical(2, 2.0, 3.0)


def block(c, radius=1.0):
    grid = make_geometric_grid(1e-8 * radius, radius, 256)
    return RadialFunction.sampled(grid, np.full(grid.n_nodes, c), radius)


def concentrating_function(rng):
    v = bump_mixture(rng)
    return inverse_grad_Lk(v, 2, OperatorParams.of(SPACE), 1.0)


class TestExactGrowthFunctional:
    def test_zero(self):
        u = RadialFunction.sampled(UNIT_GRID, np.zeros(UNIT_GRID.n_nodes), 1.0)
        assert exact_growth_functional(u, InequalityParams(16.0, 2.0, 2.0, 3.0)) == 0.0

    @pytest.mark.parametrize("c,beta,q", [(0.5, 1.0, 0.0), (1.3, 2.0, 2.0), (2.0, 0.7, 1.5)])
    def test_constant_block(self, c, beta, q):
        value = exact_growth_functional(block(c), InequalityParams(beta, q, 2.0, 0.0))
        assert value == pytest.approx(math.expm1(beta * c * c) / (1 + c) ** q, rel=1e-12)

    @given(st.floats(0.0, 20.0), st.floats(0.0, 20.0))
    def test_monotone_in_beta(self, b1, b2):
        u = concentrating_function(np.random.default_rng(3))
        lo, hi = sorted((b1, b2))
        f_lo = exact_growth_functional(u, InequalityParams(lo, 2.0, 2.0, 3.0))
        f_hi = exact_growth_functional(u, InequalityParams(hi, 2.0, 2.0, 3.0))
        assert f_lo <= f_hi * (1 + 1e-14)

    def test_log_space_flag(self):
        fv = evaluate_functional(block(10.0), 16.0, 2.0, 2.0, 3.0)
        assert fv.log_space and math.isinf(fv.value)
        expected = 1600.0 - 2.0 * math.log(11.0) - math.log(4.0)
        assert fv.log_value == pytest.approx(expected, rel=1e-12)

    @given(st.integers(0, 2**31), st.floats(0.1, 20.0), st.floats(0.0, 4.0))
    def test_denominator_only_lowers(self, seed, beta, q):
        u = concentrating_function(np.random.default_rng(seed))
        with_denominator = exact_growth_functional(u, InequalityParams(beta, q, 2.0, 3.0))
        assert with_denominator <= subcritical_functional(u, beta, 2.0, 3.0) * (1 + 1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_rearrangement_invariant(self, seed):
        u = bump_mixture(np.random.default_rng(seed))
        ip = InequalityParams(4.0, 2.0, 2.0, 3.0)
        us = symmetrize(u, ip.eta, ip.eta)
        assert exact_growth_functional(us, ip) == pytest.approx(exact_growth_functional(u, ip), rel=1e-6)

    @pytest.mark.parametrize("seed", range(4))
    def test_ratio_rearrangement_invariant(self, seed):
        u = bump_mixture(np.random.default_rng(seed))
        ip = InequalityParams(4.0, 2.0, 2.0, 3.0)
        us = symmetrize(u, ip.eta, ip.eta)
        norm_u, norm_us = equimeasurability_check(u, ip.eta, ip.eta, "power", p=2.0)
        before = exact_growth_functional(u, ip) / norm_u
        after = exact_growth_functional(us, ip) / norm_us
        assert after == pytest.approx(before, rel=1e-6)


class TestSubcritical:
    def test_zero(self):
        u = RadialFunction.sampled(UNIT_GRID, np.zeros(UNIT_GRID.n_nodes), 1.0)
        assert subcritical_functional(u, 3.0, 2.0, 0.0) == 0.0

    @pytest.mark.parametrize("p,eta", [(2.0, 0.0), (3.0, 1.0), (1.5, 3.0)])
    def test_constant_block(self, p, eta):
        c, beta, radius = 0.8, 1.7, 0.6
        value = subcritical_functional(block(c, radius), beta, p, eta)
        measure = radius ** (eta + 1) / (eta + 1)
        expected = exp_p(p, beta * c ** (p / (p - 1))) * measure
        assert value == pytest.approx(expected, rel=1e-12)


class TestReports:
    def test_zero_norm_flagged(self):
        u = RadialFunction.sampled(UNIT_GRID, np.zeros(UNIT_GRID.n_nodes), 1.0)
        report = ratio_report(u, SPACE, InequalityParams(16.0, 2.0, 2.0, 3.0))
        assert report.norm_zero and math.isnan(report.ratio)

    def test_normalized_ratio_finite(self, rng):
        u = concentrating_function(rng)
        ip = InequalityParams(16.0, 2.0, 2.0, 3.0)
        u = u * (1.0 / ratio_report(u, SPACE, ip).grad_norm)
        report = ratio_report(u, SPACE, ip)
        assert report.grad_norm == pytest.approx(1.0, rel=1e-10)
        assert math.isfinite(report.ratio) and report.ratio > 0
        assert report.ratio == pytest.approx(report.functional_value / report.norm_p, rel=1e-14)

    def test_mismatched_exponent(self, rng):
        u = concentrating_function(rng)
        with pytest.raises(ParameterError):
            ratio_report(u, SPACE, InequalityParams(16.0, 2.0, 3.0, 3.0))

    def test_full_norm_zero(self):
        u = RadialFunction.sampled(UNIT_GRID, np.zeros(UNIT_GRID.n_nodes), 1.0)
        assert full_norm_constraint(u, SPACE, 0.5) == 0.0

    @pytest.mark.parametrize("tau", [0.1, 1.0, 7.0])
    def test_full_norm_scaled_to_one(self, rng, tau):
        u = concentrating_function(rng)
        scale = full_norm_constraint(u, SPACE, tau) ** (-1 / SPACE.p)
        assert full_norm_constraint(u * scale, SPACE, tau) == pytest.approx(1.0, abs=1e-10)

    def test_full_norm_rejects_tau(self, rng):
        with pytest.raises(ParameterError):
            full_norm_constraint(concentrating_function(rng), SPACE, 0.0)

    def test_lp_norm_power(self):
        assert lp_norm_power(block(2.0), 2.0, 0.0) == pytest.approx(4.0, rel=1e-12)


class TestSequenceBound:
    def test_matches_optimality_conditions(self):
        estimate = mu_h_descent(2.0, 2.0, 64, seed=1, restarts=4)
        assert estimate.converged
        assert estimate.value == pytest.approx(SEQUENCE_BOUND_REFERENCE[2.0], rel=1e-9)

    def test_returned_sequence_is_feasible(self):
        estimate = mu_h_descent(1.5, 2.0, 64, seed=2, restarts=4)
        a = estimate.sequence
        assert np.all(a >= 0)
        assert a.sum() == pytest.approx(1.5, rel=1e-12)
        assert np.sum(a**2) <= 1 + 1e-12
        assert sequence_norm(a, 2.0) == pytest.approx(estimate.value, rel=1e-12)

    @given(st.integers(0, 2**31))
    def test_feasible_points_bound_from_above(self, seed):
        # scale a random nonnegative vector to l1 norm h; it lies in the unit
        # l2 ball whenever its l2 norm is at most one
        rng = np.random.default_rng(seed)
        a = rng.random(64) ** 4
        a *= 2.0 / a.sum()
        if np.sum(a**2) <= 1:
            assert sequence_norm(a, 2.0) >= SEQUENCE_BOUND_REFERENCE[2.0] * (1 - 1e-12)

    def test_window_at_small_h(self):
        h = 1.5
        value = mu_h_estimate(h, 2.0, 64, seed=0, restarts=4)
        scale = math.exp(h * h / 2) / h
        assert scale / 4 <= value <= 4 * scale

    def test_monotone_in_h(self):
        values = [mu_h_estimate(h, 2.0, 64, seed=5, restarts=2) for h in (1.5, 2.0, 2.5, 3.0)]
        assert values == sorted(values)

    def test_window_quantity_within_ten(self):
        for h, value in SEQUENCE_BOUND_REFERENCE.items():
            assert 0.1 <= value * h * math.exp(-h * h / 2) <= 10

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            mu_h_estimate(8.5, 2.0, 64)

    @pytest.mark.parametrize("h,p,K", [(1.0, 2.0, 64), (2.0, 1.0, 64), (2.0, 2.0, 8)])
    def test_rejects_parameters(self, h, p, K):
        with pytest.raises(ParameterError):
            mu_h_estimate(h, p, K)
