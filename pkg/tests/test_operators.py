"""The weighted radial operator, its powers, inverses and norms."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corpus import HARDY_CASES, UNIT_GRID, hardy_ratios, smooth_data
from exactgrowth.errors import DerivativeOrderError, DivergentMeasureError
from exactgrowth.operators import (
    OperatorParams,
    apply_grad_Lk,
    apply_L,
    inverse_grad_Lk,
    inverse_L,
    navier_residuals,
    norm_equivalence_probe,
    xkp_norm,
)
from exactgrowth.radial_core import (
    RadialFunction,
    SpaceParams,
    default_grid,
    make_geometric_grid,
)

R = UNIT_GRID.nodes


def monomial(m, order=4):
    """Closed-form ``r**m`` with derivatives up to ``order``."""

    def nth(j):
        coef = math.prod(m - i for i in range(j))
        return lambda r: coef * r ** (m - j)

    return RadialFunction.closed_form(nth(0), [nth(j) for j in range(1, order + 1)], 1.0)


def sup_relative(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


class TestApplyL:
    @pytest.mark.parametrize("m", [2.0, 3.0, 4.5])
    @pytest.mark.parametrize("theta,gamma", [(3.0, 3.0), (2.5, 3.0), (1.0, 1.5)])
    def test_monomial(self, m, theta, gamma):
        got = apply_L(monomial(m), OperatorParams(theta, gamma)).values
        expected = -m * (gamma + m - 1) * R ** (m + gamma - 2 - theta)
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_constant(self):
        u = RadialFunction.sampled(UNIT_GRID, np.full(UNIT_GRID.n_nodes, 2.5))
        assert np.max(np.abs(apply_L(u, OperatorParams(3.0, 3.0)).values)) < 1e-12

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_laplacian_of_square(self, dim):
        op = OperatorParams(dim - 1.0, dim - 1.0)
        np.testing.assert_allclose(apply_L(monomial(2.0), op).values, -2.0 * dim, rtol=1e-13)

    def test_missing_derivatives(self):
        u = RadialFunction.closed_form(lambda r: r, [lambda r: np.ones_like(r)], 1.0)
        with pytest.raises(DerivativeOrderError):
            apply_L(u, OperatorParams(1.0, 1.0))

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity_closed_form(self, a, b):
        op = OperatorParams(2.5, 3.0)
        u, v = monomial(2.0), monomial(3.5)
        lhs = apply_L(u * a + v * b, op).values
        rhs = a * apply_L(u, op).values + b * apply_L(v, op).values
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity_sampled(self, a, b):
        op = OperatorParams(2.5, 3.0)
        # rounding in the samples is amplified by r**-2 / h**2; this grid keeps
        # that amplification below the tolerance
        grid = make_geometric_grid(0.1, 1.0, 128)
        r = grid.nodes
        u = RadialFunction.sampled(grid, np.exp(-(r**2)))
        v = RadialFunction.sampled(grid, np.cos(2 * r) * r)
        lhs = apply_L(u * a + v * b, op).values
        rhs = a * apply_L(u, op).values + b * apply_L(v, op).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))

    def test_sampled_converges_to_analytic(self):
        op = OperatorParams(3.0, 3.0)
        exact = RadialFunction.closed_form(
            lambda r: np.exp(-(r**2)),
            [lambda r: -2 * r * np.exp(-(r**2)), lambda r: (4 * r**2 - 2) * np.exp(-(r**2))],
            1.0,
        )
        errors = []
        for n in (64, 128, 256):
            grid = make_geometric_grid(1e-2, 1.0, n)
            reference = apply_L(RadialFunction.closed_form(exact.value_fn, exact.derivative_fns, 1.0, grid), op)
            sampled = apply_L(RadialFunction.sampled(grid, np.exp(-(grid.nodes**2))), op)
            errors.append(np.max(np.abs(sampled.values - reference.values)))
        orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert min(orders) >= 1.8


class TestGradient:
    def test_first_order_is_derivative(self):
        u = RadialFunction.sampled(UNIT_GRID, np.sin(R))
        got = apply_grad_Lk(u, 1, OperatorParams(3.0, 3.0)).values
        np.testing.assert_allclose(got, u.derivative(1))

    def test_second_order_is_L(self):
        u = monomial(3.0)
        op = OperatorParams(2.0, 2.5)
        np.testing.assert_allclose(apply_grad_Lk(u, 2, op).values, apply_L(u, op).values)

    def test_fourth_order_monomial(self):
        # L r^m = -m(m+2) r^(m-2) at theta = gamma = 3, twice from r^6
        got = apply_grad_Lk(monomial(6.0), 4, OperatorParams(3.0, 3.0)).values
        np.testing.assert_allclose(got, 1152.0 * R**2, rtol=1e-12)

    def test_third_order_monomial(self):
        # (L r^4)' = (-4 * 6 r^2)' = -48 r at theta = gamma = 3
        got = apply_grad_Lk(monomial(4.0), 3, OperatorParams(3.0, 3.0)).values
        np.testing.assert_allclose(got, -48.0 * R, rtol=1e-12)


class TestInverse:
    @pytest.mark.parametrize("theta,gamma", [(3.0, 2.5), (2.0, 3.0), (1.5, 1.0)])
    def test_constant_source(self, theta, gamma):
        c, radius = 1.7, 2.0
        grid = default_grid(radius)
        v = RadialFunction.sampled(grid, np.full(grid.n_nodes, c))
        u = inverse_L(v, OperatorParams(theta, gamma), radius)
        s = theta + 2 - gamma
        r = grid.nodes
        expected = c * (radius**s - r**s) / ((theta + 1) * s)
        np.testing.assert_allclose(u.values, expected, rtol=1e-10, atol=1e-14)

    def test_zero_source(self):
        v = RadialFunction.sampled(UNIT_GRID, np.zeros(UNIT_GRID.n_nodes))
        assert not np.any(inverse_L(v, OperatorParams(3.0, 3.0), 1.0).values)

    def test_round_trip_gaussian(self):
        op = OperatorParams(3.0, 3.0)
        v = RadialFunction.sampled(UNIT_GRID, np.exp(-(R**2)))
        back = apply_L(inverse_L(v, op, 1.0), op)
        assert sup_relative(back.values, v.values) <= 1e-6

    def test_vanishes_at_radius(self, rng):
        u = inverse_L(smooth_data(rng), OperatorParams(2.5, 3.0), 1.0)
        assert u.values[-1] == 0.0

    def test_divergent_inner_integral(self):
        v = RadialFunction.sampled(UNIT_GRID, np.ones(UNIT_GRID.n_nodes))
        with pytest.raises(DivergentMeasureError):
            inverse_L(v, OperatorParams(-1.0, 0.0), 1.0)

    def test_first_order_unit_source(self):
        v = RadialFunction.sampled(UNIT_GRID, np.ones(UNIT_GRID.n_nodes))
        u = inverse_grad_Lk(v, 1, OperatorParams(3.0, 3.0), 1.0)
        np.testing.assert_allclose(u.values, R - 1.0, atol=1e-14)

    def test_second_order_is_inverse_L(self, rng):
        v = smooth_data(rng)
        op = OperatorParams(2.5, 3.0)
        np.testing.assert_allclose(inverse_grad_Lk(v, 2, op, 1.0).values, inverse_L(v, op, 1.0).values)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    @pytest.mark.parametrize("theta,gamma", [(3.0, 3.0), (2.5, 3.0)])
    def test_round_trip(self, rng, k, theta, gamma):
        op = OperatorParams(theta, gamma)
        v = smooth_data(rng)
        u = inverse_grad_Lk(v, k, op, 1.0)
        assert sup_relative(apply_grad_Lk(u, k, op).values, v.values) <= 1e-5
        assert max(navier_residuals(u, k, op)) < 1e-8


class TestNorms:
    def test_zero(self):
        u = RadialFunction.sampled(UNIT_GRID, np.zeros(UNIT_GRID.n_nodes))
        params = SpaceParams(1, 2.0, (1.0, 1.0), 1.0, 1.0, 0.0)
        assert xkp_norm(u, params) == 0.0

    def test_first_order_capped_tent(self):
        # (1 - r)**4 stands in for the tent with its kink at r = 1 smoothed
        u = RadialFunction.closed_form(
            lambda r: (1 - r) ** 4, [lambda r: -4 * (1 - r) ** 3], 1.0
        )
        params = SpaceParams(1, 2.0, (1.0, 1.0), 1.0, 1.0, 0.0)
        # B(2, 9) = 1/90 and 16 B(2, 7) = 16/56
        expected = math.sqrt(1 / 90 + 16 / 56)
        # second-order quadrature on the default grid
        assert xkp_norm(u, params) == pytest.approx(expected, rel=1e-5)

    @given(st.floats(1e-3, 10.0), st.booleans())
    def test_homogeneous(self, c, negative):
        c = -c if negative else c
        u = RadialFunction.sampled(UNIT_GRID, np.exp(-(R**2)) * (1 - R))
        params = SpaceParams(2, 2.0, (1.0, 2.0, 3.0), 3.0, 3.0, 3.0)
        assert xkp_norm(u * c, params) == pytest.approx(abs(c) * xkp_norm(u, params), rel=1e-12)


class TestEquivalenceProbe:
    PARAMS = SpaceParams(2, 2.0, (0.0, 1.0, 3.0), 3.0, 3.0, 3.0)

    def test_singleton(self, rng):
        u = inverse_grad_Lk(smooth_data(rng), 2, OperatorParams(3.0, 3.0), 1.0)
        probe = norm_equivalence_probe([u], self.PARAMS)
        assert len(probe.accepted) == 1 and 0 < probe.accepted[0] < np.inf

    def test_window(self, rng):
        op = OperatorParams(3.0, 3.0)
        family = [inverse_grad_Lk(smooth_data(rng), 2, op, 1.0) for _ in range(10)]
        probe = norm_equivalence_probe(family, self.PARAMS)
        assert not probe.rejected
        assert max(probe.ratios) / min(probe.ratios) < 1e3

    def test_navier_violation_rejected(self):
        u = RadialFunction.sampled(UNIT_GRID, 2.0 - R**2)
        probe = norm_equivalence_probe([u], self.PARAMS)
        assert probe.rejected and math.isnan(probe.ratios[0])


class TestHardyInequalities:
    @pytest.mark.parametrize("case", HARDY_CASES)
    def test_bounds_hold(self, rng, case):
        for _ in range(3):
            first, second, chain = hardy_ratios(smooth_data(rng), *case)
            assert first <= 1.05
            assert second <= 1.05
            assert all(c <= 1.05 for c in chain)

    def test_chain_reaches_third_power(self, rng):
        _, _, chain = hardy_ratios(smooth_data(rng), *HARDY_CASES[2])
        assert len(chain) == 2
