"""Fourth-order radial problem: inverse, fixed point, constrained maximization
and boundary behaviour.

Manufactured solutions use ``u0 = (1 - r^2)^3`` on ``(0, 1)``.  Its
bi-Laplacian is computed on monomial coefficients here with
``Lap r^m = -m (m - 1 + theta) r^(m-2)``, independently of the solver.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from exactgrowth.errors import HypothesisViolation, ParameterError
from exactgrowth.ode_app import (
    Nonlinearity,
    ProblemSpec,
    biharmonic_inverse,
    biharmonic_pair,
    boundary_checks,
    constrained_maximize,
    fixed_point_solve,
    truncation_sensitivity,
    weak_form_residual,
)
from exactgrowth.operators import integrate_high_order
from exactgrowth.radial_core import RadialFunction, default_grid

BUMP = Polynomial([1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0])


def laplacian_poly(poly, theta):
    """``-(p'' + theta p'/r)`` for a polynomial with no linear term."""
    c = poly.coef
    out = np.zeros(max(len(c) - 2, 1))
    for m in range(2, len(c)):
        out[m - 2] -= m * (m - 1 + theta) * c[m]
    return Polynomial(out)


def linear_spec(eta=2.0, weight=None, odd=True):
    weight = weight or (lambda r: np.exp(-r))
    return ProblemSpec(eta, Nonlinearity(lambda r, t: t * weight(r), odd=odd, name="linear"), 1.0)


@pytest.fixture(scope="module")
def grid():
    return default_grid(1.0)


@pytest.fixture(scope="module")
def maximizer():
    spec = ProblemSpec(2.0, Nonlinearity(lambda r, t: 2.0 * t * np.exp(-r), name="quadratic"), 1.0)
    return spec, constrained_maximize(spec, 10.0, seed=7)


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------


@given(st.floats(1.01, 20.0))
def test_theta_is_derived(eta):
    spec = linear_spec(eta)
    assert abs(spec.theta - (eta + 3.0) / 2.0) <= 1e-12
    assert spec.source_power == pytest.approx(eta - spec.theta)


def test_spec_rejects_small_eta():
    with pytest.raises(HypothesisViolation):
        linear_spec(1.0)


def test_spec_rejects_nonpositive_beta():
    with pytest.raises(HypothesisViolation):
        ProblemSpec(2.0, Nonlinearity(lambda r, t: t), 0.0)


def test_spec_rejects_false_oddness_tag():
    with pytest.raises(HypothesisViolation):
        ProblemSpec(2.0, Nonlinearity(lambda r, t: t * t, odd=True), 1.0)
    ProblemSpec(2.0, Nonlinearity(lambda r, t: t * t, odd=False), 1.0)


def test_spec_growth_bound():
    cubic = Nonlinearity(lambda r, t: t**3, name="cubic")
    spec = ProblemSpec(3.0, cubic, 1.0, growth_constant=1.0)
    assert spec.growth_estimate <= 1.0
    with pytest.raises(HypothesisViolation):
        ProblemSpec(3.0, Nonlinearity(lambda r, t: t * np.exp(3 * t * t)), 1.0, growth_constant=10.0)


def test_spec_rejects_nonfinite_values():
    with pytest.raises(HypothesisViolation):
        ProblemSpec(2.0, Nonlinearity(lambda r, t: np.full_like(t, np.nan), odd=False), 1.0)


def test_primitive_of_linear_nonlinearity():
    f = Nonlinearity(lambda r, t: 2.0 * t * np.exp(-r))
    r = np.array([0.5, 1.0, 3.0])
    t = np.array([-1.0, 0.3, 2.0])
    assert np.allclose(f.primitive(r, t), t * t * np.exp(-r), rtol=1e-14)


# ---------------------------------------------------------------------------
# the inverse
# ---------------------------------------------------------------------------


def test_inverse_of_zero_is_zero(grid):
    u = biharmonic_inverse(RadialFunction.sampled(grid, np.zeros(grid.nodes.size)), 2.5, 1.0)
    assert np.all(u.values == 0.0)


@pytest.mark.parametrize("eta", [2.0, 3.0, 5.0])
def test_manufactured_inverse(grid, eta):
    theta = (eta + 3.0) / 2.0
    lap = laplacian_poly(BUMP, theta)
    source = laplacian_poly(lap, theta)
    r = grid.nodes
    u, w = biharmonic_pair(RadialFunction.sampled(grid, source(r)), theta, 1.0)
    assert np.max(np.abs(u.values - BUMP(r))) < 1e-5
    assert np.max(np.abs(w.values - lap(r))) < 1e-5


def test_inverse_is_linear(grid, rng):
    r = grid.nodes
    a = RadialFunction.sampled(grid, np.exp(-3 * r) * np.cos(4 * r))
    b = RadialFunction.sampled(grid, 1.0 + r * r)
    x, y = rng.uniform(-2, 2, 2)
    combined = biharmonic_inverse(RadialFunction.sampled(grid, x * a.values + y * b.values), 2.5, 1.0)
    parts = x * biharmonic_inverse(a, 2.5, 1.0).values + y * biharmonic_inverse(b, 2.5, 1.0).values
    assert np.max(np.abs(combined.values - parts)) <= 1e-10 * max(1.0, np.max(np.abs(parts)))


def test_inverse_satisfies_navier_conditions(grid):
    r = grid.nodes
    u, w = biharmonic_pair(RadialFunction.sampled(grid, np.exp(-r)), 2.5, 1.0)
    assert u.values[-1] == 0.0
    assert w.values[-1] == 0.0
    assert abs(u.derivative(1)[0]) < 1e-6
    assert abs(w.derivative(1)[0]) < 1e-6


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------


def test_fixed_point_zero_source(grid):
    spec = ProblemSpec(2.0, Nonlinearity(lambda r, t: 0.0 * t, name="zero"), 1.0)
    start = RadialFunction.sampled(grid, np.zeros(grid.nodes.size))
    report = fixed_point_solve(spec, 1.0, start, 1.0)
    assert report.converged and report.iterations == 1
    assert np.all(report.solution.values == 0.0)
    assert report.residual == 0.0


def test_fixed_point_small_linear_data(grid):
    spec = ProblemSpec(3.0, Nonlinearity(lambda r, t: 0.1 * t * np.exp(-r), name="small"), 1.0)
    start = RadialFunction.sampled(grid, BUMP(grid.nodes))
    report = fixed_point_solve(spec, 1.0, start, 1.0)
    assert report.converged
    assert report.residual < 1e-8
    assert np.max(np.abs(report.solution.values)) < 1e-8


def test_fixed_point_manufactured(grid):
    """``f(r, t) = lam r^(theta-eta) (g(r) + k (t^3 - u0(r)^3))`` has ``u0`` as a
    solution; the cubic term makes the iteration genuinely nonlinear."""
    eta, lam, kappa = 2.0, 3.0, 5.0
    theta = (eta + 3.0) / 2.0
    source = laplacian_poly(laplacian_poly(BUMP, theta), theta)

    def f(r, t):
        return lam * r ** (theta - eta) * (source(r) + kappa * (t**3 - BUMP(r) ** 3))

    spec = ProblemSpec(eta, Nonlinearity(f, odd=False, name="manufactured"), 1.0)
    start = RadialFunction.sampled(grid, np.zeros(grid.nodes.size))
    report = fixed_point_solve(spec, lam, start, 1.0)
    assert report.converged
    assert np.max(np.abs(report.solution.values - BUMP(grid.nodes))) < 1e-5
    assert report.residual < 1e-8


def test_fixed_point_reports_non_convergence(grid):
    spec = ProblemSpec(2.0, Nonlinearity(lambda r, t: 50.0 * t**3 + 1e3 * t, name="stiff"), 1.0)
    start = RadialFunction.sampled(grid, np.ones(grid.nodes.size))
    with np.errstate(over="ignore", invalid="ignore"):
        report = fixed_point_solve(spec, 1e-3, start, 1.0, max_iterations=20)
    assert not report.converged


def test_fixed_point_parameter_errors(grid):
    spec = linear_spec()
    start = RadialFunction.sampled(grid, np.zeros(grid.nodes.size))
    with pytest.raises(ParameterError):
        fixed_point_solve(spec, 0.0, start, 1.0)
    with pytest.raises(ParameterError):
        fixed_point_solve(spec, 1.0, start, 1.0, relaxation=0.0)
    with pytest.raises(ParameterError):
        fixed_point_solve(spec, 1.0, start, -1.0)


# ---------------------------------------------------------------------------
# boundary behaviour
# ---------------------------------------------------------------------------


def test_boundary_checks_of_zero(grid):
    zero = RadialFunction.sampled(grid, np.zeros(grid.nodes.size))
    checks = boundary_checks(zero, 2.5)
    assert checks.second_order_relation == 0.0
    assert checks.third_derivative == 0.0
    assert checks.value_at_end == 0.0
    assert checks.laplacian_at_end == 0.0
    assert checks.relative(1.0) == (0.0, 0.0)


def test_boundary_checks_of_even_function(grid):
    theta = 2.5
    r = grid.nodes
    u = RadialFunction.sampled(grid, BUMP(r))
    lap = RadialFunction.sampled(grid, laplacian_poly(BUMP, theta)(r))
    checks = boundary_checks(u, theta, lap)
    assert checks.third_derivative < 1e-4
    assert checks.second_order_relation < 1e-4
    assert checks.second_derivative_at_origin == pytest.approx(-6.0, rel=1e-4)


# ---------------------------------------------------------------------------
# constrained maximization
# ---------------------------------------------------------------------------


def test_maximizer_multiplier_identity(maximizer):
    _, report = maximizer
    assert report.converged and not report.degenerate
    assert abs(report.multiplier - report.multiplier_integral) <= 1e-6 * abs(report.multiplier_integral)


def test_maximizer_weak_form(maximizer):
    spec, report = maximizer
    assert report.weak_form_residual < 1e-4
    fresh = weak_form_residual(
        spec, report.solution, report.laplacian, report.multiplier, 10.0, np.random.default_rng(99)
    )
    assert fresh < 1e-4


def test_maximizer_stationarity_history_decreases(maximizer):
    _, report = maximizer
    assert len(report.history) >= 1
    assert all(b < a for a, b in zip(report.history, report.history[1:]))


def test_maximizer_boundary_behaviour(maximizer):
    _, report = maximizer
    checks = report.boundary_checks
    relation, third = checks.relative(1.0)
    assert relation < 1e-3
    assert third < 1e-3
    assert checks.value_at_end < 1e-6
    assert checks.laplacian_at_end < 1e-6


def test_maximizer_is_unit_normalized(maximizer):
    spec, report = maximizer
    lap = report.laplacian.values
    norm = integrate_high_order(report.laplacian.grid, lap * lap, spec.theta)
    assert norm == pytest.approx(1.0, rel=1e-6)


def test_maximize_degenerate_source():
    spec = ProblemSpec(2.0, Nonlinearity(lambda r, t: 0.0 * t, name="zero"), 1.0)
    report = constrained_maximize(spec, 10.0, seed=1)
    assert report.degenerate and not report.converged
    assert report.objective == 0.0


def test_maximize_rejects_unsigned_nonlinearity():
    spec = ProblemSpec(2.0, Nonlinearity(lambda r, t: -t, name="negative"), 1.0)
    with pytest.raises(HypothesisViolation):
        constrained_maximize(spec, 10.0, seed=1)
    even = ProblemSpec(2.0, Nonlinearity(lambda r, t: t * t, odd=False), 1.0)
    with pytest.raises(HypothesisViolation):
        constrained_maximize(even, 10.0, seed=1)


def test_truncation_sensitivity_report():
    spec = ProblemSpec(2.0, Nonlinearity(lambda r, t: 2.0 * t * np.exp(-r), name="quadratic"), 1.0)
    report = truncation_sensitivity(spec, 10.0, seed=3)
    assert report["multiplier_R"] > 0 and report["multiplier_2R"] > 0
    change = abs(report["multiplier_R"] - report["multiplier_2R"]) / report["multiplier_2R"]
    assert report["relative_multiplier_change"] == pytest.approx(change)
    assert math.isfinite(report["sup_gap"])
