"""The weighted radial operator ``L u = -r**-theta (r**gamma u')'``, the
generalized gradient built from it, its quadrature inverse and the weighted
Sobolev norm.

Sampled functions are differentiated with fourth-order differences in
``log r``, where the operator reads
``L u = -r**(gamma-theta-2) ((gamma-1) u_x + u_xx)``.  Exact power terms
carried by a function are mapped analytically, using
``L r**e = -e (gamma+e-1) r**(e-gap)`` with ``gap = theta+2-gamma``.
The inverse returns its leading behaviour at the origin as such power terms,
so that an inverse followed by ``L`` never differentiates rounding noise
divided by powers of a tiny radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from exactgrowth.errors import (
    DerivativeOrderError,
    DivergentMeasureError,
    NavierViolation,
    ParameterError,
)
from exactgrowth.radial_core import (
    RadialFunction,
    RadialGrid,
    SpaceParams,
    default_grid,
    log_difference_at_end,
    weighted_lp_norm,
)

#: Absolute tolerance for the Navier conditions ``L^j u(R) = 0``.
NAVIER_TOLERANCE = 1e-8


@dataclass(frozen=True)
class OperatorParams:
    """Exponents ``(theta, gamma)`` of ``L u = -r**-theta (r**gamma u')'``."""

    theta: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.gamma)):
            raise ParameterError("theta and gamma must be finite")

    @property
    def gap(self) -> float:
        """``theta + 2 - gamma``, the power of ``r`` that ``L`` removes."""
        return self.theta + 2.0 - self.gamma

    @classmethod
    def of(cls, params: SpaceParams) -> "OperatorParams":
        return cls(params.theta, params.gamma)


# ---------------------------------------------------------------------------
# forward operators
# ---------------------------------------------------------------------------


def _falling(e: float, i: int) -> float:
    out = 1.0
    for m in range(i):
        out *= e - m
    return out


def _power_times_derivative(coef: float, e: float, f: RadialFunction, shift: int, j: int):
    """``j``-th derivative of ``coef r**e f^(shift)`` (Leibniz rule) as a callback."""

    def fn(r):
        r = np.asarray(r, dtype=float)
        acc = np.zeros_like(r)
        for i in range(j + 1):
            fall = _falling(e, i)
            if fall == 0.0:
                continue
            order = shift + j - i
            g = f.value_fn(r) if order == 0 else f.derivative_fns[order - 1](r)
            acc = acc + math.comb(j, i) * fall * r ** (e - i) * g
        return coef * acc

    return fn


def _apply_L_closed(u: RadialFunction, op: OperatorParams) -> RadialFunction:
    if u.k_max < 2:
        raise DerivativeOrderError(
            f"L needs two derivatives, the closed form provides {u.k_max}"
        )
    e1 = op.gamma - op.theta - 1.0
    e2 = op.gamma - op.theta

    def nth(j):
        a = _power_times_derivative(-op.gamma, e1, u, 1, j)
        b = _power_times_derivative(-1.0, e2, u, 2, j)
        return lambda r: a(r) + b(r)

    value = nth(0)
    derivs = [nth(j) for j in range(1, u.k_max - 1)]
    return RadialFunction.closed_form(value, derivs, u.support_radius, u.grid)


def _map_terms_L(terms, op: OperatorParams):
    out = []
    for c, e in terms:
        factor = -e * (op.gamma + e - 1.0)
        if factor != 0.0:
            out.append((c * factor, e - op.gap))
    return out


def _gradient_polynomial(k: int, op: OperatorParams) -> tuple[np.ndarray, float, float]:
    """Coefficients of the ``d/dx`` polynomial giving ``grad_L^k`` on samples.

    With ``x = log r``, ``a = -gap`` and ``b = gamma - 1``,
    ``L (e^(m a x) g) = -e^((m+1) a x) (D + m a)(D + m a + b) g``, hence
    ``L^j u = (-1)^j r^(j a) prod_m (D + m a)(D + m a + b) u`` and an odd
    order adds ``r^-1 (D + j a)``.  Returns ascending coefficients, the power
    of ``r`` in front and the sign.
    """
    a, b = -op.gap, op.gamma - 1.0
    poly = np.array([1.0])
    half = k // 2
    for m in range(half):
        poly = np.polynomial.polynomial.polymul(poly, [m * a, 1.0])
        poly = np.polynomial.polynomial.polymul(poly, [m * a + b, 1.0])
    power = half * a
    if k % 2:
        poly = np.polynomial.polynomial.polymul(poly, [half * a, 1.0])
        power -= 1.0
    return poly, power, (-1.0) ** half


def _map_terms_grad(terms, k: int, op: OperatorParams):
    out = list(terms)
    for _ in range(k // 2):
        out = _map_terms_L(out, op)
    if k % 2:
        out = [(c * e, e - 1.0) for c, e in out if e != 0.0]
    return out


def _apply_grad_sampled(u: RadialFunction, k: int, op: OperatorParams) -> RadialFunction:
    grid = u.grid
    poly, power, sign = _gradient_polynomial(k, op)
    logs = u.log_derivatives(poly.size - 1)
    body = np.zeros(grid.n_nodes)
    for coef, deriv in zip(poly, logs):
        if coef != 0.0:
            body += coef * deriv
    body *= sign * grid.nodes**power
    if u.power_terms:
        return RadialFunction.with_power_terms(
            grid, body, _map_terms_grad(u.power_terms, k, op), u.support_radius
        )
    return RadialFunction.sampled(grid, body, u.support_radius)


def apply_L(u: RadialFunction, op: OperatorParams) -> RadialFunction:
    """``-r**-theta (gamma r**(gamma-1) u' + r**gamma u'')`` at every node.

    Closed-form input yields a closed form with two fewer derivatives; sampled
    input yields samples on the same grid.
    """
    if u.is_sampled:
        return _apply_grad_sampled(u, 2, op)
    return _apply_L_closed(u, op)


def first_derivative(u: RadialFunction) -> RadialFunction:
    """``u'`` in the same backing as ``u``."""
    if not u.is_sampled:
        if u.k_max < 1:
            raise DerivativeOrderError("closed form provides no derivative")
        return RadialFunction.closed_form(
            u.derivative_fns[0], u.derivative_fns[1:], u.support_radius, u.grid
        )
    return _apply_grad_sampled(u, 1, OperatorParams(0.0, 0.0))


def apply_grad_Lk(u: RadialFunction, k: int, op: OperatorParams) -> RadialFunction:
    """``L^(k/2) u`` for even ``k`` and ``(L^((k-1)/2) u)'`` for odd ``k``."""
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    if not u.is_sampled and u.k_max < k:
        raise DerivativeOrderError(
            f"order {k} gradient needs {k} derivatives, the closed form provides {u.k_max}"
        )
    if u.is_sampled:
        return _apply_grad_sampled(u, int(k), op)
    out = u
    for _ in range(int(k) // 2):
        out = apply_L(out, op)
    if k % 2:
        out = first_derivative(out)
    return out


# ---------------------------------------------------------------------------
# inverses
# ---------------------------------------------------------------------------


def _inverse_grid(v: RadialFunction, R: float) -> tuple[RadialGrid, RadialFunction]:
    if not (R > 0 and math.isfinite(R)):
        raise ParameterError(f"outer radius must be positive and finite, got {R}")
    if v.is_sampled and abs(v.grid.r_max - R) <= 1e-12 * R:
        return v.grid, v
    grid = v.grid if abs(v.grid.r_max - R) <= 1e-12 * R else default_grid(R)
    return grid, v.to_sampled(grid) if v.is_sampled else v


def _split(v: RadialFunction, grid: RadialGrid):
    """Power terms and a residual that vanishes at the first node."""
    if v.is_sampled and v.grid.same_as(grid) and v.residual is not None:
        terms = list(v.power_terms)
        residual = np.array(v.residual, dtype=float)
    else:
        values = np.asarray(v(grid.nodes) if not v.grid.same_as(grid) else v.values, dtype=float)
        terms = []
        residual = values.copy()
    lead = residual[0]
    if lead != 0.0:
        terms.append((float(lead), 0.0))
        residual = residual - lead
        residual[0] = 0.0
    return terms, residual


#: Nodes per interpolation stencil in the running integrals (eighth order).
_RUNNING_STENCIL = 8


def _cell_weights(offsets: np.ndarray) -> np.ndarray:
    """Weights integrating, over ``[0, 1]``, the polynomial through ``offsets``."""
    degree = offsets.size
    vander = np.vander(offsets, degree, increasing=True).T
    moments = 1.0 / np.arange(1, degree + 1)
    return np.linalg.solve(vander, moments)


def running_integral(grid: RadialGrid, samples: np.ndarray, alpha: float) -> np.ndarray:
    """``int_{r_min}^{r_i} f r**alpha dr`` at every node.

    Integrates ``g(x) = f(e^x) e^((alpha+1) x)`` in ``x = log r``; each cell
    uses the degree-7 interpolant through eight surrounding nodes, shifted to
    stay inside the grid near either end.  The high order keeps the local
    errors of the end cells far below what later differentiation resolves.
    """
    g = samples * grid.nodes ** (alpha + 1.0)
    n = g.size
    width = _RUNNING_STENCIL
    if n < width:
        raise ParameterError(f"running integral needs at least {width} nodes")
    half = width // 2
    cells = np.zeros(n - 1)
    interior = _cell_weights(np.arange(width, dtype=float) - (half - 1))
    count = n - 1 - 2 * (half - 1)
    if count > 0:
        for j, w in enumerate(interior):
            cells[half - 1 : half - 1 + count] += w * g[j : j + count]
    for c in range(min(half - 1, n - 1)):
        w = _cell_weights(np.arange(width, dtype=float) - c)
        cells[c] = np.dot(w, g[:width])
        cells[n - 2 - c] = np.dot(w[::-1], g[n - width :])
    out = np.zeros(n)
    out[1:] = np.cumsum(cells) * grid.log_step
    return out


def integrate_high_order(grid: RadialGrid, samples: np.ndarray, alpha: float) -> float:
    """``int_0^r_max f r**alpha dr`` with the eighth-order running rule on the
    grid and the first sample held constant below ``r_min``."""
    samples = np.asarray(samples, dtype=float)
    total = float(running_integral(grid, samples, alpha)[-1])
    if samples[0] != 0.0:
        total += float(samples[0]) * grid.head_measure(alpha)
    return total


def _finish(grid, residual, terms, R) -> RadialFunction:
    """Assemble ``residual + terms`` and pin the value at ``R`` to zero."""
    at_end = sum(c * R**e for c, e in terms)
    residual = residual.copy()
    residual[-1] = -at_end
    u = RadialFunction.with_power_terms(grid, residual, terms, R)
    # the sum above may leave a rounding-level value; the boundary node is
    # zero by construction
    samples = u.samples.copy()
    samples[-1] = 0.0
    samples.flags.writeable = False
    return replace(u, samples=samples, _cache={})


def inverse_L(v: RadialFunction, op: OperatorParams, R: float) -> RadialFunction:
    """``u(r) = int_r^R t**-gamma int_0^t v(s) s**theta ds dt``.

    ``u(R) = 0`` and ``L u = v``.  Both running integrals use a fourth-order
    rule in ``log r``; the constant part of ``v`` at the origin is inverted
    exactly and returned as power terms.
    """
    grid, v = _inverse_grid(v, R)
    terms_in, residual = _split(v, grid)
    theta, gap = op.theta, op.gap
    r = grid.nodes
    terms: list[tuple[float, float]] = []
    extra = np.zeros(grid.n_nodes)
    for c, e in terms_in:
        if e + theta + 1.0 <= 0.0:
            raise DivergentMeasureError(
                f"inner integral of r**{e} against r**{theta} diverges at the origin"
            )
        s = e + gap
        denom = e + theta + 1.0
        if s == 0.0:
            extra += c * (math.log(R) - np.log(r)) / denom
        else:
            terms.append((c * R**s / (denom * s), 0.0))
            terms.append((-c / (denom * s), s))
    if np.any(residual):
        if theta <= -1.0:
            raise DivergentMeasureError("inner integral diverges for theta <= -1")
        inner = running_integral(grid, residual, theta)
        running = running_integral(grid, inner, -op.gamma)
        terms.append((float(running[-1]), 0.0))
        extra -= running
    return _finish(grid, extra, terms, R)


def inverse_first_order(v: RadialFunction, R: float) -> RadialFunction:
    """``u(r) = -int_r^R v(s) ds``, so that ``u' = v`` and ``u(R) = 0``."""
    grid, v = _inverse_grid(v, R)
    terms_in, residual = _split(v, grid)
    r = grid.nodes
    terms: list[tuple[float, float]] = []
    extra = np.zeros(grid.n_nodes)
    for c, e in terms_in:
        if e == -1.0:
            extra += c * (np.log(r) - math.log(R))
        else:
            terms.append((-c * R ** (e + 1.0) / (e + 1.0), 0.0))
            terms.append((c / (e + 1.0), e + 1.0))
    if np.any(residual):
        running = running_integral(grid, residual, 0.0)
        terms.append((-float(running[-1]), 0.0))
        extra += running
    return _finish(grid, extra, terms, R)


def inverse_grad_Lk(v: RadialFunction, k: int, op: OperatorParams, R: float) -> RadialFunction:
    """``u`` with ``grad_L^k u = v`` and ``L^j u(R) = 0`` for ``j <= (k-1)//2``.

    Odd ``k`` first integrates once from ``R``; each further stage applies
    :func:`inverse_L`.
    """
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    out = inverse_first_order(v, R) if k % 2 else v
    for _ in range(int(k) // 2):
        out = inverse_L(out, op, R)
    return out


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _values_norm(grid: RadialGrid, values: np.ndarray, p: float, alpha: float) -> float:
    return weighted_lp_norm(RadialFunction.sampled(grid, values), p, alpha)


def xkp_norm(u: RadialFunction, params: SpaceParams) -> float:
    """``(sum_j ||u^(j)||_{L^p_{alpha_j}}^p)^(1/p)`` over ``j = 0..k``."""
    total = 0.0
    for j, alpha in enumerate(params.alphas):
        deriv = u.derivative(j)
        total += _values_norm(u.grid, deriv, params.p, alpha) ** params.p
    return total ** (1.0 / params.p)


def grad_norm(u: RadialFunction, params: SpaceParams) -> float:
    """``||grad_L^k u||_{L^p_nu}``."""
    g = apply_grad_Lk(u, params.k, OperatorParams.of(params))
    return _values_norm(u.grid, g.values, params.p, params.nu)


def navier_residuals(u: RadialFunction, k: int, op: OperatorParams) -> list[float]:
    """``|L^j u(R)|`` for ``j = 0..(k-1)//2`` at the last node.

    Sampled functions use eighth-order one-sided differences at ``R`` so that
    the check is limited by the data rather than by the boundary stencil.
    """
    out = []
    for j in range((int(k) - 1) // 2 + 1):
        if j == 0:
            out.append(abs(float(u.values[-1])))
        elif u.is_sampled:
            out.append(abs(_grad_at_end(u, 2 * j, op)))
        else:
            out.append(abs(float(apply_grad_Lk(u, 2 * j, op).values[-1])))
    return out


def _grad_at_end(u: RadialFunction, k: int, op: OperatorParams) -> float:
    poly, power, sign = _gradient_polynomial(k, op)
    grid = u.grid
    base = u.values if u.residual is None else u.residual
    body = sum(
        coef * (base[-1] if i == 0 else log_difference_at_end(base, grid.log_step, i))
        for i, coef in enumerate(poly)
        if coef != 0.0
    )
    R = grid.nodes[-1]
    value = sign * R**power * body
    for c, e in _map_terms_grad(u.power_terms, k, op):
        value += c * R**e
    return float(value)


def check_navier(u: RadialFunction, k: int, op: OperatorParams, tol: float = NAVIER_TOLERANCE):
    """Raise :class:`NavierViolation` unless every ``|L^j u(R)| < tol``."""
    for j, value in enumerate(navier_residuals(u, k, op)):
        if not value < tol:
            raise NavierViolation(f"|L^{j} u(R)| = {value:.3e} exceeds {tol:.0e}")


@dataclass(frozen=True)
class EquivalenceProbe:
    """Ratios ``||grad_L^k u||_{L^p_nu} / ||u||_X`` per family member.

    Rejected members carry ``nan`` and are listed with the reason.
    """

    ratios: tuple[float, ...]
    rejected: tuple[tuple[int, str], ...]

    @property
    def accepted(self) -> tuple[float, ...]:
        return tuple(x for x in self.ratios if not math.isnan(x))


def norm_equivalence_probe(
    family: Sequence[RadialFunction], params: SpaceParams
) -> EquivalenceProbe:
    """Empirical ratios between the gradient norm and the full norm."""
    op = OperatorParams.of(params)
    ratios: list[float] = []
    rejected: list[tuple[int, str]] = []
    for idx, u in enumerate(family):
        try:
            check_navier(u, params.k, op)
        except NavierViolation as exc:
            ratios.append(math.nan)
            rejected.append((idx, str(exc)))
            continue
        full = xkp_norm(u, params)
        ratios.append(grad_norm(u, params) / full if full > 0 else math.nan)
        if full == 0:
            rejected.append((idx, "zero function"))
    return EquivalenceProbe(tuple(ratios), tuple(rejected))
