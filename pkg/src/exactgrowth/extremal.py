"""Concentrating test sequences and divergence-rate sweeps.

The log profile ``H`` rises from 0 to 1 over ``[0, 1]``; it is linear in the
middle and follows a smooth cap polynomial ``phi`` on the two end layers of
width ``epsilon``.  The test function

    psi_n(r) = H(log(R/r) / log n)

equals 1 on ``r <= R/n`` and vanishes at ``R``.  In ``x = log r`` every
derivative of ``psi_n`` is a scaled derivative of ``H``, so ``psi_n`` is
carried as a closed form with exact derivatives of any order, and its
generalized gradient is exact up to the quadrature that measures its norm.

With critical weights the normalization bracket
``A = ||grad_L^k psi_n||^p (log n)^(p-1) |c|^-p`` reduces to the one-dimensional
integral ``int_0^1 |H' + sum_i rho_i (log n)^(1-i) H^(i)|^p ds``, where the
``rho_i`` come from the polynomial in ``d/dx`` that represents ``grad_L^k``.
A tuned cap minimizes the cap layers' share of this integral at a given
``epsilon`` (exactly for ``p = 2``) and a sweep picks the ``epsilon`` that
minimizes ``A``.
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial import Legendre, Polynomial

from exactgrowth.errors import HypothesisViolation, NormalizationError, ParameterError
from exactgrowth.functionals import evaluate_functional, lp_norm_power
from exactgrowth.operators import OperatorParams, _gradient_polynomial, grad_norm
from exactgrowth.radial_core import (
    RadialFunction,
    SpaceParams,
    make_geometric_grid,
    radial_derivatives_from_log,
)
from exactgrowth.special_constants import coefficient_table

#: Tolerance for the cap constraints and the monotonicity check.
CAP_TOLERANCE = 1e-10
#: Grid on which ``phi' >= 0`` is verified.
MONOTONE_CHECK_POINTS = 1000
#: Allowed excess of the measured gradient norm over 1 after normalization.
NORMALIZATION_SLACK = 0.02
#: Environment variable capping sweep threads.
THREADS_ENV = "EXACTGROWTH_THREADS"

DEFAULT_N_LIST = (10**2, 10**3, 10**4, 10**5, 10**6)
DEFAULT_EPSILON = 0.1
DEFAULT_EPSILON_GRID = tuple(np.round(np.linspace(0.2, 0.49, 30), 4))
DEFAULT_TUNED_DEGREE = 41

_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


# ---------------------------------------------------------------------------
# cap polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CapPolynomial:
    """Polynomial ``phi`` on ``[0, 1]`` that is flat to order ``k+1`` at 0 and
    joins the line ``t`` at 1 (``phi(1) = phi'(1) = 1``, higher derivatives
    up to order ``k-1`` zero).

    ``coefficients`` are Bernstein coefficients when ``basis`` is
    ``"bernstein"``.  When it is ``"legendre"`` the cap is
    ``make_cap(k) + x^(k+2) (1-x)^max(k,2) q(x)`` with ``q`` the Legendre
    series on ``[0, 1]`` given by ``coefficients``; the polynomial factor
    vanishes to the required orders at both ends, so every end condition is
    inherited exactly from the minimal cap.  ``exact`` optionally holds the
    ascending monomial coefficients as fractions; constraint residuals are
    then computed exactly.
    """

    k: int
    coefficients: tuple[float, ...]
    basis: str = "bernstein"
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if self.basis not in ("bernstein", "legendre"):
            raise ParameterError(f"unknown cap basis {self.basis!r}")
        coefs = tuple(float(c) for c in self.coefficients)
        if not coefs:
            raise ParameterError("a cap needs at least one coefficient")
        object.__setattr__(self, "coefficients", coefs)

    @property
    def degree(self) -> int:
        if self.basis == "legendre":
            return _vanishing_factor(self.k).degree() + len(self.coefficients) - 1
        return len(self.coefficients) - 1

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        if self.basis == "legendre":
            series = Legendre(self.coefficients, domain=[0.0, 1.0])
            return make_cap(self.k).derivative(x, order) + _product_derivative(
                _vanishing_factor(self.k), series, x, order
            )
        if order > self.degree:
            return np.zeros_like(x)
        b = np.asarray(self.coefficients)
        for _ in range(order):
            b = (b.size - 1) * np.diff(b)
        m = b.size - 1
        j = np.arange(m + 1)
        binom = np.array([math.comb(m, i) for i in j], dtype=float)
        xe = x[..., None]
        return np.sum(b * binom * xe**j * (1.0 - xe) ** (m - j), axis=-1)

    def _exact_derivative(self, x: Fraction, order: int) -> Fraction:
        return sum(
            (math.perm(m, order) * c * x ** (m - order) for m, c in enumerate(self.exact) if m >= order),
            Fraction(0),
        )

    def constraint_residuals(self) -> dict[str, float]:
        """Largest violation of the conditions at 0 and at 1."""
        targets1 = [(i, 1.0 if i < 2 else 0.0) for i in range(max(self.k, 2))]
        if self.exact is not None:
            d0 = [abs(self._exact_derivative(Fraction(0), i)) for i in range(self.k + 2)]
            d1 = [abs(self._exact_derivative(Fraction(1), i) - Fraction(t)) for i, t in targets1]
            return {"at_zero": float(max(d0)), "at_one": float(max(d1))}
        d0 = [abs(float(self.derivative(0.0, i))) for i in range(self.k + 2)]
        d1 = [abs(float(self.derivative(1.0, i)) - t) for i, t in targets1]
        return {"at_zero": max(d0), "at_one": max(d1)}

    def min_slope(self, points: int = MONOTONE_CHECK_POINTS) -> float:
        return float(np.min(self.derivative(np.linspace(0.0, 1.0, points), 1)))

    def check(self) -> None:
        """Raise unless the constraints hold and ``phi' >= 0`` on a grid."""
        res = self.constraint_residuals()
        if max(res.values()) > CAP_TOLERANCE:
            raise HypothesisViolation(f"cap constraints violated: {res}")
        slope = self.min_slope()
        if slope < -CAP_TOLERANCE:
            raise HypothesisViolation(
                f"cap is not monotone: min phi' = {slope:.3e} on a "
                f"{MONOTONE_CHECK_POINTS}-point grid"
            )


@functools.lru_cache(maxsize=None)
def _vanishing_factor(k: int) -> Polynomial:
    """``x^(k+2) (1-x)^max(k,2)`` with integer monomial coefficients, so its
    low derivatives evaluate to exactly zero at both ends."""
    return Polynomial([0.0] * (k + 2) + [1.0]) * Polynomial([1.0, -1.0]) ** max(k, 2)


def _product_derivative(factor: Polynomial, series: Legendre, x, order: int):
    """``order``-th derivative of ``factor * series`` by the Leibniz rule."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for j in range(min(order, factor.degree()) + 1):
        outer = factor.deriv(j) if j else factor
        inner = series.deriv(order - j) if order > j else series
        total = total + math.comb(order, j) * outer(x) * inner(x)
    return total


def _check_k(k) -> int:
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    return int(k)


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan elimination over the rationals."""
    n = len(rows)
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ParameterError("cap conditions are singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col] / aug[col][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [aug[i][n] / aug[i][i] for i in range(n)]


@functools.lru_cache(maxsize=None)
def make_cap(k: int) -> CapPolynomial:
    """Lowest-degree polynomial satisfying the cap conditions, by one exact
    linear solve on the monomial coefficients.

    For ``k >= 2`` there are ``2k+2`` conditions and the degree is ``2k+1``.
    For ``k = 1`` the conditions at 0 reach the second derivative, which makes
    five conditions and degree 4.  Raises :class:`HypothesisViolation` when
    the result is not monotone on the check grid.
    """
    k = _check_k(k)
    degree = (k + 2) + max(k, 2) - 1
    rows, rhs = [], []
    for i in range(k + 2):
        rows.append([Fraction(math.factorial(i)) if m == i else Fraction(0) for m in range(degree + 1)])
        rhs.append(Fraction(0))
    for i in range(max(k, 2)):
        rows.append([Fraction(math.perm(m, i)) for m in range(degree + 1)])
        rhs.append(Fraction(1 if i < 2 else 0))
    mono = _solve_exact(rows, rhs)
    bern = [
        sum(Fraction(math.comb(j, i), math.comb(degree, i)) * mono[i] for i in range(j + 1))
        for j in range(degree + 1)
    ]
    cap = CapPolynomial(k, tuple(float(b) for b in bern), "bernstein", tuple(mono))
    cap.check()
    return cap



def gradient_weights(k: int, op: OperatorParams) -> np.ndarray:
    """``rho_i`` for ``i = 1..k`` (with ``rho_1 = 1``) such that
    ``grad_L^k psi_n`` is proportional to ``sum_i rho_i (log n)^(1-i) H^(i)``."""
    poly, _, _ = _gradient_polynomial(int(k), op)
    poly = np.concatenate([poly, np.zeros(max(0, int(k) + 1 - poly.size))])
    lead = poly[1]
    if lead == 0.0:
        raise HypothesisViolation("the first-order coefficient of the gradient vanishes")
    i = np.arange(poly.size)
    return (poly * (-1.0) ** (i - 1) / lead)[1 : int(k) + 1]


def tuned_cap(
    k: int,
    epsilon: float,
    log_n: float,
    op: OperatorParams,
    degree: int = DEFAULT_TUNED_DEGREE,
) -> CapPolynomial:
    """Cap of the given degree minimizing the cap layers' contribution to the
    normalization bracket at ``p = 2``.

    Every cap of the given degree is the minimal cap plus
    ``x^(k+2) (1-x)^max(k,2) q(x)``, so the search over ``q`` is an
    unconstrained least-squares problem for the quadratic energy
    ``epsilon int_0^1 (phi' + S_+)^2 + (phi' + S_-)^2 dx``, where ``S_+`` and
    ``S_-`` collect the higher derivatives with the weights of the two end
    layers.  The monotonicity check is left to the caller.
    """
    k = _check_k(k)
    _check_epsilon(epsilon)
    if degree < (k + 2) + max(k, 2) - 1:
        raise ParameterError(f"degree {degree} is too low for k={k}")
    rho = gradient_weights(k, op)
    base = make_cap(k)
    factor = _vanishing_factor(k)
    basis = [Legendre.basis(j, domain=[0.0, 1.0]) for j in range(degree - factor.degree() + 1)]
    scale = epsilon * log_n

    def layer(columns, sign):
        return sum(
            sign ** (i + 1) * rho[i - 1] * scale ** (1 - i) * columns[i] for i in range(1, k + 1)
        )

    free = {
        i: np.array([_product_derivative(factor, b, _GL_X, i) for b in basis]).T
        for i in range(1, k + 1)
    }
    fixed = {i: base.derivative(_GL_X, i) for i in range(1, k + 1)}
    weight = np.sqrt(epsilon * _GL_W)[:, None]
    design = np.vstack([weight * layer(free, 1.0), weight * layer(free, -1.0)])
    target = -np.concatenate([weight[:, 0] * layer(fixed, 1.0), weight[:, 0] * layer(fixed, -1.0)])
    coefs = np.linalg.lstsq(design, target, rcond=None)[0]
    return CapPolynomial(k, tuple(float(c) for c in coefs), "legendre")


# ---------------------------------------------------------------------------
# the profile H and the test functions
# ---------------------------------------------------------------------------


def _check_epsilon(epsilon: float) -> None:
    if not (0.0 < epsilon < 0.5):
        raise ParameterError(f"epsilon must lie in (0, 1/2), got {epsilon}")


def h_derivative(t, epsilon: float, cap: CapPolynomial, order: int = 0) -> np.ndarray:
    """``order``-th derivative of the profile ``H`` at ``t``.

    ``H(t) = eps phi(t/eps)`` on ``(0, eps]``, ``t`` on ``(eps, 1-eps]``,
    ``1 - eps phi((1-t)/eps)`` on ``(1-eps, 1]``, 1 beyond 1 and 0 for
    ``t <= 0``.
    """
    _check_epsilon(epsilon)
    t = np.asarray(t, dtype=float)
    low = (t > 0.0) & (t <= epsilon)
    mid = (t > epsilon) & (t <= 1.0 - epsilon)
    high = (t > 1.0 - epsilon) & (t <= 1.0)
    out = np.zeros(t.shape)
    scale = epsilon ** (1.0 - order)
    if np.any(low):
        out[low] = scale * cap.derivative(t[low] / epsilon, order)
    if np.any(high):
        y = (1.0 - t[high]) / epsilon
        if order == 0:
            out[high] = 1.0 - epsilon * cap(y)
        else:
            out[high] = -((-1.0) ** order) * scale * cap.derivative(y, order)
    if order == 0:
        out[mid] = t[mid]
        out[t > 1.0] = 1.0
    elif order == 1:
        out[mid] = 1.0
    return out


def h_profile(t, epsilon: float, cap: CapPolynomial):
    """The profile ``H`` (scalar in, scalar out)."""
    out = h_derivative(t, epsilon, cap, 0)
    return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class MoserSequenceParams:
    """Member ``n`` of the concentrating family on ``(0, R)``.

    ``cap`` defaults to :func:`make_cap` for ``space.k``.  ``n_cells`` and
    ``head_ratio`` set the geometric quadrature grid; its inner radius is
    ``min(head_ratio, 1e-2/n) R`` so that the plateau ``r <= R/n`` is always
    resolved.
    """

    n: int
    epsilon: float
    R: float
    space: SpaceParams
    cap: CapPolynomial | None = None
    n_cells: int = 4096
    head_ratio: float = 1e-8

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        _check_epsilon(self.epsilon)
        if not (math.isfinite(self.R) and self.R > 0):
            raise ParameterError(f"R must be positive, got {self.R}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 16:
            raise ParameterError(f"n_cells must be an integer >= 16, got {self.n_cells}")
        if self.cap is not None and self.cap.k != self.space.k:
            raise ParameterError(f"cap is built for k={self.cap.k}, space has k={self.space.k}")

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    def resolved_cap(self) -> CapPolynomial:
        return self.cap if self.cap is not None else make_cap(self.space.k)

    def grid(self):
        ratio = min(self.head_ratio, 1e-2 / self.n)
        return make_geometric_grid(ratio * self.R, self.R, int(self.n_cells))


def psi(r, msp: MoserSequenceParams):
    """``H(log(R/r) / log n)``; 1 for ``r <= R/n`` and 0 for ``r >= R``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ParameterError("psi is defined for r > 0")
    s = np.log(msp.R / r_arr) / msp.log_n
    out = h_derivative(s, msp.epsilon, msp.resolved_cap(), 0)
    return float(out) if np.ndim(r) == 0 else out


def psi_function(msp: MoserSequenceParams) -> RadialFunction:
    """``psi_n`` as a closed form with exact derivatives up to order ``k``."""
    cap = msp.resolved_cap()
    eps, L, R = msp.epsilon, msp.log_n, msp.R
    k = msp.space.k

    def log_derivs(r, order):
        s = np.log(R / r) / L
        return [
            (-1.0 / L) ** i * h_derivative(s, eps, cap, i) for i in range(order + 1)
        ]

    def value(r):
        r = np.asarray(r, dtype=float)
        return h_derivative(np.log(R / r) / L, eps, cap, 0)

    def nth(j):
        return lambda r: radial_derivatives_from_log(
            log_derivs(np.asarray(r, dtype=float), j), np.asarray(r, dtype=float), j
        )

    return RadialFunction.closed_form(value, [nth(j) for j in range(1, k + 1)], R, msp.grid())


def normalization_coefficient(params: SpaceParams) -> float:
    """``|c_(1,j)|`` for even ``k = 2j``; ``|j (gamma-2-theta) c_(1,j)|`` for odd
    ``k = 2j+1`` (with ``c_(1,0) = 1``)."""
    j = params.k // 2
    if j == 0:
        c = 1.0
    else:
        c = coefficient_table(params.theta, params.gamma, j).c[(1, j)]
    if params.k % 2:
        # the extra first derivative of the odd case acts on r^(j(gamma-2-theta)) c_(1,j)
        c = (j * (params.gamma - 2.0 - params.theta) if j else 1.0) * c
    return abs(c)


def bracket_integral(
    epsilon: float, cap: CapPolynomial, log_n: float, p: float, op: OperatorParams, k: int
) -> float:
    """``int_0^1 |H' + sum_i rho_i (log n)^(1-i) H^(i)|^p ds`` by Gauss-Legendre
    on each of the three pieces of ``H``."""
    rho = gradient_weights(k, op)
    total = 0.0
    for lo, hi in ((0.0, epsilon), (epsilon, 1.0 - epsilon), (1.0 - epsilon, 1.0)):
        s = lo + (hi - lo) * _GL_X
        body = sum(
            rho[i - 1] * log_n ** (1 - i) * h_derivative(s, epsilon, cap, i)
            for i in range(1, k + 1)
        )
        total += (hi - lo) * float(np.dot(_GL_W, np.abs(body) ** p))
    return total


@dataclass(frozen=True, eq=False)
class NormalizedMoser:
    """``u_n = psi_n / (|c| (log n)^((1-p)/p) A^(1/p))`` with the measured
    bracket ``A``; ``grad_norm`` is the measured norm of ``grad_L^k u_n``."""

    function: RadialFunction
    bracket: float
    grad_norm: float
    psi_grad_norm: float
    coefficient: float
    params: MoserSequenceParams

    @property
    def amplitude(self) -> float:
        return float(np.max(np.abs(self.function.values)))


def normalized_moser(msp: MoserSequenceParams) -> RadialFunction:
    """``u_n``; see :func:`moser_normalization` for the measured quantities."""
    return moser_normalization(msp).function


def moser_normalization(msp: MoserSequenceParams) -> NormalizedMoser:
    """Normalize ``psi_n`` by its measured gradient norm.

    Raises :class:`HypothesisViolation` unless ``alpha_k = kp - 1`` and
    :class:`NormalizationError` if the normalized gradient norm exceeds
    ``1 + NORMALIZATION_SLACK``.
    """
    space = msp.space
    if abs(space.alpha_k - (space.k * space.p - 1.0)) > 1e-12 * max(1.0, abs(space.alpha_k)):
        raise HypothesisViolation(
            f"alpha_k must equal kp-1={space.k * space.p - 1}, got {space.alpha_k}"
        )
    base = psi_function(msp)
    g_psi = float(grad_norm(base, space))
    c = normalization_coefficient(space)
    L, p = msp.log_n, space.p
    bracket = g_psi**p * L ** (p - 1.0) / c**p
    divisor = c * L ** ((1.0 - p) / p) * bracket ** (1.0 / p)
    u = RadialFunction.closed_form(
        lambda r, f=base.value_fn: f(r) / divisor,
        [lambda r, f=d: f(r) / divisor for d in base.derivative_fns],
        msp.R,
        base.grid,
    )
    g_u = float(grad_norm(u, space))
    if g_u > 1.0 + NORMALIZATION_SLACK:
        raise NormalizationError(
            f"normalized gradient norm {g_u:.6f} exceeds 1 + {NORMALIZATION_SLACK}"
        )
    return NormalizedMoser(u, bracket, g_u, g_psi, c, msp)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    n: int
    ratio: float
    log_ratio: float
    functional: float
    log_functional: float
    norm_p: float
    grad_norm: float
    bracket: float
    epsilon: float
    amplitude: float
    log_space: bool

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class SweepTable:
    """Rows ordered by ``n`` and the least-squares slope of ``log ratio``
    against ``log log n`` over the last ``fit_points`` rows."""

    beta: float
    q: float
    mode: str
    cap_mode: str
    rows: tuple[SweepRow, ...]
    slope: float
    fit_points: int

    @property
    def n_values(self) -> tuple[int, ...]:
        return tuple(r.n for r in self.rows)

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(r.ratio for r in self.rows)


def fit_slope(n_values: Sequence[int], log_values: Sequence[float]) -> tuple[float, int]:
    """Least-squares slope of ``log_values`` against ``log log n`` over the
    last ``ceil(N/2)`` points."""
    count = math.ceil(len(n_values) / 2)
    x = np.log(np.log(np.asarray(n_values, dtype=float)))[-count:]
    y = np.asarray(log_values, dtype=float)[-count:]
    if count < 2:
        return math.nan, count
    slope = np.polyfit(x, y, 1)[0]
    return float(slope), count


def thread_limit(default: int | None = None) -> int:
    """Worker count for sweeps, capped by ``EXACTGROWTH_THREADS`` when set."""
    cap = os.environ.get(THREADS_ENV)
    limit = default if default is not None else (os.cpu_count() or 1)
    if cap:
        try:
            value = int(cap)
        except ValueError:
            raise ParameterError(f"{THREADS_ENV} must be a positive integer, got {cap!r}") from None
        if value < 1:
            raise ParameterError(f"{THREADS_ENV} must be a positive integer, got {cap!r}")
        limit = min(limit, value)
    return max(1, limit)


def select_tuned_cap(
    msp: MoserSequenceParams,
    epsilon_grid: Sequence[float] = DEFAULT_EPSILON_GRID,
    degree: int = DEFAULT_TUNED_DEGREE,
) -> MoserSequenceParams:
    """Copy of ``msp`` with the monotone tuned cap and ``epsilon`` from the
    grid that minimize the bracket integral at ``n``."""
    space = msp.space
    op = OperatorParams.of(space)
    best = None
    for eps in epsilon_grid:
        cap = tuned_cap(space.k, float(eps), msp.log_n, op, degree)
        if cap.min_slope() < -CAP_TOLERANCE:
            continue
        value = bracket_integral(float(eps), cap, msp.log_n, space.p, op, space.k)
        if best is None or value < best[0]:
            best = (value, float(eps), cap)
    if best is None:
        raise HypothesisViolation("no monotone tuned cap on the epsilon grid")
    return replace(msp, epsilon=best[1], cap=best[2])


def _sweep_row(beta, q, mode, msp) -> SweepRow:
    space = msp.space
    nm = moser_normalization(msp)
    fv = evaluate_functional(nm.function, beta, q, space.p, space.eta)
    norm_p = float(lp_norm_power(nm.function, space.p, space.eta))
    if mode == "ratio":
        log_ratio = fv.log_value - math.log(norm_p)
        with np.errstate(over="ignore"):
            ratio = float(np.exp(log_ratio)) if fv.log_space else fv.value / norm_p
    else:
        log_ratio, ratio = fv.log_value, fv.value
    return SweepRow(
        n=msp.n,
        ratio=ratio,
        log_ratio=log_ratio,
        functional=fv.value,
        log_functional=fv.log_value,
        norm_p=norm_p,
        grad_norm=nm.grad_norm,
        bracket=nm.bracket,
        epsilon=msp.epsilon,
        amplitude=nm.amplitude,
        log_space=fv.log_space,
    )


def sharpness_sweep(
    beta: float,
    q: float,
    n_list: Sequence[int],
    msp_base: MoserSequenceParams,
    mode: str = "ratio",
    cap_mode: str = "tuned",
    epsilon_grid: Sequence[float] = DEFAULT_EPSILON_GRID,
    degree: int = DEFAULT_TUNED_DEGREE,
    threads: int | None = None,
) -> SweepTable:
    """Functional over ``||u_n||^p_{L^p_eta}`` (``mode="ratio"``) or the bare
    functional (``mode="integral"``) along normalized test functions.

    ``cap_mode="fixed"`` uses ``msp_base.epsilon`` and its cap (the minimal
    cap by default) for every ``n``; ``"tuned"`` selects cap and ``epsilon``
    per ``n`` with :func:`select_tuned_cap`.  Entries are evaluated on up to
    :func:`thread_limit` threads and returned in the order of ``n_list``.
    """
    if mode not in ("ratio", "integral"):
        raise ParameterError(f"mode must be 'ratio' or 'integral', got {mode!r}")
    if cap_mode not in ("tuned", "fixed"):
        raise ParameterError(f"cap_mode must be 'tuned' or 'fixed', got {cap_mode!r}")
    n_values = [int(n) for n in n_list]
    if len(n_values) < 3:
        raise ParameterError("n_list needs at least 3 entries")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ParameterError("n_list must be strictly ascending")
    members = [replace(msp_base, n=n) for n in n_values]
    if cap_mode == "tuned":
        members = [select_tuned_cap(m, epsilon_grid, degree) for m in members]
    workers = min(len(members), thread_limit(threads))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda m: _sweep_row(beta, q, mode, m), members))
    else:
        rows = [_sweep_row(beta, q, mode, m) for m in members]
    slope, count = fit_slope(n_values, [r.log_ratio for r in rows])
    return SweepTable(float(beta), float(q), mode, cap_mode, tuple(rows), slope, count)
