"""Exact-growth functionals, their subcritical and full-norm variants, and a
numerical estimate of the sequence bound ``mu(h)``.

The exact-growth functional is

    F(u) = int_0^inf exp_p(beta |u|**(p/(p-1))) / (1 + |u|)**q  r**eta dr,

evaluated on the piecewise-linear reading of ``u`` by six-point
Gauss-Legendre per linear piece (see :func:`exactgrowth.symmetrize.quadrature_points`).
A rearranged function is integrated over its exact plateau and ramp
structure instead, so ``F(u) = F(u*)`` holds to quadrature accuracy.

When some exponent ``beta |u|**(p/(p-1))`` exceeds the log-space threshold
of :func:`exactgrowth.special_constants.exp_p`, the integral is accumulated as
a log-sum-exp and flagged rather than saturated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from exactgrowth.errors import InfeasibleError, ParameterError
from exactgrowth.operators import grad_norm as _grad_norm
from exactgrowth.radial_core import RadialFunction, SpaceParams, weighted_lp_norm
from exactgrowth.special_constants import LOG_SPACE_THRESHOLD, exp_p, log_exp_p
from exactgrowth.symmetrize import (
    SymmetrizedFunction,
    quadrature_points,
    rearranged_quadrature_points,
)


@dataclass(frozen=True)
class InequalityParams:
    """Exponent coefficient ``beta``, denominator power ``q``, integrability
    exponent ``p`` and weight exponent ``eta`` of the functional."""

    beta: float
    q: float
    p: float
    eta: float

    def __post_init__(self):
        for name in ("beta", "q", "p", "eta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, float(value))
        if self.beta < 0:
            raise ParameterError(f"beta must be non-negative, got {self.beta}")
        if self.q < 0:
            raise ParameterError(f"q must be non-negative, got {self.q}")
        if not self.p > 1:
            raise ParameterError(f"p must exceed 1, got {self.p}")
        if not self.eta > -1:
            raise ParameterError(f"eta must exceed -1, got {self.eta}")

    @property
    def conjugate(self) -> float:
        """``p/(p-1)``, the power of ``|u|`` inside ``exp_p``."""
        return self.p / (self.p - 1.0)

    def as_dict(self) -> dict:
        return {"beta": self.beta, "q": self.q, "p": self.p, "eta": self.eta}


@dataclass(frozen=True)
class FunctionalValue:
    """A functional value together with its logarithm.

    ``log_space`` is set when the integrand had to be evaluated through its
    logarithm; ``value`` is then ``exp(log_value)`` and may be ``inf`` even
    though ``log_value`` is finite.
    """

    value: float
    log_value: float
    log_space: bool


@dataclass(frozen=True)
class InequalityReport:
    """Functional value, ``||u||^p_{L^p_eta}`` and their ratio.

    ``ratio`` is ``nan`` and ``norm_zero`` is set when ``norm_p == 0``.
    ``grad_norm`` is ``||grad_L^k u||_{L^p_nu}`` so that callers can check the
    unit-ball constraint.
    """

    functional_value: float
    norm_p: float
    ratio: float
    grad_norm: float
    params: InequalityParams
    log_functional_value: float
    log_ratio: float
    log_space: bool
    norm_zero: bool

    def as_dict(self) -> dict:
        return {
            "functional_value": self.functional_value,
            "norm_p": self.norm_p,
            "ratio": self.ratio,
            "grad_norm": self.grad_norm,
            "log_functional_value": self.log_functional_value,
            "log_ratio": self.log_ratio,
            "log_space": self.log_space,
            "norm_zero": self.norm_zero,
            "params": self.params.as_dict(),
        }


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


def _points(u, eta: float) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(u, SymmetrizedFunction):
        if abs(eta - u.nu) > 1e-12 * max(1.0, abs(eta)):
            raise ParameterError(
                f"a rearranged function is integrated against its own weight nu={u.nu}"
            )
        return rearranged_quadrature_points(u)
    return quadrature_points(u, eta)


def _logsumexp(logs: np.ndarray) -> float:
    finite = logs[np.isfinite(logs)]
    if finite.size == 0:
        return -math.inf
    top = float(finite.max())
    return top + math.log(float(np.sum(np.exp(finite - top))))


def evaluate_functional(u, beta: float, q: float, p: float, eta: float) -> FunctionalValue:
    """``int exp_p(beta |u|^(p/(p-1))) (1+|u|)^-q r^eta dr`` with its log.

    ``u`` may be a :class:`RadialFunction` or a :class:`SymmetrizedFunction`
    (then ``eta`` must equal its ``nu``).
    """
    ip = InequalityParams(beta, q, p, eta)
    values, weights = _points(u, ip.eta)
    exponent = ip.beta * values**ip.conjugate
    keep = (weights > 0) & (exponent > 0)
    exponent, values, weights = exponent[keep], values[keep], weights[keep]
    if exponent.size == 0:
        return FunctionalValue(0.0, -math.inf, False)
    if float(exponent.max()) <= LOG_SPACE_THRESHOLD:
        integrand = exp_p(ip.p, exponent) / (1.0 + values) ** ip.q
        value = float(np.dot(weights, integrand))
        return FunctionalValue(value, math.log(value) if value > 0 else -math.inf, False)
    logs = log_exp_p(ip.p, exponent) - ip.q * np.log1p(values) + np.log(weights)
    log_value = _logsumexp(logs)
    with np.errstate(over="ignore"):
        value = float(np.exp(log_value))
    return FunctionalValue(value, log_value, True)


def exact_growth_functional(u, ip: InequalityParams) -> float:
    """``int exp_p(beta |u|^(p/(p-1))) / (1+|u|)^q r^eta dr``.

    Returns ``inf`` only when the value exceeds the float range; use
    :func:`evaluate_functional` to obtain the logarithm in that case.
    """
    return evaluate_functional(u, ip.beta, ip.q, ip.p, ip.eta).value


def subcritical_functional(u, beta: float, p: float, eta: float) -> float:
    """``int exp_p(beta |u|^(p/(p-1))) r^eta dr`` (no denominator)."""
    return evaluate_functional(u, beta, 0.0, p, eta).value


def lp_norm_power(u: RadialFunction, p: float, eta: float) -> float:
    """``||u||^p_{L^p_eta}``."""
    return weighted_lp_norm(u, p, eta) ** p


def ratio_report(u: RadialFunction, params: SpaceParams, ip: InequalityParams) -> InequalityReport:
    """Functional value over ``||u||^p_{L^p_eta}``, plus the gradient norm."""
    if abs(ip.p - params.p) > 1e-12 * params.p:
        raise ParameterError(
            f"functional exponent p={ip.p} differs from the space exponent p={params.p}"
        )
    fv = evaluate_functional(u, ip.beta, ip.q, ip.p, ip.eta)
    norm_p = float(lp_norm_power(u, ip.p, ip.eta))
    gnorm = float(_grad_norm(u, params))
    if norm_p > 0:
        log_ratio = fv.log_value - math.log(norm_p)
        with np.errstate(over="ignore"):
            ratio = fv.value / norm_p if not fv.log_space else float(np.exp(log_ratio))
        zero = False
    else:
        log_ratio = math.nan
        ratio = math.nan
        zero = True
    return InequalityReport(
        functional_value=fv.value,
        norm_p=norm_p,
        ratio=ratio,
        grad_norm=gnorm,
        params=ip,
        log_functional_value=fv.log_value,
        log_ratio=log_ratio,
        log_space=fv.log_space,
        norm_zero=zero,
    )


def full_norm_constraint(u: RadialFunction, params: SpaceParams, tau: float) -> float:
    """``||grad_L^k u||^p_{L^p_nu} + tau ||u||^p_{L^p_eta}``."""
    if not (math.isfinite(tau) and tau > 0):
        raise ParameterError(f"tau must be a positive finite number, got {tau}")
    if not np.any(u.values):
        return 0.0
    return _grad_norm(u, params) ** params.p + tau * lp_norm_power(u, params.p, params.eta)


# ---------------------------------------------------------------------------
# the sequence bound mu(h)
# ---------------------------------------------------------------------------
#
# mu(h) = inf (sum a_k^p e^k)^(1/p) over a >= 0 with sum a_k = h and
# sum a_k^p <= 1.  In the original coordinates the objective has curvature
# ranging over e^0..e^(K-1), so no fixed step can work.  The descent runs in
# b_k = a_k e^(k/p), where the objective is the plain p-norm of b and the
# feasible set becomes {b >= 0, sum c_k b_k = h, sum d_k b_k^p <= 1} with
# c_k = e^(-k/p), d_k = e^(-k).  Each step is followed by the exact Euclidean
# projection onto that set.


def _illinois(fn, lo, hi, f_lo, f_hi, tol, max_iter=200):
    """Row-wise root of a decreasing function bracketed by ``f_lo >= 0 >= f_hi``."""
    lo, hi, f_lo, f_hi = (np.array(a, dtype=float) for a in (lo, hi, f_lo, f_hi))
    side = np.zeros(lo.shape, dtype=int)
    t = hi.copy()
    for _ in range(max_iter):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        t = np.where(np.isfinite(t) & (t > lo) & (t < hi), t, 0.5 * (lo + hi))
        f = fn(t)
        pos = f > 0
        lo = np.where(pos, t, lo)
        hi = np.where(pos, hi, t)
        f_lo = np.where(pos, f, f_lo)
        f_hi = np.where(pos, f_hi, f)
        # halve the retained endpoint when the same side moves twice
        f_hi = np.where(pos & (side == 1), 0.5 * f_hi, f_hi)
        f_lo = np.where(~pos & (side == -1), 0.5 * f_lo, f_lo)
        side = np.where(pos, 1, -1)
        if np.all((np.abs(f) <= tol) | (hi - lo <= 1e-15 * np.maximum(1.0, np.abs(t)))):
            break
    return t


def _newton_bracketed(fn, lo, hi, f_lo, f_hi, tol, max_iter=200):
    """Row-wise root of a decreasing function bracketed by ``f_lo >= 0 >= f_hi``.

    ``fn(t)`` returns the value and the derivative.  Newton steps that leave
    the current bracket are replaced by bisection.
    """
    lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
    t = np.where(np.abs(f_lo) < np.abs(f_hi), lo, hi)
    for _ in range(max_iter):
        f, slope = fn(t)
        pos = f > 0
        lo = np.where(pos, t, lo)
        hi = np.where(pos, hi, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = t - f / slope
        inside = np.isfinite(nxt) & (nxt > lo) & (nxt < hi)
        nxt = np.where(inside, nxt, 0.5 * (lo + hi))
        settled = (np.abs(f) <= tol) | (np.abs(nxt - t) <= 1e-15 * np.maximum(1.0, np.abs(t)))
        t = np.where(settled, t, nxt)
        if np.all(settled):
            break
    return t


def _shrink_roots(z: np.ndarray, a: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``x + a x^(p-1) = z`` for ``x >= 0`` where ``z > 0`` (else 0).

    Returns ``x`` and ``dx/dz``.  The equation is rewritten as an increasing
    convex function of ``x`` (``p > 2``) or of ``s = x^(p-1)`` (``p < 2``)
    and solved by Newton from an upper bound, which converges monotonically.
    """
    zp = np.maximum(z, 0.0)
    pos = zp > 0
    safe_a = np.maximum(a, 1e-300)
    if p == 3:
        # quadratic a x^2 + x - z = 0, written in the cancellation-free form
        root = np.sqrt(1.0 + 4.0 * a * zp)
        return 2.0 * zp / (1.0 + root), np.where(pos, 1.0 / root, 0.0)
    if p > 2:
        with np.errstate(over="ignore"):
            x = np.minimum(zp, (zp / safe_a) ** (1.0 / (p - 1.0)))
        for _ in range(200):
            f = x + a * x ** (p - 1.0) - zp
            slope = 1.0 + a * (p - 1.0) * np.where(pos, x, 1.0) ** (p - 2.0)
            step = np.where(pos, f / slope, 0.0)
            x = x - step
            if np.all(step <= 1e-15 * np.maximum(x, 1e-300)):
                break
        x = np.where(pos, x, 0.0)
        slope = 1.0 + a * (p - 1.0) * np.where(pos, x, 1.0) ** (p - 2.0)
        return x, np.where(pos, 1.0 / slope, 0.0)
    e = 1.0 / (p - 1.0)
    s = np.minimum(zp ** (p - 1.0), zp / safe_a)
    for _ in range(200):
        f = s**e + a * s - zp
        slope = e * np.where(pos, s, 1.0) ** (e - 1.0) + a
        step = np.where(pos, f / slope, 0.0)
        s = s - step
        if np.all(step <= 1e-15 * np.maximum(s, 1e-300)):
            break
    s = np.where(pos, s, 0.0)
    # dx/dz = (dx/ds) / (dz/ds) with x = s^e and z = s^e + a s
    dx_ds = e * np.where(pos, s, 1.0) ** (e - 1.0)
    return s**e, np.where(pos, dx_ds / (dx_ds + a), 0.0)


class _CappedSimplexProjection:
    """Euclidean projection of the rows of ``y`` onto
    ``{b >= 0, sum c b = h, sum d b^p <= 1}``.

    With multipliers ``tau`` (hyperplane) and ``lam`` (cap) the projection is
    ``b = shrink(max(0, y - tau c))`` where ``shrink`` solves
    ``b + lam p d b^(p-1) = z``.  For ``p = 2`` or ``lam = 0`` the shrink is
    linear and ``tau`` follows exactly from the rows sorted by ``y/c``;
    otherwise ``tau`` is found by bracketed Newton.  ``lam`` is found by a
    bracketed secant search in ``log lam``, started around the multiplier of
    the previous step.
    """

    def __init__(self, c: np.ndarray, d: np.ndarray, h: float, p: float):
        self.c, self.d, self.h, self.p = c, d, float(h), float(p)

    # -- linear shrink: exact from sorted breakpoints ---------------------------

    def _linear(self, y, lam):
        order = np.argsort(-(y / self.c), axis=1)
        ys = np.take_along_axis(y, order, 1)
        cs, ds = self.c[order], self.d[order]
        ratio = ys / cs
        w = 1.0 / (1.0 + 2.0 * lam[:, None] * ds) if self.p == 2 else np.ones_like(ys)
        a_cum = np.cumsum(cs * w * ys, axis=1)
        b_cum = np.cumsum(cs * cs * w, axis=1)
        taus = (a_cum - self.h) / b_cum
        last = np.sum(ratio > taus, axis=1) - 1
        tau = np.take_along_axis(taus, last[:, None], 1)[:, 0]
        xs = w * np.maximum(0.0, ys - tau[:, None] * cs)
        x = np.empty_like(y)
        np.put_along_axis(x, order, xs, 1)
        return x, tau

    # -- nonlinear shrink ------------------------------------------------------

    def _nonlinear(self, y, lam):
        _, tau0 = self._linear(y, np.zeros(len(y)))
        a = lam[:, None] * self.p * self.d

        def excess(t):
            x, dx = _shrink_roots(y - t[:, None] * self.c, a, self.p)
            return np.sum(self.c * x, axis=1) - self.h, -np.sum(self.c * self.c * dx, axis=1)

        # shrinking lowers every entry, so tau0 is an upper bracket
        hi = tau0
        f_hi, slope_hi = excess(hi)
        # twice the Newton step from the upper end usually brackets the root
        with np.errstate(divide="ignore", invalid="ignore"):
            width = 2.0 * f_hi / slope_hi
        width = np.where(np.isfinite(width) & (width > 0), width, 1.0)
        lo = hi - width
        f_lo = excess(lo)[0]
        while np.any(f_lo < 0):
            grow = f_lo < 0
            width = np.where(grow, 4.0 * width, width)
            lo = np.where(grow, hi - width, lo)
            f_lo = excess(lo)[0]
        tau = _newton_bracketed(excess, lo, hi, f_lo, f_hi, 1e-14 * self.h)
        return _shrink_roots(y - tau[:, None] * self.c, a, self.p)[0]

    def _at(self, y, lam):
        if self.p == 2 or np.all(lam == 0):
            return self._linear(y, lam)[0]
        return self._nonlinear(y, lam)

    def __call__(self, y: np.ndarray, lam_hint: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = len(y)
        free, _ = self._linear(y, np.zeros(n))
        excess0 = np.sum(self.d * free**self.p, axis=1) - 1.0
        lam = np.zeros(n)
        capped = excess0 > 0
        if not np.any(capped):
            return free, lam
        rows = np.nonzero(capped)[0]
        ys = y[rows]

        def excess(log_lam):
            return np.sum(self.d * self._at(ys, np.exp(log_lam)) ** self.p, axis=1) - 1.0

        hint = lam_hint[rows]
        centre = np.where(hint > 0, np.log(np.where(hint > 0, hint, 1.0)), 0.0)
        reach = np.full(len(rows), math.log(2.0))
        lo, hi = centre - reach, centre + reach
        f_lo, f_hi = excess(lo), excess(hi)
        # widen geometrically until the cap excess changes sign
        while np.any(f_lo <= 0) or np.any(f_hi > 0):
            reach *= 2.0
            low_bad, high_bad = f_lo <= 0, f_hi > 0
            lo = np.where(low_bad, centre - reach, lo)
            hi = np.where(high_bad, centre + reach, hi)
            if np.any(low_bad):
                f_lo = np.where(low_bad, excess(lo), f_lo)
            if np.any(high_bad):
                f_hi = np.where(high_bad, excess(hi), f_hi)
        log_lam = _illinois(excess, lo, hi, f_lo, f_hi, 1e-14)
        lam[rows] = np.exp(log_lam)
        out = free.copy()
        out[rows] = self._at(ys, lam[rows])
        return out, lam


@dataclass(frozen=True)
class SequenceBoundEstimate:
    """Best value of the descent and the sequence that attains it.

    ``converged`` records whether the movement criterion was met before the
    iteration cap; either way every value is an upper bound.
    """

    value: float
    sequence: np.ndarray
    iterations: int
    restart_values: tuple[float, ...]
    converged: bool = True


def mu_h_descent(
    h: float,
    p: float,
    K: int,
    seed: int = 0,
    restarts: int = 20,
    step: float = 1e-2,
    iterations: int = 10_000,
) -> SequenceBoundEstimate:
    """Projected gradient for ``inf (sum a_k^p e^k)^(1/p)`` over nonnegative
    length-``K`` sequences with ``sum a_k = h`` and ``sum a_k^p <= 1``.

    All restarts run together from uniform random points.  The loop stops
    early once no coordinate moves by more than ``1e-13`` of the largest.
    Every returned sequence is feasible up to rounding, so each restart value
    is an upper bound for the infimum.
    """
    if not (math.isfinite(h) and h > 1):
        raise ParameterError(f"h must exceed 1, got {h}")
    if not (math.isfinite(p) and p > 1):
        raise ParameterError(f"p must exceed 1, got {p}")
    if int(K) != K or K < 16:
        raise ParameterError(f"K must be an integer >= 16, got {K}")
    if restarts < 1 or iterations < 0 or not step > 0:
        raise ParameterError("restarts >= 1, iterations >= 0 and step > 0 are required")
    K = int(K)
    ceiling = K ** ((p - 1.0) / p)
    if h > ceiling * (1.0 + 1e-15):
        raise InfeasibleError(
            f"h={h} exceeds K^((p-1)/p)={ceiling:.6g}: no sequence of length {K} "
            "has l1 norm h inside the unit l^p ball"
        )
    k = np.arange(K, dtype=float)
    c = np.exp(-k / p)
    d = np.exp(-k)
    project = _CappedSimplexProjection(c, d, h, p)
    rng = np.random.default_rng(seed)
    lam = np.zeros(restarts)
    b, lam = project(rng.random((restarts, K)) / c, lam)
    done = 0
    converged = False
    for done in range(1, iterations + 1):
        moved, lam = project(b - step * p * b ** (p - 1.0), lam)
        delta = float(np.max(np.abs(moved - b)))
        b = moved
        if delta <= 1e-13 * float(np.max(np.abs(b))):
            converged = True
            break
    values = np.sum(b**p, axis=1) ** (1.0 / p)
    best = int(np.argmin(values))
    return SequenceBoundEstimate(
        value=float(values[best]),
        sequence=b[best] * c,
        iterations=done,
        restart_values=tuple(float(v) for v in values),
        converged=converged,
    )


def mu_h_estimate(
    h: float,
    p: float,
    K: int,
    seed: int = 0,
    restarts: int = 20,
    step: float = 1e-2,
    iterations: int = 10_000,
) -> float:
    """Best value of :func:`mu_h_descent`, an upper bound for ``mu(h)``."""
    return mu_h_descent(h, p, K, seed, restarts, step, iterations).value


def sequence_norm(a, p: float) -> float:
    """``(sum |a_k|^p e^k)^(1/p)`` for ``k = 0, 1, ...``."""
    a = np.abs(np.asarray(a, dtype=float))
    k = np.arange(a.size, dtype=float)
    return float(np.sum(a**p * np.exp(k)) ** (1.0 / p))
