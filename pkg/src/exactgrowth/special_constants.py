"""Gamma function, the regularized exponential ``exp_p``, sharp exponent
constants, Hardy-type constants and the concentration-coefficient table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from exactgrowth.errors import DomainError, HypothesisViolation, ParameterError
from exactgrowth.radial_core import SpaceParams

# Lanczos approximation, g = 7 (Godfrey's coefficient set).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_series(z: float) -> float:
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (z + i)
    return acc


def log_gamma(x: float) -> float:
    """Natural log of ``gamma_fn(x)`` for ``x > 0``."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"Gamma is only supported for finite x > 0, got {x}")
    if x < 0.5:
        return log_gamma(x + 1.0) - math.log(x)
    z = x - 1.0
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_TWO_PI + (z + 0.5) * math.log(t) - t + math.log(_lanczos_series(z))


def gamma_fn(x: float) -> float:
    """Euler's Gamma function for ``x > 0`` via the Lanczos approximation."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"Gamma is only supported for finite x > 0, got {x}")
    if x < 0.5:
        return gamma_fn(x + 1.0) / x
    if x > 140.0:
        return math.exp(log_gamma(x))
    z = x - 1.0
    t = z + _LANCZOS_G + 0.5
    half = t ** (0.5 * (z + 0.5))
    return math.sqrt(2.0 * math.pi) * half * half * math.exp(-t) * _lanczos_series(z)


# ---------------------------------------------------------------------------
# exp_p
# ---------------------------------------------------------------------------

_SERIES_REL_TOL = 1e-16
#: Above this argument ``exp_p`` is evaluated in log space.
LOG_SPACE_THRESHOLD = 700.0


def exp_p(p: float, t):
    """``sum_{j>=0} t**(p-1+j) / Gamma(p+j)`` for ``t >= 0``.

    Accepts scalars or arrays.  Terms are generated by the recursion
    ``term_{j+1} = term_j * t / (p + j)`` from one Lanczos value ``Gamma(p)``;
    summation stops once every entry has passed ``j > t`` and its next term is
    below ``1e-16`` of the running sum.
    """
    if not p > 1:
        raise ParameterError(f"exp_p requires p > 1, got {p}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
        raise ParameterError("exp_p requires t >= 0")
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    out = np.zeros_like(t_arr)
    pos = (t_arr > 0) & (t_arr <= LOG_SPACE_THRESHOLD)
    if np.any(pos):
        out[pos] = _exp_p_positive(p, t_arr[pos])
    big = t_arr > LOG_SPACE_THRESHOLD
    if np.any(big):
        with np.errstate(over="ignore"):
            out[big] = np.exp(log_exp_p(p, t_arr[big]))
    return float(out[0]) if scalar else out


def _exp_p_positive(p: float, t: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        term = np.exp((p - 1.0) * np.log(t) - log_gamma(p))
    total = term.copy()
    j = 0
    active = np.ones(t.shape, dtype=bool)
    while np.any(active):
        term = np.where(active, term * t / (p + j), term)
        total = np.where(active, total + term, total)
        j += 1
        done = (j > t) & (term < _SERIES_REL_TOL * total)
        active &= ~done
        if j > 100000:
            break
    return total


def log_exp_p(p: float, t):
    """Natural log of ``exp_p(p, t)``, safe for large ``t``.

    For ``t`` above the log-space threshold the identity
    ``exp_p(t) = e**t * P(p-1, t)`` (regularized lower incomplete Gamma) is
    used; the complementary tail is below double precision there, so the
    result is ``t + log1p(-tail)`` with the tail estimated from its leading
    asymptotic term.
    """
    if not p > 1:
        raise ParameterError(f"exp_p requires p > 1, got {p}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    scalar = np.ndim(t) == 0
    out = np.full(t_arr.shape, -np.inf)
    small = (t_arr > 0) & (t_arr <= LOG_SPACE_THRESHOLD)
    large = t_arr > LOG_SPACE_THRESHOLD
    if np.any(small):
        out[small] = np.log(_exp_p_positive(p, t_arr[small]))
    if np.any(large):
        tl = t_arr[large]
        a = p - 1.0
        log_tail = (a - 1.0) * np.log(tl) - tl - log_gamma(a)
        out[large] = tl + np.log1p(-np.exp(log_tail))
    return float(out[0]) if scalar else out


def exp_p_integer_reference(p: int, t):
    """``e**t - sum_{j<=p-2} t**j / j!`` (the integer-``p`` closed form)."""
    t = np.asarray(t, dtype=float)
    acc = np.exp(t)
    for j in range(int(p) - 1):
        acc = acc - t**j / math.factorial(j)
    return acc


# ---------------------------------------------------------------------------
# sharp constants
# ---------------------------------------------------------------------------


def _gamma_ratio_argument(params: SpaceParams) -> float:
    """``x = (gamma - 1) / (theta + 2 - gamma)``."""
    return (params.gamma - 1.0) / params.gap


def _check_beta_hypotheses(params: SpaceParams) -> None:
    if params.eta <= -1:
        raise HypothesisViolation(f"eta must exceed -1, got {params.eta}")
    if params.k >= 2:
        params.check_operator_hypotheses()


def beta_0k(params: SpaceParams) -> float:
    """The critical exponent coefficient of the exact-growth inequality."""
    _check_beta_hypotheses(params)
    k, p, eta = params.k, params.p, params.eta
    conj = p / (p - 1.0)
    if k == 1:
        return eta + 1.0
    if k == 2:
        return (eta + 1.0) * (params.gamma - 1.0) ** conj
    x = _gamma_ratio_argument(params)
    gap = params.gap
    if k % 2 == 0:
        lead = log_gamma(k / 2.0)
        shift = (k - 2) / 2.0
    else:
        lead = log_gamma((k + 1) / 2.0)
        shift = (k - 3) / 2.0
    log_bracket = (
        math.log(params.gamma - 1.0)
        + (k - 2) * math.log(gap)
        + lead
        + log_gamma(x)
        - log_gamma(x - shift)
    )
    return (eta + 1.0) * math.exp(conj * log_bracket)


def beta_0k_even_branch(params: SpaceParams) -> float:
    """The even-``k`` Gamma-ratio expression evaluated without shortcuts."""
    _check_beta_hypotheses(params)
    k, p = params.k, params.p
    x = _gamma_ratio_argument(params)
    bracket = (
        (params.gamma - 1.0)
        * params.gap ** (k - 2)
        * gamma_fn(k / 2.0)
        * gamma_fn(x)
        / gamma_fn(x - (k - 2) / 2.0)
    )
    return (params.eta + 1.0) * bracket ** (p / (p - 1.0))


def product_constants(params: SpaceParams, j: int) -> list[float]:
    """``C_i = 1 / (i g [gamma - 1 - i g])`` for ``i = 1..j-1`` with ``g = theta+2-gamma``."""
    gap = params.gap
    return [1.0 / (i * gap * (params.gamma - 1.0 - i * gap)) for i in range(1, j)]


def verify_beta_identities(params: SpaceParams) -> tuple[float, float]:
    """Both sides of the product/Gamma identity behind the sharp constant.

    Even ``k = 2j``: the Gamma-ratio form of the constant versus
    ``beta_{0,2} * prod C_i**(-p/(p-1))``.  Odd ``k = 2j+1``: the odd Gamma
    bracket divided by ``gamma - 1`` versus ``j (theta+2-gamma) prod C_i**-1``.
    ``k = 1`` has no product and returns ``(eta + 1, eta + 1)``.
    """
    _check_beta_hypotheses(params)
    k, p = params.k, params.p
    conj = p / (p - 1.0)
    if k == 1:
        return params.eta + 1.0, params.eta + 1.0
    j = k // 2
    inv_prod = 1.0
    for c in product_constants(params, j):
        inv_prod /= c
    x = _gamma_ratio_argument(params)
    gap = params.gap
    if k % 2 == 0:
        lhs = beta_0k_even_branch(params)
        beta2 = (params.eta + 1.0) * (params.gamma - 1.0) ** conj
        rhs = beta2 * inv_prod**conj
    else:
        lhs = (
            gap ** (k - 2)
            * gamma_fn((k + 1) / 2.0)
            * gamma_fn(x)
            / gamma_fn(x - (k - 3) / 2.0)
        )
        rhs = j * gap * inv_prod
    return lhs, rhs


# ---------------------------------------------------------------------------
# concentration coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientTable:
    """Coefficients ``c[i][m]`` (``1 <= i <= 2m``) of the expansion of
    ``L^m psi`` in the derivatives of the concentration profile.

    Stored as a dense array ``c[i, m]`` with zero padding outside
    ``1 <= i <= 2m``.
    """

    theta: float
    gamma: float
    max_m: int
    c: np.ndarray

    def __getitem__(self, key: tuple[int, int]) -> float:
        i, m = key
        if not (1 <= m <= self.max_m and 1 <= i <= 2 * m):
            raise IndexError(f"coefficient ({i}, {m}) outside the table")
        return float(self.c[i, m])

    def column(self, m: int) -> np.ndarray:
        """``[c[1][m], ..., c[2m][m]]``."""
        return self.c[1 : 2 * m + 1, m].copy()


def coefficient_table(theta: float, gamma: float, max_m: int) -> CoefficientTable:
    """Fill the table with the five-line recursion in ``m``."""
    if int(max_m) != max_m or max_m < 1:
        raise ParameterError(f"max_m must be a positive integer, got {max_m}")
    max_m = int(max_m)
    d = gamma - 2.0 - theta
    c = np.zeros((2 * max_m + 2, max_m + 1))
    c[1, 1] = gamma - 1.0
    c[2, 1] = -1.0
    for m in range(1, max_m):
        scale = -m * d * (gamma - 1.0 + m * d)
        shift = gamma - 1.0 + 2.0 * m * d
        c[1, m + 1] = scale * c[1, m]
        c[2, m + 1] = scale * c[2, m] + shift * c[1, m]
        for i in range(3, 2 * m + 1):
            c[i, m + 1] = scale * c[i, m] + shift * c[i - 1, m] - c[i - 2, m]
        c[2 * m + 1, m + 1] = shift * c[2 * m, m] - c[2 * m - 1, m]
        c[2 * m + 2, m + 1] = -c[2 * m, m]
    c.flags.writeable = False
    return CoefficientTable(float(theta), float(gamma), max_m, c)


def c1m_closed(theta: float, gamma: float, m: int) -> float:
    """Gamma-ratio closed form of the leading coefficient ``c[1][m]``."""
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m}")
    gap = theta + 2.0 - gamma
    if gap == 0.0:
        raise ParameterError("closed form undefined when theta + 2 == gamma")
    if m == 1:
        return gamma - 1.0
    x = (gamma - 1.0) / gap
    low = x - m + 1.0
    if not (x > 0 and low > 0):
        raise ParameterError(
            f"Gamma arguments x={x} and x-m+1={low} must be positive"
        )
    return (
        (gamma - 1.0)
        * gap ** (2 * m - 2)
        * gamma_fn(m)
        * math.exp(log_gamma(x) - log_gamma(low))
    )


# ---------------------------------------------------------------------------
# Hardy-type constants and the epsilon inequality
# ---------------------------------------------------------------------------


def hardy_constant_first_order(alpha: float, p: float) -> float:
    """Constant ``p / (alpha - p + 1)`` in
    ``||u||_{L^p_{alpha-p}} <= C ||u'||_{L^p_alpha}``."""
    if not p > 1:
        raise ParameterError(f"p must exceed 1, got {p}")
    denom = alpha - p + 1.0
    if not denom > 0:
        raise HypothesisViolation(f"requires alpha - p + 1 > 0, got {denom}")
    return p / denom


def hardy_constant_second_order(gamma: float, alpha: float, p: float) -> float:
    """Constant ``p**2 / ((alpha+1)(p(gamma-1) - alpha - 1))`` in
    ``||u||_{L^p_alpha} <= C ||L u||_{L^p_{p(theta+2-gamma)+alpha}}``."""
    if not p > 1:
        raise ParameterError(f"p must exceed 1, got {p}")
    if not gamma > 1:
        raise HypothesisViolation(f"requires gamma > 1, got {gamma}")
    if not alpha > -1:
        raise HypothesisViolation(f"requires alpha > -1, got {alpha}")
    upper = p * (gamma - 1.0) - alpha - 1.0
    if not upper > 0:
        raise HypothesisViolation(
            f"requires alpha + 1 < p(gamma - 1), got alpha={alpha}, p(gamma-1)={p * (gamma - 1)}"
        )
    return p * p / ((alpha + 1.0) * upper)


def hardy_chain_constants(
    gamma: float, theta: float, alpha: float, p: float, j: int
) -> list[float]:
    """Per-step constants of the iterated second-order Hardy bound
    ``||L u||_{L^p_alpha} <= prod(C_i) ||L^j u||_{L^p_{alpha+(j-1)(theta+2-gamma)p}}``.

    Step ``i`` is the second-order constant at weight
    ``alpha + (i-1)(theta+2-gamma)p``.
    """
    if int(j) != j or j < 2:
        raise ParameterError(f"j must be an integer >= 2, got {j}")
    gap = theta + 2.0 - gamma
    return [
        hardy_constant_second_order(gamma, alpha + (i - 1) * gap * p, p)
        for i in range(1, int(j))
    ]


def c_epsilon(epsilon: float, p: float) -> float:
    """``(1 - (1+eps)**(1-p))**(1/(1-p))``, the additive constant in
    ``(1+x)**(p/(p-1)) <= (1+eps) x**(p/(p-1)) + C_eps``."""
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if not p > 1:
        raise ParameterError(f"p must exceed 1, got {p}")
    inner = -math.expm1((1.0 - p) * math.log1p(epsilon))
    return inner ** (1.0 / (1.0 - p))
