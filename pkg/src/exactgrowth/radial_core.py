"""Geometric radial grids, power-law weighted measures and radial functions.

Every other module consumes the objects defined here.  A grid is uniform in
``log r`` and integrals against ``r**alpha dr`` use a per-cell rule that is
exact for integrands whose non-weight factor is linear in ``r``.  The segment
``(0, r_min]`` below the first node is handled by freezing the integrand at
``r_min`` and multiplying by the exact measure of that segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from exactgrowth.errors import (
    DerivativeOrderError,
    DivergentMeasureError,
    HypothesisViolation,
    ParameterError,
    SupportError,
)

ArrayFn = Callable[[np.ndarray], np.ndarray]

#: Default ratio between the first node and the truncation radius.
DEFAULT_HEAD_RATIO = 1e-8
#: Default number of cells in a grid.
DEFAULT_CELLS = 4096


# ---------------------------------------------------------------------------
# power integrals
# ---------------------------------------------------------------------------


def power_integral(a, b, s):
    """Return the integral of ``r**s`` over ``[a, b]`` for ``0 < a <= b``.

    Vectorised over ``a`` and ``b``.  Written with ``expm1`` so that thin cells
    keep full relative precision.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    log_ratio = np.log(b / a)
    e = s + 1.0
    if e == 0.0:
        return log_ratio
    return a**e * np.expm1(e * log_ratio) / e


def measure_from_origin(r, exponent: float):
    """Exact measure ``r**(e+1)/(e+1)`` of ``(0, r)`` under ``r**e dr``."""
    if exponent <= -1.0:
        raise DivergentMeasureError(
            f"measure exponent {exponent} <= -1 diverges at the origin"
        )
    e = exponent + 1.0
    return np.asarray(r, dtype=float) ** e / e


def linear_cell_weights(a, b, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``(w_left, w_right)`` with
    ``int_a^b f(r) r**alpha dr = w_left f(a) + w_right f(b)``
    for every ``f`` that is linear on ``[a, b]``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m0 = power_integral(a, b, alpha)
    m1 = power_integral(a, b, alpha + 1.0)
    width = b - a
    with np.errstate(invalid="ignore", divide="ignore"):
        left = np.where(width > 0, (b * m0 - m1) / width, 0.0)
        right = np.where(width > 0, (m1 - a * m0) / width, 0.0)
    return left, right


# ---------------------------------------------------------------------------
# grids and measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Geometric node set ``r_min = r_0 < r_1 < ... < r_n = r_max``."""

    r_min: float
    r_max: float
    n_cells: int
    nodes: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def log_step(self) -> float:
        """Spacing of the nodes in ``log r``."""
        return math.log(self.r_max / self.r_min) / self.n_cells

    @property
    def ratio(self) -> float:
        return math.exp(self.log_step)

    @property
    def log_nodes(self) -> np.ndarray:
        key = ("log_nodes",)
        if key not in self._cache:
            self._cache[key] = np.log(self.nodes)
        return self._cache[key]

    def cell_weights(self, alpha: float) -> tuple[np.ndarray, np.ndarray]:
        """Cached per-cell linear weights for the weight ``r**alpha``."""
        key = ("cell", float(alpha))
        if key not in self._cache:
            left, right = linear_cell_weights(self.nodes[:-1], self.nodes[1:], alpha)
            left.flags.writeable = False
            right.flags.writeable = False
            self._cache[key] = (left, right)
        return self._cache[key]

    def head_measure(self, alpha: float) -> float:
        """Exact measure of ``(0, r_min)`` under ``r**alpha dr``."""
        return float(measure_from_origin(self.r_min, alpha))

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.n_cells == other.n_cells
            and self.r_min == other.r_min
            and self.r_max == other.r_max
        )


def make_geometric_grid(r_min: float, r_max: float, n_cells: int) -> RadialGrid:
    """Build a grid whose consecutive nodes have a constant ratio."""
    if not (np.isfinite(r_min) and np.isfinite(r_max)):
        raise ParameterError("grid bounds must be finite")
    if r_min <= 0 or r_max <= 0:
        raise ParameterError(f"grid bounds must be positive, got ({r_min}, {r_max})")
    if r_min >= r_max:
        raise ParameterError(f"r_min={r_min} must be below r_max={r_max}")
    if int(n_cells) != n_cells or n_cells < 2:
        raise ParameterError(f"n_cells must be an integer >= 2, got {n_cells}")
    n_cells = int(n_cells)
    step = math.log(r_max / r_min) / n_cells
    nodes = r_min * np.exp(step * np.arange(n_cells + 1))
    nodes[0] = r_min
    nodes[-1] = r_max
    nodes.flags.writeable = False
    return RadialGrid(float(r_min), float(r_max), n_cells, nodes)


def default_grid(radius: float, n_cells: int = DEFAULT_CELLS) -> RadialGrid:
    """Standard grid on ``(0, radius]`` with ``r_min = 1e-8 * radius``."""
    return make_geometric_grid(DEFAULT_HEAD_RATIO * radius, radius, n_cells)


@dataclass(frozen=True)
class WeightedMeasure:
    """The measure ``r**exponent dr`` on ``(0, infinity)``."""

    exponent: float

    def __post_init__(self):
        if not math.isfinite(self.exponent):
            raise ParameterError("measure exponent must be finite")

    def of_interval(self, lo: float, hi: float) -> float:
        """Exact measure of ``(lo, hi)``."""
        if hi <= lo:
            return 0.0
        if lo <= 0.0:
            return float(measure_from_origin(hi, self.exponent))
        return float(power_integral(lo, hi, self.exponent))

    def radius_of_measure(self, mass: float) -> float:
        """Radius ``rho`` with ``measure(0, rho) = mass``."""
        e = self.exponent + 1.0
        if e <= 0:
            raise DivergentMeasureError("measure of (0, r) is infinite")
        return (e * mass) ** (1.0 / e)


# ---------------------------------------------------------------------------
# log-coordinate finite differences
# ---------------------------------------------------------------------------


def fd_weights(offsets: Sequence[float], order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0.

    ``offsets`` are node positions in units of the grid step (Fornberg's
    recursion).
    """
    z = np.asarray(offsets, dtype=float)
    n = z.size
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, z[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, z[i]
        for j in range(i):
            c3 = z[i] - z[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _stencil_sizes(order: int) -> tuple[int, int]:
    """Half-width of the central stencil and width of the one-sided ones.

    Both give fourth-order accuracy for the requested derivative order.
    """
    half = (order + 3) // 2
    return half, max(2 * half + 1, order + 4)


def log_difference(f: np.ndarray, h: float, order: int) -> np.ndarray:
    """Fourth-order ``order``-th derivative on a uniform grid of spacing ``h``.

    Central stencils in the interior, one-sided stencils of the same order at
    the nodes near either end.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    half, width = _stencil_sizes(order)
    if n < width:
        raise DerivativeOrderError(
            f"derivative of order {order} needs at least {width} samples, got {n}"
        )
    scale = h ** (-order)
    out = np.empty(n)
    # the weights sum to zero, so differences against the stencil's own node
    # give the same derivative while constants cancel exactly
    central = fd_weights(np.arange(-half, half + 1), order)
    centre = f[half : n - half]
    acc = np.zeros(n - 2 * half)
    for j, w in enumerate(central):
        if j != half:
            acc += w * (f[j : n - 2 * half + j] - centre)
    out[half : n - half] = acc * scale
    for i in range(half):
        w = fd_weights(np.arange(width) - i, order)
        out[i] = np.dot(w, f[:width] - f[i]) * scale
        tail = f[n - width :] - f[n - 1 - i]
        out[n - 1 - i] = np.dot(w[::-1], tail) * ((-1) ** order) * scale
    return out


def log_difference_at_end(f: np.ndarray, h: float, order: int, accuracy: int = 8) -> float:
    """``order``-th derivative at the last node from a one-sided stencil of
    the given accuracy order (used for boundary conditions)."""
    f = np.asarray(f, dtype=float)
    width = order + accuracy
    if f.size < width:
        raise DerivativeOrderError(
            f"boundary derivative of order {order} needs {width} samples, got {f.size}"
        )
    w = fd_weights(np.arange(-(width - 1), 1), order)
    return float(np.dot(w, f[-width:] - f[-1]) * h ** (-order))


def log_derivatives(f: np.ndarray, h: float, order: int) -> list[np.ndarray]:
    """Return ``[f, D f, D^2 f, ..., D^order f]`` where ``D = d/d(log r)``.

    Each order uses its own fourth-order stencil rather than repeated passes,
    so boundary errors are not amplified by composition.
    """
    out = [np.asarray(f, dtype=float)]
    for j in range(1, order + 1):
        out.append(log_difference(out[0], h, j))
    return out


def _stirling_first(n: int) -> list[list[int]]:
    """Signed Stirling numbers of the first kind ``s(j, i)`` for ``j <= n``."""
    s = [[0] * (n + 1) for _ in range(n + 1)]
    s[0][0] = 1
    for j in range(1, n + 1):
        for i in range(1, j + 1):
            s[j][i] = s[j - 1][i - 1] - (j - 1) * s[j - 1][i]
    return s


def radial_derivatives_from_log(
    log_derivs: Sequence[np.ndarray], r: np.ndarray, order: int
) -> np.ndarray:
    """Convert log-coordinate derivatives into the ``order``-th ``r``-derivative.

    Uses ``d^j/dr^j g(log r) = r**-j * sum_i s(j, i) g^(i)(log r)``.
    """
    if order == 0:
        return np.asarray(log_derivs[0])
    s = _stirling_first(order)
    acc = np.zeros_like(np.asarray(log_derivs[0], dtype=float))
    for i in range(1, order + 1):
        acc = acc + s[order][i] * log_derivs[i]
    return acc * r ** (-float(order))


# ---------------------------------------------------------------------------
# radial functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """A radial function backed either by grid samples or by closed forms.

    Sampled backing: ``samples`` at ``grid.nodes``.  Values between nodes are
    linear interpolants, values below ``r_min`` equal the first sample and
    values beyond ``support_radius`` are zero.

    A sampled function may also carry ``power_terms``, pairs ``(c, e)`` for
    an exact part ``sum c * r**e``.  Its ``samples`` are still full values,
    while finite differences act only on ``residual = samples - sum c r**e``
    and the power terms are differentiated exactly.  Keeping the leading
    behaviour at the origin analytic stops rounding noise from being
    amplified by high-order differences where ``r`` is tiny.

    Closed-form backing: ``value_fn`` plus ``derivative_fns[j-1]`` for the
    ``j``-th derivative, all vectorised over numpy arrays.  A quadrature grid
    is still attached so that integrals need no extra arguments.
    """

    grid: RadialGrid
    support_radius: float
    samples: np.ndarray | None = None
    value_fn: ArrayFn | None = None
    derivative_fns: tuple[ArrayFn, ...] = ()
    power_terms: tuple[tuple[float, float], ...] = ()
    residual: np.ndarray | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- construction ---------------------------------------------------------

    @classmethod
    def sampled(
        cls,
        grid: RadialGrid,
        samples,
        support_radius: float | None = None,
    ) -> "RadialFunction":
        arr = np.array(samples, dtype=float)
        if arr.shape != (grid.n_nodes,):
            raise ParameterError(
                f"expected {grid.n_nodes} samples, got shape {arr.shape}"
            )
        radius = grid.r_max if support_radius is None else float(support_radius)
        _check_support(radius)
        arr.flags.writeable = False
        return cls(grid=grid, support_radius=radius, samples=arr)

    @classmethod
    def with_power_terms(
        cls,
        grid: RadialGrid,
        residual,
        terms: Sequence[tuple[float, float]],
        support_radius: float | None = None,
    ) -> "RadialFunction":
        """Sampled function ``residual + sum c r**e`` with exact power terms."""
        res = np.array(residual, dtype=float)
        if res.shape != (grid.n_nodes,):
            raise ParameterError(
                f"expected {grid.n_nodes} samples, got shape {res.shape}"
            )
        radius = grid.r_max if support_radius is None else float(support_radius)
        _check_support(radius)
        terms = merge_power_terms(terms)
        full = res + power_terms_derivative(terms, grid.nodes, 0)
        res.flags.writeable = False
        full.flags.writeable = False
        return cls(
            grid=grid,
            support_radius=radius,
            samples=full,
            power_terms=terms,
            residual=res,
        )

    @classmethod
    def closed_form(
        cls,
        value: ArrayFn,
        derivatives: Sequence[ArrayFn] = (),
        support_radius: float = 1.0,
        grid: RadialGrid | None = None,
    ) -> "RadialFunction":
        radius = float(support_radius) if support_radius is not None else None
        _check_support(radius)
        if grid is None:
            grid = default_grid(radius)
        return cls(
            grid=grid,
            support_radius=radius,
            value_fn=value,
            derivative_fns=tuple(derivatives),
        )

    @classmethod
    def from_callable(
        cls, fn: ArrayFn, grid: RadialGrid, support_radius: float | None = None
    ) -> "RadialFunction":
        """Sample ``fn`` at the grid nodes."""
        return cls.sampled(grid, fn(grid.nodes), support_radius)

    # -- inspection -------------------------------------------------------------

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    @property
    def k_max(self) -> int:
        """Highest derivative order available."""
        if self.is_sampled:
            return 10**6 if self.grid.n_nodes >= 6 else 0  # limited by stencil width
        return len(self.derivative_fns)

    @property
    def values(self) -> np.ndarray:
        """Samples at the grid nodes."""
        if self.samples is not None:
            return self.samples
        key = ("values",)
        if key not in self._cache:
            v = np.asarray(self.value_fn(self.grid.nodes), dtype=float)
            v = np.where(self.grid.nodes <= self.support_radius, v, 0.0)
            v.flags.writeable = False
            self._cache[key] = v
        return self._cache[key]

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.samples is not None:
            out = np.interp(r, self.grid.nodes, self.samples)
        else:
            out = np.asarray(self.value_fn(r), dtype=float)
        return np.where(r <= self.support_radius, out, 0.0)

    def derivative(self, order: int) -> np.ndarray:
        """The ``order``-th ``r``-derivative at the grid nodes."""
        if order == 0:
            return self.values
        if order > self.k_max:
            raise DerivativeOrderError(
                f"derivative of order {order} requested, only {self.k_max} available"
            )
        key = ("d", order)
        if key in self._cache:
            return self._cache[key]
        if self.samples is not None:
            logs = self.log_derivatives(order)
            d = radial_derivatives_from_log(logs, self.grid.nodes, order)
            if self.power_terms:
                d = d + power_terms_derivative(self.power_terms, self.grid.nodes, order)
        else:
            d = np.asarray(self.derivative_fns[order - 1](self.grid.nodes), dtype=float)
            d = np.where(self.grid.nodes <= self.support_radius, d, 0.0)
        d.flags.writeable = False
        self._cache[key] = d
        return d

    def log_derivatives(self, order: int) -> list[np.ndarray]:
        """Finite-difference derivatives in ``log r`` of the node samples.

        For a function with power terms these are derivatives of the residual.
        """
        key = ("logd", order)
        if key not in self._cache:
            base = self.values if self.residual is None else self.residual
            self._cache[key] = log_derivatives(base, self.grid.log_step, order)
        return self._cache[key]

    # -- conversions and arithmetic ------------------------------------------

    def to_sampled(self, grid: RadialGrid | None = None) -> "RadialFunction":
        grid = self.grid if grid is None else grid
        if self.samples is not None and grid.same_as(self.grid):
            return self
        return RadialFunction.sampled(grid, self(grid.nodes), min(self.support_radius, grid.r_max))

    def map_values(self, fn: Callable[[np.ndarray], np.ndarray]) -> "RadialFunction":
        """Sampled function ``fn(u)`` on the same grid."""
        return RadialFunction.sampled(self.grid, fn(self.values), self.support_radius)

    def scale(self, c: float) -> "RadialFunction":
        c = float(c)
        if self.residual is not None:
            return RadialFunction.with_power_terms(
                self.grid,
                c * self.residual,
                [(c * a, e) for a, e in self.power_terms],
                self.support_radius,
            )
        if self.samples is not None:
            return RadialFunction.sampled(self.grid, c * self.samples, self.support_radius)
        v, ds = self.value_fn, self.derivative_fns
        return RadialFunction.closed_form(
            lambda r: c * v(r),
            [(lambda r, d=d: c * d(r)) for d in ds],
            self.support_radius,
            self.grid,
        )

    def __mul__(self, c: float) -> "RadialFunction":
        return self.scale(c)

    __rmul__ = __mul__

    def __neg__(self) -> "RadialFunction":
        return self.scale(-1.0)

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        radius = max(self.support_radius, other.support_radius)
        if self.samples is None and other.samples is None:
            n = min(self.k_max, other.k_max)
            a, b = self, other
            return RadialFunction.closed_form(
                lambda r: a(r) + b(r),
                [
                    (lambda r, j=j: _cf_derivative(a, j, r) + _cf_derivative(b, j, r))
                    for j in range(1, n + 1)
                ],
                radius,
                self.grid,
            )
        radius = min(radius, self.grid.r_max)
        if (
            self.residual is not None or other.residual is not None
        ) and other.is_sampled and other.grid.same_as(self.grid):
            return RadialFunction.with_power_terms(
                self.grid,
                self._residual_values() + other._residual_values(),
                self.power_terms + other.power_terms,
                radius,
            )
        return RadialFunction.sampled(self.grid, self.values + other(self.grid.nodes), radius)

    def _residual_values(self) -> np.ndarray:
        return self.values if self.residual is None else self.residual

    def __sub__(self, other: "RadialFunction") -> "RadialFunction":
        return self + (-other)


def merge_power_terms(terms) -> tuple[tuple[float, float], ...]:
    """Combine power terms with equal exponents and drop zero coefficients."""
    acc: dict[float, float] = {}
    for c, e in terms:
        acc[float(e)] = acc.get(float(e), 0.0) + float(c)
    return tuple((c, e) for e, c in sorted(acc.items()) if c != 0.0)


def power_terms_derivative(terms, r, order: int) -> np.ndarray:
    """``order``-th derivative of ``sum c r**e`` at ``r``."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for c, e in terms:
        factor = 1.0
        for i in range(order):
            factor *= e - i
        if factor != 0.0:
            out = out + c * factor * r ** (e - order)
    return out


def _cf_derivative(f: RadialFunction, order: int, r):
    r = np.asarray(r, dtype=float)
    d = np.asarray(f.derivative_fns[order - 1](r), dtype=float)
    return np.where(r <= f.support_radius, d, 0.0)


def _check_support(radius) -> None:
    if radius is None or not np.isfinite(radius) or radius <= 0:
        raise SupportError(
            f"a finite positive support radius is required, got {radius!r}"
        )


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def integrate_samples(grid: RadialGrid, samples: np.ndarray, alpha: float) -> float:
    """``int_0^r_max f r**alpha dr`` for node samples ``f`` (head rule included)."""
    left, right = grid.cell_weights(alpha)
    total = float(np.dot(left, samples[:-1]) + np.dot(right, samples[1:]))
    if samples[0] != 0.0:
        total += samples[0] * grid.head_measure(alpha)
    return total


def cumulative_from_origin(grid: RadialGrid, samples: np.ndarray, alpha: float) -> np.ndarray:
    """Running integrals ``int_0^{r_i} f r**alpha dr`` at every node."""
    left, right = grid.cell_weights(alpha)
    head = samples[0] * grid.head_measure(alpha) if samples[0] != 0.0 else 0.0
    out = np.empty(grid.n_nodes)
    out[0] = head
    out[1:] = head + np.cumsum(left * samples[:-1] + right * samples[1:])
    return out


def cumulative_to_end(grid: RadialGrid, samples: np.ndarray, alpha: float) -> np.ndarray:
    """Running integrals ``int_{r_i}^{r_max} f r**alpha dr`` at every node."""
    left, right = grid.cell_weights(alpha)
    cells = left * samples[:-1] + right * samples[1:]
    out = np.zeros(grid.n_nodes)
    out[:-1] = np.cumsum(cells[::-1])[::-1]
    return out


def weighted_integral(
    f: RadialFunction,
    measure: WeightedMeasure,
    lo: float = 0.0,
    hi: float | None = None,
) -> float:
    """Approximate ``int_lo^hi f(r) r**exponent dr``.

    Cells are integrated exactly for the linear interpolant of ``f``; the head
    segment below ``r_min`` uses ``f(r_min)`` times the exact measure.
    """
    grid = f.grid
    alpha = measure.exponent
    if lo < 0:
        raise ParameterError(f"lower limit must be non-negative, got {lo}")
    if hi is None:
        hi = grid.r_max
    hi = min(float(hi), grid.r_max)
    if lo == 0.0 and alpha <= -1.0:
        raise DivergentMeasureError(
            f"measure exponent {alpha} <= -1 diverges on an interval touching 0"
        )
    if hi <= lo:
        return 0.0
    values = f.values
    if lo <= 0.0 and hi >= grid.r_max:
        return integrate_samples(grid, values, alpha)

    total = 0.0
    nodes = grid.nodes
    if lo < grid.r_min:
        top = min(hi, grid.r_min)
        total += float(values[0]) * WeightedMeasure(alpha).of_interval(lo, top)
        lo = grid.r_min
        if hi <= lo:
            return total
    inner = nodes[(nodes > lo) & (nodes < hi)]
    pts = np.concatenate(([lo], inner, [hi]))
    vals = np.interp(pts, nodes, values)
    left, right = linear_cell_weights(pts[:-1], pts[1:], alpha)
    total += float(np.dot(left, vals[:-1]) + np.dot(right, vals[1:]))
    return total


def weighted_lp_norm(f: RadialFunction, p: float, alpha: float) -> float:
    """``(int |f|^p r**alpha dr)^(1/p)`` over the whole grid."""
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    values = np.abs(f.values)
    if not np.any(values):
        return 0.0
    if alpha <= -1.0 and values[0] != 0.0:
        raise DivergentMeasureError(
            f"weight exponent {alpha} <= -1 with f(0) != 0 diverges"
        )
    grid = f.grid
    powered = values**p
    left, right = grid.cell_weights(alpha)
    total = float(np.dot(left, powered[:-1]) + np.dot(right, powered[1:]))
    if powered[0] != 0.0:
        total += powered[0] * grid.head_measure(alpha)
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# space parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceParams:
    """Parameters of the weighted space ``X^{k,p}`` and of the operator.

    ``alphas[i]`` is the weight exponent attached to the ``i``-th derivative;
    ``nu`` is the weight exponent carried by the ``k``-th generalized gradient.
    """

    k: int
    p: float
    alphas: tuple[float, ...]
    theta: float
    gamma: float
    eta: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"k must be a positive integer, got {self.k}")
        if not self.p > 1:
            raise ParameterError(f"p must exceed 1, got {self.p}")
        if len(self.alphas) != self.k + 1:
            raise ParameterError(
                f"alphas must have length k+1={self.k + 1}, got {len(self.alphas)}"
            )
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        for name in ("p", "theta", "gamma", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    @property
    def half_k(self) -> int:
        return self.k // 2

    @property
    def alpha_k(self) -> float:
        return self.alphas[-1]

    @property
    def nu(self) -> float:
        return self.alpha_k + self.half_k * (self.theta - self.gamma) * self.p

    @property
    def conjugate(self) -> float:
        """The exponent ``p/(p-1)``."""
        return self.p / (self.p - 1.0)

    @property
    def gap(self) -> float:
        """``theta + 2 - gamma``."""
        return self.theta + 2.0 - self.gamma

    @classmethod
    def critical(
        cls,
        k: int,
        p: float,
        eta: float,
        theta: float | None = None,
        gamma: float | None = None,
    ) -> "SpaceParams":
        """Exact-growth parameters: ``alpha_k = kp - 1`` with the minimal
        admissible lower weights ``alpha_i = alpha_k - (k - i) p``.

        ``gamma`` defaults to ``(2p - 1 + (p - 1) eta) / p`` and ``theta`` to
        ``gamma``.
        """
        if gamma is None:
            gamma = (2.0 * p - 1.0 + (p - 1.0) * eta) / p
        if theta is None:
            theta = gamma
        alpha_k = k * p - 1.0
        alphas = tuple(alpha_k - (k - i) * p for i in range(k + 1))
        return cls(int(k), float(p), alphas, float(theta), float(gamma), float(eta))

    # -- hypothesis checks -----------------------------------------------------

    def check_exact_growth(self, tol: float = 1e-12) -> None:
        """Hypotheses of the exact-growth inequality; raises on violation."""
        if self.eta <= -1:
            raise HypothesisViolation(f"eta must exceed -1, got {self.eta}")
        if abs(self.alpha_k - self.k * self.p + 1.0) > tol * max(1.0, abs(self.alpha_k)):
            raise HypothesisViolation(
                f"alpha_k must equal kp-1={self.k * self.p - 1}, got {self.alpha_k}"
            )
        for i, a in enumerate(self.alphas[1:], start=1):
            floor = self.alpha_k - (self.k - i) * self.p
            if a < floor - tol * max(1.0, abs(floor)):
                raise HypothesisViolation(
                    f"alphas[{i}]={a} is below alpha_k-(k-i)p={floor}"
                )
        if self.k >= 2:
            self.check_operator_hypotheses()

    def check_operator_hypotheses(self) -> None:
        """``theta + 2 > gamma`` and ``theta > floor(k/2)(theta+2-gamma) - 1``."""
        if not self.gap > 0:
            raise HypothesisViolation(
                f"theta+2 must exceed gamma (theta={self.theta}, gamma={self.gamma})"
            )
        bound = self.half_k * self.gap - 1.0
        if not self.theta > bound:
            raise HypothesisViolation(
                f"theta={self.theta} must exceed floor(k/2)(theta+2-gamma)-1={bound}"
            )

    def check_gamma_relation(self, tol: float = 1e-12) -> None:
        """``gamma = (2p - 1 + (p - 1) eta) / p``."""
        expected = (2.0 * self.p - 1.0 + (self.p - 1.0) * self.eta) / self.p
        if abs(self.gamma - expected) > tol * max(1.0, abs(expected)):
            raise HypothesisViolation(
                f"gamma must equal (2p-1+(p-1)eta)/p={expected}, got {self.gamma}"
            )

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "p": self.p,
            "alphas": list(self.alphas),
            "theta": self.theta,
            "gamma": self.gamma,
            "eta": self.eta,
            "nu": self.nu,
        }
