"""Half-weighted decreasing rearrangement of radial functions.

A function is read as the piecewise-linear interpolant of its node samples
(plus a constant head segment below ``r_min``), exactly as the quadrature in
:mod:`exactgrowth.radial_core` reads it.  The rearrangement ``u*`` of ``|u|``
moves the ``r**eta dr`` measure of every super-level set onto a ball of the
same ``r**nu dr`` measure.  It is computed exactly for the interpolant: the
distribution function is evaluated at every sample value by a sweep, and each
mass is inverted in closed form inside the single linear piece that covers
it, or by safeguarded Newton steps when several pieces overlap in value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from exactgrowth.errors import ParameterError, SupportError
from exactgrowth.radial_core import (
    RadialFunction,
    RadialGrid,
    cumulative_from_origin,
    make_geometric_grid,
    measure_from_origin,
    power_integral,
)
from exactgrowth.special_constants import exp_p

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(6)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


# ---------------------------------------------------------------------------
# registered integrands
# ---------------------------------------------------------------------------


def _psi_power(p: float = 2.0) -> Callable[[np.ndarray], np.ndarray]:
    if not p >= 1:
        raise ParameterError(f"power integrand needs p >= 1, got {p}")
    return lambda t: np.abs(t) ** p


def _psi_exact_growth(p: float = 2.0, beta: float = 1.0, q: float = 0.0):
    conj = p / (p - 1.0)
    return lambda t: exp_p(p, beta * np.abs(t) ** conj) / (1.0 + np.abs(t)) ** q


PSI_REGISTRY: dict[str, Callable[..., Callable[[np.ndarray], np.ndarray]]] = {
    "power": _psi_power,
    "exact_growth": _psi_exact_growth,
}


def registered_psi(psi_id: str, **params) -> Callable[[np.ndarray], np.ndarray]:
    """Look up an integrand ``Psi`` from the registered family."""
    try:
        factory = PSI_REGISTRY[psi_id]
    except KeyError:
        raise ParameterError(
            f"unregistered integrand {psi_id!r}; choose from {sorted(PSI_REGISTRY)}"
        ) from None
    return factory(**params)


# ---------------------------------------------------------------------------
# piecewise-linear profile of |u|
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Pieces:
    """Linear pieces of ``|u|``: value ``v_lo`` at ``r_lo`` to ``v_hi`` at ``r_hi``."""

    r_lo: np.ndarray
    r_hi: np.ndarray
    v_lo: np.ndarray
    v_hi: np.ndarray
    mass: np.ndarray
    eta: float

    @property
    def lo(self) -> np.ndarray:
        return np.minimum(self.v_lo, self.v_hi)

    @property
    def hi(self) -> np.ndarray:
        return np.maximum(self.v_lo, self.v_hi)

    def partial_mass(self, idx: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Measure of ``{|u| > t}`` inside pieces ``idx`` (``lo <= t <= hi``)."""
        return _PairView(self, idx).mass_above(t)

    def invert_single(self, idx: np.ndarray, mass: np.ndarray) -> np.ndarray:
        """Level ``t`` at which piece ``idx`` carries super-level mass ``mass``."""
        r_lo, r_hi = self.r_lo[idx], self.r_hi[idx]
        v_lo, v_hi = self.v_lo[idx], self.v_hi[idx]
        e = self.eta + 1.0
        down = v_lo > v_hi
        with np.errstate(invalid="ignore", divide="ignore"):
            grow = np.exp(np.log1p(e * mass / r_lo**e) / e) * r_lo
            shrink = np.exp(np.log1p(-np.minimum(e * mass / r_hi**e, 1.0)) / e) * r_hi
        r_c = np.where(down, grow, shrink)
        r_c = np.clip(r_c, r_lo, r_hi)
        return v_lo + (r_c - r_lo) / (r_hi - r_lo) * (v_hi - v_lo)


class _PairView:
    """Sloped pieces gathered once for repeated super-level evaluations."""

    def __init__(self, pieces: _Pieces, idx: np.ndarray):
        self.eta = pieces.eta
        self.r_lo = pieces.r_lo[idx]
        self.width = pieces.r_hi[idx] - self.r_lo
        self.v_lo = pieces.v_lo[idx]
        self.dv = pieces.v_hi[idx] - self.v_lo
        self.full = pieces.mass[idx]
        self.down = self.dv < 0

    def subset(self, keep: np.ndarray) -> "_PairView":
        view = object.__new__(_PairView)
        view.eta = self.eta
        for name in ("r_lo", "width", "v_lo", "dv", "full", "down"):
            setattr(view, name, getattr(self, name)[keep])
        return view

    def _crossing(self, t: np.ndarray) -> np.ndarray:
        frac = np.minimum(np.maximum((t - self.v_lo) / self.dv, 0.0), 1.0)
        return self.r_lo + frac * self.width

    def mass_above(self, t: np.ndarray) -> np.ndarray:
        inner = power_integral(self.r_lo, self._crossing(t), self.eta)
        return np.where(self.down, inner, self.full - inner)

    def slope(self, t: np.ndarray) -> np.ndarray:
        return -(self._crossing(t) ** self.eta) * self.width / np.abs(self.dv)


def _pieces_of(u: RadialFunction, eta: float) -> _Pieces:
    if eta <= -1:
        raise ParameterError(f"eta must exceed -1, got {eta}")
    if not np.isfinite(u.support_radius):
        raise SupportError("rearrangement requires a compactly supported function")
    grid = u.grid
    vals = np.asarray(u.values, dtype=float)
    r = grid.nodes
    a, b = vals[:-1], vals[1:]
    ra, rb = r[:-1], r[1:]
    sign_change = (a * b) < 0
    # split cells where u changes sign so that |u| is linear on every piece
    root = ra + a / (a - np.where(sign_change, b, a - 1.0)) * (rb - ra)
    r_lo = [ra[~sign_change], ra[sign_change], root[sign_change]]
    r_hi = [rb[~sign_change], root[sign_change], rb[sign_change]]
    v_lo = [np.abs(a[~sign_change]), np.abs(a[sign_change]), np.zeros(sign_change.sum())]
    v_hi = [np.abs(b[~sign_change]), np.zeros(sign_change.sum()), np.abs(b[sign_change])]
    head_v = abs(vals[0])
    r_lo = np.concatenate([[0.0], *r_lo])
    r_hi = np.concatenate([[grid.r_min], *r_hi])
    v_lo = np.concatenate([[head_v], *v_lo])
    v_hi = np.concatenate([[head_v], *v_hi])
    mass = np.empty_like(r_lo)
    mass[0] = float(measure_from_origin(grid.r_min, eta))
    mass[1:] = power_integral(r_lo[1:], r_hi[1:], eta)
    keep = (np.maximum(v_lo, v_hi) > 0) & (mass > 0)
    return _Pieces(r_lo[keep], r_hi[keep], v_lo[keep], v_hi[keep], mass[keep], float(eta))


def _mass_above(pieces: _Pieces, levels: np.ndarray, chunk: int = 256) -> np.ndarray:
    """``mu(t) = measure{|u| > t}`` for every level (direct evaluation)."""
    levels = np.asarray(levels, dtype=float)
    out = np.empty(levels.shape)
    lo, hi = pieces.lo, pieces.hi
    full_order = np.argsort(lo)
    lo_sorted = lo[full_order]
    tail = np.concatenate([np.cumsum(pieces.mass[full_order][::-1])[::-1], [0.0]])
    nonflat = np.nonzero(hi > lo)[0]
    for start in range(0, levels.size, chunk):
        t = levels[start : start + chunk]
        full = tail[np.searchsorted(lo_sorted, t, side="right")]
        t2 = t[:, None]
        lo_n, hi_n = lo[nonflat][None, :], hi[nonflat][None, :]
        inside = (lo_n <= t2) & (t2 < hi_n)
        part = np.zeros(t.size)
        if inside.any():
            rows, cols = np.nonzero(inside)
            vals = pieces.partial_mass(nonflat[cols], t[rows])
            part = np.bincount(rows, weights=vals, minlength=t.size)
        out[start : start + chunk] = full + part
    return out


@dataclass(frozen=True, eq=False)
class _InverseDistribution:
    """Nonincreasing map ``mass -> level``, the rearrangement in mass units."""

    pieces: _Pieces
    levels: np.ndarray  # breakpoint values, descending
    above: np.ndarray  # mu(T_k)
    below: np.ndarray  # mu(T_k-) = mu(T_k) + flat mass at exactly T_k
    interval_start: np.ndarray  # CSR offsets into interval_pieces
    interval_pieces: np.ndarray
    total_mass: float

    @classmethod
    def build(cls, pieces: _Pieces) -> "_InverseDistribution":
        lo, hi, mass = pieces.lo, pieces.hi, pieces.mass
        asc = np.unique(np.concatenate([lo, hi, [0.0]]))
        n_lv = asc.size
        # full contribution: flat pieces strictly above a level, sloped pieces
        # whose lower end is at or above it
        above_asc = np.zeros(n_lv)
        for sel, side in ((hi == lo, "right"), (hi > lo, "left")):
            order = np.argsort(lo[sel])
            lo_sorted = lo[sel][order]
            tail = np.concatenate([np.cumsum(mass[sel][order][::-1])[::-1], [0.0]])
            above_asc += tail[np.searchsorted(lo_sorted, asc, side=side)]
        # partial contribution: breakpoints strictly inside each sloped piece
        sloped = np.nonzero(hi > lo)[0]
        i_lo = np.searchsorted(asc, lo[sloped], side="left")
        i_hi = np.searchsorted(asc, hi[sloped], side="left")
        inner_counts = np.maximum(i_hi - i_lo - 1, 0)
        if inner_counts.sum():
            owner = np.repeat(sloped, inner_counts)
            first = np.repeat(i_lo + 1, inner_counts)
            offs = np.arange(owner.size) - np.repeat(
                np.cumsum(inner_counts) - inner_counts, inner_counts
            )
            lv_idx = first + offs
            vals = pieces.partial_mass(owner, asc[lv_idx])
            above_asc = above_asc + np.bincount(lv_idx, weights=vals, minlength=n_lv)
        flat = hi == lo
        flat_idx = np.searchsorted(asc, lo[flat])
        jump = np.bincount(flat_idx, weights=mass[flat], minlength=n_lv)
        below_asc = above_asc + jump
        # sloped pieces covering each open interval (asc[i], asc[i+1])
        span = i_hi - i_lo
        owner = np.repeat(sloped, span)
        offs = np.arange(owner.size) - np.repeat(np.cumsum(span) - span, span)
        interval = np.repeat(i_lo, span) + offs
        order = np.argsort(interval, kind="stable")
        interval_pieces = owner[order]
        counts = np.bincount(interval, minlength=n_lv)
        start = np.concatenate([[0], np.cumsum(counts)])
        total = float(mass.sum())
        return cls(pieces, asc, above_asc, below_asc, start, interval_pieces, total)

    # In ascending order, level asc[i] has mu = above[i]; the open interval
    # (asc[i], asc[i+1]) carries masses between above[i+1] and below[i].

    def __call__(self, m) -> np.ndarray:
        m = np.atleast_1d(np.asarray(m, dtype=float))
        out = np.zeros(m.shape)
        asc, above, below = self.levels, self.above, self.below
        # above/below are nonincreasing along ascending levels; flip to search
        below_desc = below[::-1]
        above_desc = above[::-1]
        inside = (m > 0) & (m < self.total_mass)
        if self.total_mass > 0:
            out[m <= 0] = asc[-1]
        # the total mass and the accumulated breakpoint masses may differ by
        # rounding; the endpoint takes the left limit of the inverse
        at_end = (m >= self.total_mass) & (m <= self.total_mass * (1 + 1e-12))
        probe = np.where(at_end, np.minimum(m, below_desc[-1]), m)
        k_desc = np.searchsorted(below_desc, probe, side="left")  # first with below >= m
        k_desc = np.clip(k_desc, 0, asc.size - 1)
        on_plateau = above_desc[k_desc] <= m
        i_asc = asc.size - 1 - k_desc
        out = np.where(on_plateau, asc[i_asc], out)
        solve = inside & ~on_plateau
        if np.any(solve):
            idx = np.nonzero(solve)[0]
            interval = i_asc[idx]  # open interval (asc[i], asc[i+1])
            upper = interval + 1
            out[idx] = self._solve_interval(interval, m[idx], below[upper], asc[upper])
        out[m > self.total_mass] = 0.0
        return out

    def _solve_interval(self, interval, m, mu_top, level_top):
        start = self.interval_start[interval]
        count = self.interval_start[interval + 1] - start
        pieces = self.pieces
        out = np.empty(m.shape)
        single = count == 1
        if np.any(single):
            pidx = self.interval_pieces[start[single]]
            base = pieces.partial_mass(pidx, level_top[single])
            out[single] = pieces.invert_single(pidx, base + (m[single] - mu_top[single]))
        multi = ~single & (count > 0)
        if np.any(multi):
            out[multi] = self._newton(
                interval[multi], start[multi], count[multi], m[multi], mu_top[multi]
            )
        none = count == 0
        out[none] = self.levels[interval[none] + 1]
        return out

    def _newton(self, interval, start, count, m, mu_top):
        owner = np.repeat(np.arange(m.size), count)
        offs = np.arange(owner.size) - np.repeat(np.cumsum(count) - count, count)
        view = _PairView(self.pieces, self.interval_pieces[np.repeat(start, count) + offs])
        t_lo = self.levels[interval].copy()
        t_hi = self.levels[interval + 1].copy()
        base = np.bincount(owner, view.mass_above(t_hi[owner]), minlength=m.size)
        target = m - mu_top + base
        span = np.bincount(owner, view.mass_above(t_lo[owner]), minlength=m.size) - base
        frac = np.clip((target - base) / np.maximum(span, 1e-300), 0.0, 1.0)
        t = t_hi - frac * (t_hi - t_lo)
        active = np.arange(m.size)
        for _ in range(100):
            n = active.size
            g = np.bincount(owner, view.mass_above(t[active][owner]), minlength=n)
            g -= target[active]
            dg = np.bincount(owner, view.slope(t[active][owner]), minlength=n)
            cur = t[active]
            # g is decreasing in t: g > 0 means the level is too low
            lo = np.where(g > 0, cur, t_lo[active])
            hi = np.where(g <= 0, cur, t_hi[active])
            t_lo[active], t_hi[active] = lo, hi
            with np.errstate(divide="ignore", invalid="ignore"):
                step = cur - g / dg
            bad = ~np.isfinite(step) | (step < lo) | (step > hi)
            new = np.where(bad, 0.5 * (lo + hi), step)
            t[active] = new
            moving = np.abs(new - cur) > 1e-14 * np.maximum(np.abs(cur), 1e-300)
            if not moving.any():
                break
            keep_pairs = moving[owner]
            owner = np.cumsum(moving)[owner[keep_pairs]] - 1
            view = view.subset(keep_pairs)
            active = active[moving]
        return t

    def smooth_intervals(self):
        """Mass intervals on which the inverse is smooth, with their constants.

        Returns ``(plateau_levels, plateau_masses, lo_mass, hi_mass)`` where the
        plateaus carry constant level and the open intervals carry smooth
        inverse values.
        """
        plateau = self.below - self.above
        ramps_lo = self.below[1:]
        ramps_hi = self.above[:-1]
        return self.levels, plateau, ramps_lo, ramps_hi


# ---------------------------------------------------------------------------
# public types and operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistributionFunction:
    """Super-level measures ``mu(t) = measure{|u| > t}`` at ascending levels."""

    levels: np.ndarray
    measures: np.ndarray


@dataclass(frozen=True, eq=False)
class SymmetrizedFunction:
    """Nonincreasing rearrangement sampled on a fresh geometric grid.

    ``value_at`` evaluates the exact rearrangement at arbitrary radii.
    """

    grid: RadialGrid
    samples: np.ndarray
    eta: float
    nu: float
    support_radius: float
    _inverse: _InverseDistribution = field(repr=False)

    def value_at(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        mass = np.where(r > 0, measure_from_origin(np.maximum(r, 0.0), self.nu), 0.0)
        out = self._inverse(mass)
        return np.where(r < self.support_radius, out, 0.0)

    def as_radial(self) -> RadialFunction:
        return RadialFunction.sampled(self.grid, self.samples, self.support_radius)

    @property
    def total_mass(self) -> float:
        return self._inverse.total_mass


def distribution(u, eta: float, levels=None) -> DistributionFunction:
    """Super-level measures of ``|u|`` under ``r**eta dr``.

    Inside each cell the crossing radius is found by inverting the linear
    interpolant.  ``levels`` defaults to 256 geometric levels between the
    smallest positive and the largest sample.  A :class:`SymmetrizedFunction`
    is measured through its exact profile under its own weight ``nu``; the
    ``eta`` argument must then equal ``nu``.
    """
    if isinstance(u, SymmetrizedFunction):
        if abs(eta - u.nu) > 0:
            raise ParameterError("a rearranged function is measured with its own nu")
        return _distribution_of_rearranged(u, levels)
    pieces = _pieces_of(u, eta)
    if levels is None:
        levels = default_levels(np.abs(u.values))
    levels = np.asarray(levels, dtype=float)
    if np.any(np.diff(levels) < 0):
        raise ParameterError("levels must be ascending")
    return DistributionFunction(levels, _mass_above(pieces, levels))


def default_levels(values: np.ndarray, count: int = 256) -> np.ndarray:
    pos = values[values > 0]
    if pos.size == 0:
        return np.array([1.0])
    lo, hi = pos.min(), pos.max()
    if lo == hi:
        return np.array([0.5 * lo])
    return np.geomspace(lo, hi, count)


def _distribution_of_rearranged(us: SymmetrizedFunction, levels) -> DistributionFunction:
    if levels is None:
        levels = default_levels(np.abs(us.samples))
    levels = np.asarray(levels, dtype=float)
    # u* is nonincreasing: bisect for the last radius where u* > t (log scale)
    lo = np.full(levels.shape, us.grid.r_min * 1e-12)
    hi = np.full(levels.shape, us.support_radius)
    above_top = us.value_at(hi * (1 - 1e-15)) > levels
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        gt = us.value_at(mid) > levels
        lo = np.where(gt, mid, lo)
        hi = np.where(gt, hi, mid)
        if np.all(hi / lo - 1.0 < 1e-15):
            break
    radius = np.where(above_top, us.support_radius, hi)
    below_all = us.value_at(np.array([us.grid.r_min * 1e-12]))[0] <= levels
    radius = np.where(below_all, 0.0, radius)
    return DistributionFunction(levels, measure_from_origin(radius, us.nu))


def symmetrize(u: RadialFunction, eta: float, nu: float) -> SymmetrizedFunction:
    """Rearrange ``|u|`` from ``r**eta dr`` to a nonincreasing function under
    ``r**nu dr`` with equal super-level measures.

    The output grid is geometric on ``(0, R*]`` with the input's cell count and
    head ratio, where ``R*`` has ``nu``-measure equal to the ``eta``-measure of
    the support of ``u``.
    """
    if eta <= -1 or nu <= -1:
        raise ParameterError(f"eta and nu must exceed -1, got eta={eta}, nu={nu}")
    pieces = _pieces_of(u, eta)
    inverse = _InverseDistribution.build(pieces)
    total = inverse.total_mass
    ratio = u.grid.r_min / u.grid.r_max
    if total <= 0:
        grid = u.grid
        return SymmetrizedFunction(grid, np.zeros(grid.n_nodes), eta, nu, grid.r_max, inverse)
    r_star = ((nu + 1.0) * total) ** (1.0 / (nu + 1.0))
    grid = make_geometric_grid(ratio * r_star, r_star, u.grid.n_cells)
    masses = measure_from_origin(grid.nodes, nu)
    masses[-1] = total
    samples = inverse(masses)
    samples = np.minimum.accumulate(samples)
    samples.flags.writeable = False
    return SymmetrizedFunction(grid, samples, float(eta), float(nu), r_star, inverse)


def maximal_function(ustar: SymmetrizedFunction) -> RadialFunction:
    """``u**(t) = (nu+1) t**-(nu+1) int_0^t u*(s) s**nu ds`` on the grid of ``u*``."""
    grid = ustar.grid
    running = cumulative_from_origin(grid, ustar.samples, ustar.nu)
    avg = running / measure_from_origin(grid.nodes, ustar.nu)
    return RadialFunction.sampled(grid, avg, grid.r_max)


def quadrature_points(u: RadialFunction, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Values of ``|u|`` and weights such that ``sum w Psi(v)`` approximates
    ``int Psi(|u|) r**eta dr`` for the piecewise-linear reading of ``u``.

    Each linear piece carries six Gauss-Legendre points; the constant head
    segment is one point weighted by its exact measure.
    """
    return _piece_points(_pieces_of(u, eta))


def _piece_points(pieces: _Pieces) -> tuple[np.ndarray, np.ndarray]:
    head = pieces.r_lo == 0.0
    body = ~head
    a, b = pieces.r_lo[body], pieces.r_hi[body]
    va, vb = pieces.v_lo[body], pieces.v_hi[body]
    width = b - a
    r = a[:, None] + width[:, None] * _GAUSS_X[None, :]
    v = va[:, None] + (vb - va)[:, None] * _GAUSS_X[None, :]
    w = width[:, None] * _GAUSS_W[None, :] * r**pieces.eta
    values = np.concatenate([pieces.v_lo[head], v.ravel()])
    weights = np.concatenate([pieces.mass[head], w.ravel()])
    return values, weights


def rearranged_quadrature_points(ustar: SymmetrizedFunction) -> tuple[np.ndarray, np.ndarray]:
    """Values of ``u*`` and weights for ``int Psi(u*(r)) r**nu dr``.

    Plateaus contribute one point weighted by their exact ``nu``-measure;
    each strictly decreasing stretch carries six Gauss-Legendre points in
    ``r`` between the radii that bound it.
    """
    inv = ustar._inverse
    nu = ustar.nu
    levels, plateau, ramp_lo, ramp_hi = inv.smooth_intervals()
    flat = (levels > 0) & (plateau > 0)
    keep = ramp_hi > ramp_lo
    m_lo, m_hi = ramp_lo[keep], ramp_hi[keep]
    e = nu + 1.0
    r_lo = (e * m_lo) ** (1.0 / e)
    r_hi = (e * m_hi) ** (1.0 / e)
    width = r_hi - r_lo
    r = r_lo[:, None] + width[:, None] * _GAUSS_X[None, :]
    v = inv((r**e / e).ravel())
    w = width[:, None] * _GAUSS_W[None, :] * r**nu
    values = np.concatenate([levels[flat], v])
    weights = np.concatenate([plateau[flat], w.ravel()])
    return values, weights


def integrate_psi(u: RadialFunction, eta: float, psi: Callable) -> float:
    """``int Psi(|u|) r**eta dr`` for the piecewise-linear reading of ``u``."""
    values, weights = quadrature_points(u, eta)
    return float(np.dot(weights, psi(values)))


def integrate_psi_rearranged(ustar: SymmetrizedFunction, psi: Callable) -> float:
    """``int_0^R* Psi(u*(r)) r**nu dr`` over the exact structure of ``u*``."""
    values, weights = rearranged_quadrature_points(ustar)
    return float(np.dot(weights, psi(values)))


def equimeasurability_check(
    u: RadialFunction, eta: float, nu: float, psi_id: str = "power", **psi_params
) -> tuple[float, float]:
    """Both sides of ``int Psi(|u|) r**eta dr = int Psi(u*) r**nu dr``."""
    psi = registered_psi(psi_id, **psi_params)
    if not np.any(u.values):
        return 0.0, 0.0
    ustar = symmetrize(u, eta, nu)
    return integrate_psi(u, eta, psi), integrate_psi_rearranged(ustar, psi)
