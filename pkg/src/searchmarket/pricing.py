"""Endogenous prices: the equivalent no-search market and its symmetric equilibrium.

A consumer with value V facing a business with known ``(pi, Q)`` behaves as
if, with probability ``pi``, the business were worth ``W = V*Q - c/pi`` to
her, and worthless otherwise.  Pricing is analysed in that market.

Demand is taken closed, ``D(p) = Pr[W >= p]``: the revenue at ``p`` is the
limit of the revenue at prices just below ``p``, which is what the supremum
defining the monopoly revenue refers to.  For continuous values this is the
same as ``Pr[W > p]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import AsymmetricInput, AsymmetricLearnedSet, DegenerateQuality, QuantileOutOfRange
from .model import FixedClamped, MyopicMonopoly, PointMass, ValueDist

GOLDEN_TOL = 1e-10
BISECT_TOL = 1e-12
_INVPHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class DemandCurve:
    value_dist: ValueDist
    fit_prob: float
    quality: float
    cost: float

    @property
    def top(self) -> float:
        """Largest effective value, ``v_max*Q - c/pi``."""
        return self.value_dist.v_max * self.quality - self.cost / self.fit_prob

    @property
    def bottom(self) -> float:
        return self.value_dist.v_min * self.quality - self.cost / self.fit_prob

    @property
    def zero_atom(self) -> float:
        return 1.0 - self.fit_prob

    def _threshold(self, p):
        return (np.asarray(p, dtype=float) + self.cost / self.fit_prob) / self.quality

    def demand(self, p):
        """``Pr[W >= p]`` for ``p >= 0``."""
        out = self.fit_prob * (1.0 - self.value_dist.cdf_left(self._threshold(p)))
        return float(out) if np.ndim(p) == 0 else out

    def demand_open(self, p):
        """``Pr[W > p]``."""
        out = self.fit_prob * (1.0 - self.value_dist.cdf(self._threshold(p)))
        return float(out) if np.ndim(p) == 0 else out

    def revenue(self, p):
        return p * self.demand(p)

    def quantile_price(self, q: float) -> float:
        """``p(q)``: the largest price at which demand is at least ``q``."""
        if not 0.0 < q <= self.fit_prob:
            raise QuantileOutOfRange(f"quantile {q} outside (0, {self.fit_prob}]")
        v = self.value_dist.quantile(1.0 - q / self.fit_prob)
        return v * self.quality - self.cost / self.fit_prob

    def sample_effective_values(self, u_value: np.ndarray, u_fit: np.ndarray) -> np.ndarray:
        w = self.value_dist.quantile(u_value) * self.quality - self.cost / self.fit_prob
        return np.where(u_fit < self.fit_prob, w, 0.0)


def effective_value_demand(value_dist: ValueDist, fit_prob: float, quality: float, cost: float) -> DemandCurve:
    if quality <= 0:
        raise DegenerateQuality("quality must be positive to define demand")
    if not 0.0 < fit_prob < 1.0:
        raise AsymmetricInput(f"fit probability {fit_prob} outside (0, 1)")
    return DemandCurve(value_dist, float(fit_prob), float(quality), float(cost))


def quantile_revenue(curve: DemandCurve, q: float) -> float:
    """``R(q) = q * p(q)``."""
    return q * curve.quantile_price(q)


def monopolist_optimum(curve: DemandCurve) -> tuple[float, float]:
    """``(p*, R*)``: revenue-maximising price, the largest one among ties."""
    return _monopolist_cached(curve)


@lru_cache(maxsize=1 << 16)
def _monopolist_cached(curve: DemandCurve) -> tuple[float, float]:
    top = curve.top
    if top <= 0:
        return 0.0, 0.0
    if isinstance(curve.value_dist, PointMass):
        return top, top * curve.fit_prob
    return exact_monopolist_piecewise(curve)


def golden_monopolist(curve: DemandCurve) -> tuple[float, float]:
    """Golden-section search for the revenue maximiser (cross-check of the closed form)."""
    top = curve.top
    if top <= 0:
        return 0.0, 0.0
    lo, hi = 0.0, top
    # revenue is unimodal in price for regular values
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = curve.revenue(x1), curve.revenue(x2)
    while hi - lo > GOLDEN_TOL:
        if f1 > f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = curve.revenue(x1)
        else:  # ties move right, toward the largest maximiser
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = curve.revenue(x2)
    p = 0.5 * (lo + hi)
    return p, curve.revenue(p)


def exact_monopolist_piecewise(curve: DemandCurve) -> tuple[float, float]:
    """Closed-form optimum for piecewise-linear value CDFs.

    On each knot interval the price is linear in the quantile ``q``, so
    ``R(q)`` is a concave quadratic there; the best vertex or endpoint wins.
    """
    pi, shift = curve.fit_prob, curve.cost / curve.fit_prob
    pts = [(pi * (1 - F), x * curve.quality - shift) for x, F in curve.value_dist.knots_]
    best = (0.0, 0.0)
    for (q_hi, p_lo), (q_lo, p_hi) in zip(pts, pts[1:]):
        slope = (p_lo - p_hi) / (q_hi - q_lo)
        icpt = p_hi - slope * q_lo
        cands = [q_lo, q_hi]
        if slope < 0 and q_lo < -icpt / (2 * slope) < q_hi:
            cands.append(-icpt / (2 * slope))
        for q in cands:
            p = icpt + slope * q
            if p >= 0 and (q * p > best[1] or (q * p == best[1] and p > best[0])):
                best = (p, q * p)
    return best


# ---------------------------------------------------------------------------
# Symmetric equilibrium
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Welfare:
    consumer_surplus: float
    revenue: float
    total_welfare: float
    se: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return self.consumer_surplus, self.revenue, self.total_welfare


@dataclass(frozen=True)
class EquilibriumProfile:
    """Symmetric mixed-price equilibrium among ``n`` identical businesses."""

    curve: DemandCurve | None
    n: int
    floor_price: float
    top_price: float
    monopoly_revenue: float
    per_business_revenue: float

    @property
    def fit_prob(self) -> float:
        return self.curve.fit_prob

    def cdf(self, p):
        """Price CDF ``G``; a step at ``p*`` when ``n == 1``."""
        p_arr = np.asarray(p, dtype=float)
        if self.n <= 1 or self.monopoly_revenue <= 0:
            out = np.where(p_arr >= self.top_price, 1.0, 0.0)
        else:
            pi = self.curve.fit_prob
            inside = (p_arr > self.floor_price) & (p_arr < self.top_price)
            pp = np.where(inside, p_arr, self.top_price)
            rev = pp * self.curve.demand(pp)
            ratio = np.where(inside, self.monopoly_revenue / np.maximum(rev, 1e-300), 1.0)
            g = (1.0 - (1.0 - pi) * ratio ** (1.0 / (self.n - 1))) / pi
            out = np.where(p_arr >= self.top_price, 1.0, np.where(inside, np.clip(g, 0.0, 1.0), 0.0))
        return float(out) if np.ndim(p) == 0 else out

    def sample_prices(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF price draws."""
        u = np.asarray(u, dtype=float)
        if self.n <= 1 or self.monopoly_revenue <= 0:
            return np.full(u.shape, self.top_price)
        pi = self.curve.fit_prob
        target = self.monopoly_revenue * ((1.0 - pi) / (1.0 - pi * u)) ** (self.n - 1)
        if isinstance(self.curve.value_dist, PointMass):
            return np.clip(target / pi, self.floor_price, self.top_price)
        lo = np.full(u.shape, self.floor_price)
        hi = np.full(u.shape, self.top_price)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = mid * self.curve.demand(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def _check_symmetric(fit_probs, qualities, tol=1e-12) -> None:
    if len(set(fit_probs)) > 1 or len(set(qualities)) > 1:
        if max(fit_probs) - min(fit_probs) > tol or max(qualities) - min(qualities) > tol:
            raise AsymmetricInput("all businesses must share (fit_prob, quality)")


def symmetric_equilibrium(curve: DemandCurve | None, n: int) -> EquilibriumProfile:
    """Equilibrium price distribution for ``n`` businesses sharing ``curve``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0 or curve is None:
        return EquilibriumProfile(curve, 0, 0.0, 0.0, 0.0, 0.0)
    p_star, r_star = monopolist_optimum(curve)
    pi = curve.fit_prob
    per = (1.0 - pi) ** (n - 1) * r_star
    if n == 1 or r_star <= 0:
        return EquilibriumProfile(curve, n, p_star, p_star, r_star, per)
    if isinstance(curve.value_dist, PointMass):
        floor = per / pi
    else:
        lo, hi = 0.0, p_star
        while hi - lo > BISECT_TOL * max(1.0, p_star):
            mid = 0.5 * (lo + hi)
            if curve.revenue(mid) <= per:
                lo = mid
            else:
                hi = mid
        floor = lo
    return EquilibriumProfile(curve, n, floor, p_star, r_star, per)


@dataclass(frozen=True)
class EquilibriumCheck:
    on_support_gap: float
    max_gain: float


def verify_equilibrium(profile: EquilibriumProfile, grid_size: int = 10_000) -> EquilibriumCheck:
    """Expected revenue of a deviation to each grid price, against the profile.

    ``on_support_gap`` is the largest |revenue - equilibrium revenue| on
    ``[p_floor, p*]``; ``max_gain`` the largest revenue excess anywhere on
    ``[0, top]``.
    """
    if profile.n == 0:
        return EquilibriumCheck(0.0, 0.0)
    curve = profile.curve
    pi = curve.fit_prob
    top = max(curve.top, profile.top_price)
    grid = np.linspace(0.0, top, grid_size)
    support = np.linspace(profile.floor_price, profile.top_price, grid_size)

    def dev_revenue(p):
        return (1.0 - pi * profile.cdf(p)) ** (profile.n - 1) * curve.revenue(p)

    gap = float(np.max(np.abs(dev_revenue(support) - profile.per_business_revenue)))
    gain = float(np.max(dev_revenue(grid) - profile.per_business_revenue))
    return EquilibriumCheck(gap, max(gain, 0.0))


# ---------------------------------------------------------------------------
# Welfare
# ---------------------------------------------------------------------------


def _consumer_total_welfare(profile: EquilibriumProfile, w: float) -> float:
    if w <= 0:
        return 0.0
    pi = profile.curve.fit_prob
    return w * (1.0 - (1.0 - pi * profile.cdf(w)) ** profile.n)


def welfare(profile: EquilibriumProfile, method: str = "auto", samples: int = 200_000, seed: int = 0) -> Welfare:
    """Consumer surplus, total revenue and total welfare per consumer.

    Each business fits independently and posts an independent price from the
    profile; the consumer buys the cheapest fitting offer not above her
    effective value.  ``method`` is ``"exact"`` (closed form for point-mass
    values, quadrature otherwise), ``"monte_carlo"``, or ``"auto"`` (exact).
    """
    if profile.n == 0:
        return Welfare(0.0, 0.0, 0.0)
    if method in ("auto", "exact"):
        return _welfare_exact(profile)
    if method == "monte_carlo":
        return _welfare_mc(profile, samples, seed)
    raise ValueError(f"unknown welfare method {method!r}")


def _welfare_exact(profile: EquilibriumProfile) -> Welfare:
    curve = profile.curve
    dist = curve.value_dist
    rev = profile.n * profile.per_business_revenue
    if isinstance(dist, PointMass):
        tw = _consumer_total_welfare(profile, curve.top)
    else:
        def integrand(v):
            w = v * curve.quality - curve.cost / curve.fit_prob
            return _consumer_total_welfare(profile, w)

        pts = list(dist.knots())
        for p in (profile.floor_price, profile.top_price, 0.0):
            pts.append((p + curve.cost / curve.fit_prob) / curve.quality)
        pts = sorted(x for x in set(pts) if dist.v_min <= x <= dist.v_max)
        tw = 0.0
        for a, b in zip(pts, pts[1:]):
            if b <= a:
                continue
            dens = (dist.cdf(b) - dist.cdf(a)) / (b - a)
            val, _ = integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
            tw += dens * val
    return Welfare(tw - rev, rev, tw)


def _welfare_mc(profile: EquilibriumProfile, samples: int, seed: int) -> Welfare:
    curve = profile.curve
    rng = np.random.default_rng(seed)
    n = profile.n
    v = curve.value_dist.quantile(rng.random(samples))
    w = np.asarray(v) * curve.quality - curve.cost / curve.fit_prob
    fits = rng.random((samples, n)) < curve.fit_prob
    prices = profile.sample_prices(rng.random((samples, n)))
    offered = np.where(fits, prices, np.inf)
    best = offered.min(axis=1)
    buy = (best <= w) & np.isfinite(best) & (w > 0)
    paid = np.where(buy, best, 0.0)
    surplus = np.where(buy, w - best, 0.0)
    tw = surplus + paid
    cs = surplus.mean()
    return Welfare(float(cs), float(paid.mean()), float(tw.mean()), float(surplus.std(ddof=1) / math.sqrt(samples)))


# ---------------------------------------------------------------------------
# Demand-responsive prices and canonical equilibrium
# ---------------------------------------------------------------------------


def demand_responsive_price(post_fit: float, post_quality: float, value_dist: ValueDist, cost: float, rule) -> float:
    """Price a business posts given the market's beliefs about it.

    Any returned positive price leaves the index at ``v_max`` strictly
    positive.  When no such price exists the result is 0.
    """
    headroom = value_dist.v_max * post_quality - cost / post_fit
    if headroom <= 0:
        return 0.0
    if isinstance(rule, FixedClamped):
        return max(0.0, min(rule.price, headroom - rule.margin))
    if isinstance(rule, MyopicMonopoly):
        if post_quality <= 0 or not 0 < post_fit < 1:
            return 0.0
        p, _ = monopolist_optimum(DemandCurve(value_dist, post_fit, post_quality, cost))
        return max(0.0, min(p, headroom - rule.margin))
    raise TypeError(f"unknown pricing rule {rule!r}")


def canonical_equilibrium(market, trace) -> EquilibriumProfile:
    """Symmetric equilibrium on the learned set of ``trace``."""
    spec = market.spec
    learned = [j for j, flag in enumerate(trace.learned_flags) if flag]
    if not learned:
        return symmetric_equilibrium(None, 0)
    fits = [spec.businesses[j].fit_prob for j in learned]
    quals = [spec.businesses[j].quality for j in learned]
    try:
        _check_symmetric(fits, quals)
    except AsymmetricInput as exc:
        raise AsymmetricLearnedSet(str(exc)) from exc
    curve = effective_value_demand(spec.value_dist, fits[0], quals[0], spec.search_cost)
    return symmetric_equilibrium(curve, len(learned))


# ---------------------------------------------------------------------------
# Search market vs transformed market
# ---------------------------------------------------------------------------


def transformed_market_revenue(params, value_dist: ValueDist, cost: float, samples: int, seed: int):
    """Per-business revenue when consumers see effective values directly.

    ``params`` holds known ``(pi, Q, P)`` per business.  A consumer buys from
    the business with the largest ``W_j - P_j`` among those that fit, if that
    surplus is positive (ties to the lower id).  Returns ``(mean, se)``
    arrays.
    """
    rng = np.random.default_rng(seed)
    m = len(params)
    pi = np.array([p for p, _, _ in params])
    q = np.array([x for _, x, _ in params])
    price = np.array([x for _, _, x in params])
    v = np.asarray(value_dist.quantile(rng.random(samples)))
    fits = rng.random((samples, m)) < pi
    surplus = v[:, None] * q - cost / pi - price
    surplus = np.where(fits, surplus, -np.inf)
    choice = np.argmax(surplus, axis=1)
    buy = surplus[np.arange(samples), choice] > 0
    rev = np.zeros((samples, m))
    rev[np.arange(samples)[buy], choice[buy]] = price[choice[buy]]
    return rev.mean(axis=0), rev.std(axis=0, ddof=1) / math.sqrt(samples)


def search_market_revenue(params, value_dist: ValueDist, cost: float, samples: int, seed: int, tol: float = 1e-9):
    """Per-business revenue from simulating the index policy with known parameters."""
    from .search import optimal_search

    rng = np.random.default_rng(seed)
    m = len(params)
    beliefs = [(p, x) for p, x, _ in params]
    prices = [x for _, _, x in params]
    v = np.asarray(value_dist.quantile(rng.random(samples)))
    fit_u = rng.random((samples, m))
    rev = np.zeros((samples, m))
    for i in range(samples):
        row = fit_u[i]
        out = optimal_search(float(v[i]), beliefs, prices, cost, lambda j: int(row[j] < beliefs[j][0]), tol=tol)
        if out.transacted is not None:
            rev[i, out.transacted] = prices[out.transacted]
    return rev.mean(axis=0), rev.std(axis=0, ddof=1) / math.sqrt(samples)


def transformed_market_revenue_exact(params, value_dist: ValueDist, cost: float) -> np.ndarray:
    """Exact per-business revenue in the transformed market.

    Business j sells iff it fits, its surplus ``W_j - P_j`` is positive, and
    every business with a larger surplus (or an equal one and lower id) does
    not fit.
    """
    pi = [p for p, _, _ in params]
    shift = [cost / p for p in pi]
    lines = [(x, pr + s) for (_, x, pr), s in zip(params, shift)]  # surplus = slope*V - icpt
    breaks = [c / a for a, c in lines if a > 0]
    breaks += [(c1 - c2) / (a1 - a2) for i, (a1, c1) in enumerate(lines) for a2, c2 in lines[i + 1 :] if a1 != a2]

    def sold(v: float, j: int) -> float:
        a, c = lines[j]
        sj = a * v - c
        if sj <= 0:
            return 0.0
        prob = pi[j]
        for k, (ak, ck) in enumerate(lines):
            sk = ak * v - ck
            if k != j and (sk > sj or (sk == sj and k < j)):
                prob *= 1 - pi[k]
        return prob

    return np.array([value_dist.integrate(lambda v: params[j][2] * sold(v, j), breaks) for j in range(len(params))])
