"""The consumer's optimal inspection policy and its comparators.

Business ``j`` is summarised by ``(pi, Q, P)``: fit probability, quality and
price.  A consumer with value ``V`` inspects businesses with a strictly
positive index ``V*Q - P - c/pi`` in decreasing index order and transacts with
the first one that fits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

from .errors import TooManyBusinesses, ZeroFitPosterior

MAX_BRUTE_FORCE = 8


@dataclass(frozen=True)
class SearchOutcome:
    inspected: tuple[int, ...]
    fits: tuple[int, ...]
    transacted: int | None
    quality: int | None
    utility: float


def search_index(value: float, post_fit: float, post_quality: float, price: float, cost: float) -> float:
    if post_fit <= 0:
        raise ZeroFitPosterior(f"posterior fit mean must be positive, got {post_fit}")
    return value * post_quality - price - cost / post_fit


def inspection_order(
    value: float,
    beliefs: Sequence[tuple[float, float]],
    prices: Sequence[float],
    cost: float,
    candidates: Iterable[int] | None = None,
    tol: float = 1e-9,
) -> list[int]:
    """Businesses with index above ``tol``, by decreasing index then id."""
    ids = range(len(beliefs)) if candidates is None else candidates
    keyed = []
    for j in ids:
        pf, pq = beliefs[j]
        s = search_index(value, pf, pq, prices[j], cost)
        if s > tol:
            keyed.append((-s, j))
    keyed.sort()
    return [j for _, j in keyed]


def optimal_search(
    value: float,
    beliefs: Sequence[tuple[float, float]],
    prices: Sequence[float],
    cost: float,
    fit_oracle: Callable[[int], int],
    candidates: Iterable[int] | None = None,
    quality_oracle: Callable[[int], int] | None = None,
    tol: float = 1e-9,
) -> SearchOutcome:
    """Run the index policy for one consumer.

    ``beliefs[j]`` is ``(post_fit, post_quality)``.  ``fit_oracle(j)`` returns
    the fit bit of the next inspection of ``j``; ``quality_oracle(j)`` the
    quality bit of a transaction (taken as 1 when omitted).  Only ids in
    ``candidates`` (default: all) are considered.
    """
    order = inspection_order(value, beliefs, prices, cost, candidates, tol)
    inspected: list[int] = []
    fits: list[int] = []
    for j in order:
        bit = fit_oracle(j)
        inspected.append(j)
        fits.append(bit)
        if bit:
            q = 1 if quality_oracle is None else quality_oracle(j)
            util = value * q - prices[j] - cost * len(inspected)
            return SearchOutcome(tuple(inspected), tuple(fits), j, q, util)
    return SearchOutcome(tuple(inspected), tuple(fits), None, None, -cost * len(inspected))


# ---------------------------------------------------------------------------
# Known-parameter comparators
# ---------------------------------------------------------------------------

Params = Sequence[tuple[float, float, float]]  # (pi, Q, P) per business


def _order_known(value: float, params: Params, cost: float, tol: float) -> list[int]:
    return inspection_order(value, [(p, q) for p, q, _ in params], [pr for _, _, pr in params], cost, tol=tol)


def expected_utility_known(value: float, params: Params, cost: float, tol: float = 1e-9) -> float:
    """U*(S): optimal expected utility when the parameters in ``params`` are known."""
    total = 0.0
    reach = 1.0
    for j in _order_known(value, params, cost, tol):
        pi, q, price = params[j]
        total += reach * (-cost + pi * (value * q - price))
        reach *= 1.0 - pi
    return total


def transaction_probabilities(value: float, params: Params, cost: float, tol: float = 1e-9) -> list[float]:
    lam = [0.0] * len(params)
    reach = 1.0
    for j in _order_known(value, params, cost, tol):
        lam[j] = reach * params[j][0]
        reach *= 1.0 - params[j][0]
    return lam


def policy_value(
    value: float,
    beliefs: Sequence[tuple[float, float]],
    prices: Sequence[float],
    truths: Sequence[tuple[float, float]],
    cost: float,
    candidates: Iterable[int] | None = None,
    tol: float = 1e-9,
) -> float:
    """True expected utility of the index policy driven by ``beliefs``.

    The order comes from the beliefs; the expectation uses the true
    ``(pi, Q)`` in ``truths``.
    """
    total = 0.0
    reach = 1.0
    for j in inspection_order(value, beliefs, prices, cost, candidates, tol):
        pi, q = truths[j]
        total += reach * (-cost + pi * (value * q - prices[j]))
        reach *= 1.0 - pi
    return total


def index_breakpoints(
    beliefs: Sequence[tuple[float, float]], prices: Sequence[float], cost: float, candidates: Iterable[int] | None = None
) -> list[float]:
    """Values of V where an index crosses zero or two indices cross.

    Between consecutive breakpoints the inspection order is constant, so the
    expected utility is linear in V there.
    """
    ids = list(range(len(beliefs)) if candidates is None else candidates)
    lines = []
    for j in ids:
        pf, pq = beliefs[j]
        lines.append((pq, prices[j] + cost / pf))  # index = slope*V - intercept
    pts = []
    for slope, icpt in lines:
        if slope > 0:
            pts.append(icpt / slope)
    for (s1, c1), (s2, c2) in itertools.combinations(lines, 2):
        if s1 != s2:
            pts.append((c1 - c2) / (s1 - s2))
    return pts


def steady_state_utility(params: Params, value_dist, cost: float, tol: float = 1e-9) -> float:
    """E_V[U*(S)], integrated exactly against ``value_dist``."""
    if not params:
        return 0.0
    beliefs = [(p, q) for p, q, _ in params]
    prices = [pr for _, _, pr in params]
    breaks = index_breakpoints(beliefs, prices, cost)
    return value_dist.integrate(lambda v: expected_utility_known(v, params, cost, tol), breaks)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def brute_force_policy_value(value: float, params: Params, cost: float) -> float:
    """Optimal expected utility over all adaptive policies, by dynamic programming.

    State: the set of uninspected businesses and the best transaction utility
    already found (fits are binary, so an inspected business offers either
    ``V*Q - P`` or nothing).  Action: stop and take the best offer, or inspect
    any uninspected business.  Unlike the index policy, this also allows
    continuing after a fit.
    """
    m = len(params)
    if m > MAX_BRUTE_FORCE:
        raise TooManyBusinesses(f"brute force supports at most {MAX_BRUTE_FORCE} businesses, got {m}")
    payoff = tuple(value * q - price for _, q, price in params)
    fit = tuple(p for p, _, _ in params)

    @lru_cache(maxsize=None)
    def best(remaining: frozenset, offer: float) -> float:
        v = max(offer, 0.0)
        for j in remaining:
            rest = remaining - {j}
            cont = -cost + fit[j] * best(rest, max(offer, payoff[j])) + (1 - fit[j]) * best(rest, offer)
            if cont > v:
                v = cont
        return v

    return best(frozenset(range(m)), float("-inf"))


def exact_policy_utility(value: float, params: Params, cost: float, tol: float = 1e-9) -> float:
    """Expected utility of :func:`optimal_search` averaged over all fit outcomes.

    Enumerates every fit vector and weights the realised utility by its
    probability.  Used to check the index policy against the DP optimum.
    """
    m = len(params)
    beliefs = [(p, q) for p, q, _ in params]
    prices = [pr for _, _, pr in params]
    total = 0.0
    for bits in itertools.product((0, 1), repeat=m):
        prob = 1.0
        for (p, _, _), b in zip(params, bits):
            prob *= p if b else 1 - p
        if prob == 0:
            continue
        # quality enters through its mean: E[V*q] = V*Q
        out = optimal_search(value, beliefs, prices, cost, lambda j: bits[j], tol=tol)
        util = out.utility
        if out.transacted is not None:
            util += value * (params[out.transacted][1] - 1)
        total += prob * util
    return total
