"""Round-by-round market dynamics, learned/lost classification and coupling.

Each round one consumer arrives with a fresh value, runs the index policy on
the active businesses using current posterior means, and the market records
what she found.  A business is lost once its index at the top value (and at
its price floor) is no longer positive; it is then never inspected again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .belief import BeliefState, HistoryProjection, posterior_from_counts
from .errors import IncompatibleSpecs
from .model import (
    CanonicalEquilibrium,
    DemandResponsive,
    Exogenous,
    MarketSpec,
    PerScreenPrior,
    PointMass,
    ValidatedMarket,
    validate_market,
)
from .pricing import demand_responsive_price
from .rng import RandomnessBundle
from .screening import InspectionSignal, screen_draw
from .search import index_breakpoints, optimal_search, policy_value, steady_state_utility


class Status(str, Enum):
    ACTIVE = "active"
    LOST = "lost"


def classify_business(
    belief: BeliefState, price_floor: float, v_max: float, cost: float, tol: float = 1e-9
) -> Status:
    """Lost iff the index at value ``v_max`` and price ``price_floor`` is at most ``tol``."""
    index = v_max * belief.post_quality - price_floor - cost / belief.post_fit
    return Status.LOST if index <= tol else Status.ACTIVE


@dataclass(frozen=True)
class Inspection:
    business: int
    fit: int
    screens: tuple[int, ...] = ()  # screen outcomes seen by the market (transcripts only)


@dataclass(frozen=True)
class RoundRecord:
    round: int  # 1-based
    value: float
    prices: tuple[float, ...]
    beliefs: tuple[tuple[float, float], ...]  # (post_fit, post_quality) before the round
    active: tuple[int, ...]
    inspections: tuple[Inspection, ...]
    transaction: int | None
    quality: int | None
    utility: float


@dataclass
class MarketTrace:
    """Outcome of one run.

    ``lost_at[j]`` is the first round in which business ``j`` is no longer
    considered (1 if it is lost before any consumer arrives), or ``None``.
    ``rounds`` is empty when the run was not recorded.  ``settled_lost_at[j]``
    is set when a business still active at the horizon was found lost by the
    settling continuation (the 1-based observation count at which it became
    lost); such a business is not learned.
    """

    market: ValidatedMarket
    horizon: int
    rounds: list[RoundRecord]
    final_beliefs: tuple[BeliefState, ...]
    lost_at: tuple[int | None, ...]
    projections: tuple[HistoryProjection, ...]
    final_prices: tuple[float, ...]
    settled_lost_at: tuple[int | None, ...] = ()

    @property
    def n_businesses(self) -> int:
        return self.market.n_businesses

    @property
    def transcripts(self) -> bool:
        return self.market.spec.screening and self.market.spec.transcripts

    @property
    def learned_flags(self) -> tuple[bool, ...]:
        settled = self.settled_lost_at or (None,) * len(self.lost_at)
        return tuple(t is None and s is None for t, s in zip(self.lost_at, settled))

    @property
    def learned_set(self) -> frozenset[int]:
        return frozenset(j for j, flag in enumerate(self.learned_flags) if flag)

    @property
    def lost_set(self) -> frozenset[int]:
        return frozenset(j for j, flag in enumerate(self.learned_flags) if not flag)

    def mean_errors(self) -> tuple[float, ...]:
        """|post_fit - fit_prob| per business at the end of the run."""
        return tuple(
            abs(b.post_fit - t.fit_prob) for b, t in zip(self.final_beliefs, self.market.spec.businesses)
        )

    def expected_utilities(self) -> np.ndarray:
        return utility_convergence_series(self)[0]


def _belief_prior(market: ValidatedMarket, j: int):
    return market.belief_priors[j]


class _BusinessState:
    __slots__ = ("prior", "fit", "quality", "screens", "fit_r", "qual_r", "screen_r", "belief", "price",
                 "fit_obs", "qual_obs", "screen_obs")

    def __init__(self, prior, n_screens: int):
        self.prior = prior
        self.fit = [0, 0]
        self.quality = [0, 0]
        self.screens = [[0, 0] for _ in range(n_screens)]
        self.fit_r = 0
        self.qual_r = 0
        self.screen_r = [0] * n_screens
        self.belief = None
        self.price = 0.0
        self.fit_obs: list[int] = []
        self.qual_obs: list[int] = []
        self.screen_obs: list[tuple[int, ...]] = []


def run_market(
    market: ValidatedMarket | MarketSpec,
    bundle: RandomnessBundle,
    horizon: int | None = None,
    record: bool = True,
    settle: bool = False,
    settle_depth: int | None = None,
) -> MarketTrace:
    """Simulate ``horizon`` rounds (default: the spec's horizon).

    Deterministic given the market, the bundle seed and the horizon.

    With ``settle`` every business still active at the horizon is followed
    further along its own observation stream, as if inspected on its own,
    until it has ``settle_depth`` observations (default: the horizon) or is
    lost.  An active business keeps being inspected with positive probability
    every round, and its beliefs depend only on its own stream, so this is
    the path its beliefs take after the horizon.  Coupled markets settled to
    the same depth compare their limit learned sets exactly.
    """
    if isinstance(market, MarketSpec):
        market = validate_market(market)
    spec = market.spec
    horizon = spec.horizon if horizon is None else int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    m = market.n_businesses
    cost, tol = spec.search_cost, spec.tolerance
    dist = spec.value_dist
    v_max = dist.v_max
    screening = spec.screening
    transcripts = screening and spec.transcripts
    k = spec.search_degree
    truths = spec.businesses
    mode = spec.price_mode
    rule = None
    if isinstance(mode, DemandResponsive):
        rule = mode.rule
    elif isinstance(mode, CanonicalEquilibrium):
        rule = mode.learning_rule
    floors = [market.price_floor(j) for j in range(m)]

    states = [
        _BusinessState(_belief_prior(market, j), len(truths[j].screen_probs) if screening else 0) for j in range(m)
    ]

    def refresh(j: int) -> None:
        st = states[j]
        if transcripts:
            st.belief = posterior_from_counts(st.prior, screens=tuple(map(tuple, st.screens)), degree=k)
        else:
            st.belief = posterior_from_counts(st.prior, tuple(st.fit), tuple(st.quality))
        st.price = truths[j].price if rule is None else demand_responsive_price(
            st.belief.post_fit, st.belief.post_quality, dist, cost, rule
        )

    lost_at: list[int | None] = [None] * m
    active: list[int] = []
    for j in range(m):
        refresh(j)
        if classify_business(states[j].belief, floors[j], v_max, cost, tol) is Status.LOST:
            lost_at[j] = 1
        else:
            active.append(j)

    point_value = dist.value if isinstance(dist, PointMass) else None
    rounds: list[RoundRecord] = []
    pending: dict[int, InspectionSignal] = {}
    fit_truth = [t.fit_prob for t in truths]
    qual_truth = [t.quality for t in truths]

    def fit_oracle(j: int) -> int:
        st = states[j]
        if screening:
            probs = truths[j].screen_probs

            def uni(ell: int) -> float:
                r = st.screen_r[ell]
                st.screen_r[ell] = r + 1
                return bundle.screen_uniform(j, ell, r)

            sig = screen_draw(probs, k, uni, transcripts)
            pending[j] = sig
            return sig.fit
        r = st.fit_r
        st.fit_r = r + 1
        return bundle.fit_bit(j, r, fit_truth[j])

    def quality_oracle(j: int) -> int:
        if screening:
            return pending[j].quality
        st = states[j]
        r = st.qual_r
        st.qual_r = r + 1
        return bundle.quality_bit(j, r, qual_truth[j])

    def observe(j: int, bit: int) -> tuple[int, ...]:
        st = states[j]
        st.fit[1 - bit] += 1
        st.fit_obs.append(bit)
        if not screening:
            return ()
        sig = pending[j]
        for ell, b in enumerate(sig.observed):
            st.screens[ell][1 - b] += 1
        if transcripts:
            st.screen_obs.append(sig.observed)
            return sig.observed
        return ()

    def observe_quality(j: int, bit: int) -> None:
        st = states[j]
        st.quality[1 - bit] += 1
        st.qual_obs.append(bit)

    for t in range(horizon):
        if not active and not record:
            break
        value = point_value if point_value is not None else float(dist.quantile(bundle.value_uniform(t)))
        beliefs = [(st.belief.post_fit, st.belief.post_quality) for st in states]
        prices = [st.price for st in states]
        pending.clear()
        if active:
            out = optimal_search(value, beliefs, prices, cost, fit_oracle, active, quality_oracle, tol)
        else:
            out = None
        inspections: list[Inspection] = []
        touched = []
        if out is not None:
            for j, bit in zip(out.inspected, out.fits):
                inspections.append(Inspection(j, bit, observe(j, bit)))
                touched.append(j)
            if out.transacted is not None:
                observe_quality(out.transacted, out.quality)
        if record:
            rounds.append(
                RoundRecord(
                    t + 1,
                    value,
                    tuple(prices),
                    tuple(beliefs),
                    tuple(active),
                    tuple(inspections),
                    None if out is None else out.transacted,
                    None if out is None else out.quality,
                    0.0 if out is None else out.utility,
                )
            )
        if touched:
            changed = False
            for j in touched:
                refresh(j)
                if classify_business(states[j].belief, floors[j], v_max, cost, tol) is Status.LOST:
                    lost_at[j] = t + 2
                    changed = True
            if changed:
                active = [j for j in active if lost_at[j] is None]

    settled: list[int | None] = [None] * m
    if settle:
        depth = horizon if settle_depth is None else int(settle_depth)
        for j in active:
            st = states[j]
            while len(st.fit_obs) < depth:
                pending.clear()
                bit = fit_oracle(j)
                observe(j, bit)
                if bit:
                    observe_quality(j, quality_oracle(j))
                refresh(j)
                if classify_business(st.belief, floors[j], v_max, cost, tol) is Status.LOST:
                    settled[j] = len(st.fit_obs)
                    break

    projections = tuple(
        HistoryProjection(tuple(st.fit_obs), tuple(st.qual_obs), tuple(st.screen_obs) if transcripts else None)
        for st in states
    )
    return MarketTrace(
        market,
        horizon,
        rounds,
        tuple(st.belief for st in states),
        tuple(lost_at),
        projections,
        tuple(st.price for st in states),
        tuple(settled),
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def replica_bundle(master_seed: int, replica: int) -> RandomnessBundle:
    return RandomnessBundle((master_seed, replica))


def estimate_lost_probability(
    market: ValidatedMarket | MarketSpec,
    j: int,
    replicas: int,
    horizon: int | None = None,
    master_seed: int = 0,
    settle: bool = False,
) -> tuple[float, float]:
    """Monte Carlo frequency with which business ``j`` is lost, and its standard error."""
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    if isinstance(market, MarketSpec):
        market = validate_market(market)
    lost = 0
    for i in range(replicas):
        trace = run_market(market, replica_bundle(master_seed, i), horizon, record=False, settle=settle)
        lost += not trace.learned_flags[j]
    p = lost / replicas
    return p, math.sqrt(p * (1 - p) / replicas)


def _check_compatible(a: ValidatedMarket, b: ValidatedMarket) -> None:
    sa, sb = a.spec, b.spec
    if a.n_businesses != b.n_businesses:
        raise IncompatibleSpecs("coupled markets need the same number of businesses")
    if sa.screening != sb.screening:
        raise IncompatibleSpecs("coupled markets must both use screening or neither")
    if sa.screening:
        for x, y in zip(sa.businesses, sb.businesses):
            if len(x.screen_probs) != len(y.screen_probs):
                raise IncompatibleSpecs("coupled markets need identical screen structures")


def run_coupled(
    spec_a: ValidatedMarket | MarketSpec,
    spec_b: ValidatedMarket | MarketSpec,
    master_seed,
    horizon: int | None = None,
    record: bool = False,
    settle: bool = False,
) -> tuple[MarketTrace, MarketTrace]:
    """Run two markets on one shared randomness bundle."""
    a = validate_market(spec_a) if isinstance(spec_a, MarketSpec) else spec_a
    b = validate_market(spec_b) if isinstance(spec_b, MarketSpec) else spec_b
    _check_compatible(a, b)
    bundle = RandomnessBundle(master_seed)
    return run_market(a, bundle, horizon, record, settle), run_market(b, bundle, horizon, record, settle)


def utility_convergence_series(trace: MarketTrace) -> tuple[np.ndarray, float]:
    """Per-round expected consumer utility and its limit ``U*(learned set)``.

    The expectation is over the consumer's value and the fit and quality
    draws, given the beliefs at the start of the round: the policy follows
    the beliefs, the payoffs follow the true parameters.
    """
    if not trace.rounds and trace.horizon:
        raise ValueError("the trace was not recorded")
    spec = trace.market.spec
    dist = spec.value_dist
    cost, tol = spec.search_cost, spec.tolerance
    truths = [(b.fit_prob, b.quality) for b in spec.businesses]
    cache: dict = {}
    series = np.empty(len(trace.rounds))
    for i, rec in enumerate(trace.rounds):
        key = (rec.beliefs, rec.prices, rec.active)
        val = cache.get(key)
        if val is None:
            if not rec.active:
                val = 0.0
            else:
                breaks = index_breakpoints(rec.beliefs, rec.prices, cost, rec.active)
                val = dist.integrate(
                    lambda v: policy_value(v, rec.beliefs, rec.prices, truths, cost, rec.active, tol), breaks
                )
            cache[key] = val
        series[i] = val
    learned = sorted(trace.learned_set)
    params = [(truths[j][0], truths[j][1], trace.final_prices[j]) for j in learned]
    return series, steady_state_utility(params, dist, cost, tol)
