"""Ready-made markets used by the reproductions and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .model import (
    Atoms,
    Beta,
    BusinessTruth,
    CanonicalEquilibrium,
    DiscreteJoint,
    IndependentPrior,
    MarketSpec,
    PerScreenPrior,
    PointMass,
)


def inform_bad_markets(eps: float = 0.01, cost: float = 0.2, horizon: int = 10_000) -> tuple[MarketSpec, MarketSpec]:
    """Single-business pair where more informative inspection hurts learning.

    Two screens: the first passes with probability ``eps`` or ``1 - eps``
    (equally likely a priori, truly ``1 - eps``), the second with a known 1/2.
    The baseline resolves only the first screen at inspection; the more
    informative market resolves both, without transcripts.
    """
    screens = (1 - eps, 0.5)
    prior = PerScreenPrior((Atoms((eps, 1 - eps), (0.5, 0.5)), Atoms.point(0.5)))
    base = MarketSpec(
        businesses=(BusinessTruth.from_screens(screens, 1),),
        priors=(prior,),
        value_dist=PointMass(1.0),
        search_cost=cost,
        search_degree=1,
        transcripts=False,
        horizon=horizon,
    )
    informative = base.with_(businesses=(BusinessTruth.from_screens(screens, 2),), search_degree=2)
    return base, informative


def inform_bad_direct(eps: float = 0.01, cost: float = 0.2, horizon: int = 10_000) -> tuple[MarketSpec, MarketSpec]:
    """The same pair written with joint (fit, quality) priors instead of screens."""
    base = MarketSpec(
        businesses=(BusinessTruth(1 - eps, 0.5),),
        priors=(DiscreteJoint(((eps, 0.5), (1 - eps, 0.5)), (0.5, 0.5)),),
        value_dist=PointMass(1.0),
        search_cost=cost,
        horizon=horizon,
    )
    informative = base.with_(
        businesses=(BusinessTruth((1 - eps) / 2, 1.0),),
        priors=(DiscreteJoint(((eps / 2, 1.0), ((1 - eps) / 2, 1.0)), (0.5, 0.5)),),
    )
    return base, informative


def inform_pricing_markets(eps: float = 0.01, horizon: int = 200) -> tuple[MarketSpec, MarketSpec]:
    """Two businesses, free search, endogenous prices.

    Baseline: fit ``1 - eps`` and quality 1/2.  More informative: fit
    ``(1 - eps)/2`` and quality 1.  Parameters are known to the market.
    """

    def market(fit: float, quality: float) -> MarketSpec:
        b = BusinessTruth(fit, quality)
        prior = IndependentPrior(Atoms.point(fit), Atoms.point(quality))
        return MarketSpec(
            businesses=(b, b),
            priors=(prior, prior),
            value_dist=PointMass(1.0),
            search_cost=0.0,
            price_mode=CanonicalEquilibrium(),
            horizon=horizon,
        )

    return market(1 - eps, 0.5), market((1 - eps) / 2, 1.0)


def revenue_example_markets(n: int, cost: float = 1 / 3, horizon: int = 2_000) -> tuple[MarketSpec, MarketSpec]:
    """``n`` symmetric businesses with fit 1/2, known quality 1, Beta(1, 1) fit priors.

    Returns ``(costly, free)``: search cost ``cost`` and search cost 0.
    """
    b = BusinessTruth(0.5, 1.0)
    prior = IndependentPrior(Beta(1.0, 1.0), Atoms.point(1.0))
    costly = MarketSpec(
        businesses=(b,) * n,
        priors=(prior,) * n,
        value_dist=PointMass(1.0),
        search_cost=cost,
        price_mode=CanonicalEquilibrium(),
        horizon=horizon,
    )
    return costly, costly.with_(search_cost=0.0)


def random_market(rng, max_businesses: int = 3, horizon: int = 1_000, beta_priors: bool | None = None) -> MarketSpec:
    """Random exogenous-price market with finite-support or Beta fit priors.

    Quality is known; truths are drawn from the prior so that the market's
    model is correctly specified.
    """
    from .model import Uniform

    m = int(rng.integers(1, max_businesses + 1))
    use_beta = bool(rng.random() < 0.5) if beta_priors is None else beta_priors
    businesses, priors = [], []
    for _ in range(m):
        quality = float(rng.uniform(0.4, 1.0))
        price = float(rng.uniform(0.0, 0.2))
        if use_beta:
            a, b = (float(x) for x in rng.uniform(0.5, 3.0, size=2))
            fit = float(np.clip(rng.beta(a, b), 0.02, 0.98))
            prior = IndependentPrior(Beta(a, b), Atoms.point(quality))
        else:
            lo, hi = sorted(float(x) for x in rng.uniform(0.05, 0.95, size=2))
            w = float(rng.uniform(0.2, 0.8))
            fit = hi if rng.random() < w else lo
            prior = IndependentPrior(Atoms((lo, hi), (1 - w, w)), Atoms.point(quality))
        businesses.append(BusinessTruth(fit, quality, price))
        priors.append(prior)
    value = PointMass(1.0) if rng.random() < 0.5 else Uniform(0.0, float(rng.uniform(1.0, 1.5)))
    return MarketSpec(
        businesses=tuple(businesses),
        priors=tuple(priors),
        value_dist=value,
        search_cost=float(rng.uniform(0.05, 0.3)),
        horizon=horizon,
    )


def random_screening_market(
    rng, max_businesses: int = 3, max_screens: int = 3, horizon: int = 400
) -> tuple[MarketSpec, MarketSpec]:
    """Random pair of transcribed screening markets with degrees ``k < k_hi``.

    Both markets share truths, priors and screens; only the search degree
    differs.  Every business has the same number of screens.
    """
    m = int(rng.integers(1, max_businesses + 1))
    n_screens = int(rng.integers(2, max_screens + 1))
    k = int(rng.integers(1, n_screens))
    k_hi = int(rng.integers(k + 1, n_screens + 1))
    screens, priors, prices = [], [], []
    for _ in range(m):
        marginals, probs = [], []
        for _ in range(n_screens):
            if rng.random() < 0.5:
                a, b = (float(x) for x in rng.uniform(1.0, 4.0, size=2))
                marginals.append(Beta(a, b))
                probs.append(float(np.clip(rng.beta(a, b), 0.05, 0.95)))
            else:
                lo, hi = sorted(float(x) for x in rng.uniform(0.1, 0.95, size=2))
                marginals.append(Atoms((lo, hi), (0.5, 0.5)))
                probs.append(hi if rng.random() < 0.5 else lo)
        screens.append(tuple(probs))
        priors.append(PerScreenPrior(tuple(marginals)))
        prices.append(float(rng.uniform(0.0, 0.1)))
    cost = float(rng.uniform(0.02, 0.15))

    def build(degree: int) -> MarketSpec:
        return MarketSpec(
            businesses=tuple(BusinessTruth.from_screens(s, degree, p) for s, p in zip(screens, prices)),
            priors=tuple(priors),
            value_dist=PointMass(1.0),
            search_cost=cost,
            search_degree=degree,
            transcripts=True,
            horizon=horizon,
        )

    return build(k), build(k_hi)
