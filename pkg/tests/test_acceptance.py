"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run directly (``python3 tests/test_acceptance.py``) or under pytest; either
way the terminal summary lists one line per criterion.
"""

import math
import sys
import time

import numpy as np
import pytest

from searchmarket.belief import posterior_from_counts
from searchmarket.constructions import inform_bad_markets, inform_pricing_markets
from searchmarket.dynamics import estimate_lost_probability, run_market, utility_convergence_series
from searchmarket.model import Atoms, Beta, DiscreteJoint, IndependentPrior, PiecewiseLinearCDF, PointMass, Uniform
from searchmarket.model import validate_market
from searchmarket.pricing import (
    canonical_equilibrium,
    effective_value_demand,
    monopolist_optimum,
    search_market_revenue,
    symmetric_equilibrium,
    transformed_market_revenue_exact,
    verify_equilibrium,
    welfare,
)
from searchmarket.reproduce import cheaper_search, revenue_example, transcripts, weitzman_oracle
from searchmarket.rng import RandomnessBundle

EPS = 0.01
SEED = 0
RESULTS: dict[int, str] = {}  # printed in the terminal summary by conftest.py


def announce(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    RESULTS[number] = line
    print(line)
    assert passed, line


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def test_criterion_01_index_policy_is_optimal():
    rep, secs = timed(weitzman_oracle, seed=SEED, instances=200)
    gap = rep.checks[1].value
    ok = rep.passed and secs < 10
    announce(1, ok, f"200 instances, max |index policy - DP| = {gap:.2e} (<= 1e-9), {secs:.1f}s (< 10s)")


def test_criterion_02_cheaper_search_containment():
    rep, secs = timed(cheaper_search, seed=SEED, replicas=1000, pairs=20, horizon=400)
    d = rep.data
    ok = rep.passed and secs < 120
    announce(2, ok, f"{d['contained']}/{d['replicas_run']} replicas contained "
                    f"({d['strictly_larger']} strictly larger), {secs:.1f}s (< 120s)")


def test_criterion_03_informative_search_loses_business():
    base, informative = inform_bad_markets(EPS, 0.2)
    t0 = time.perf_counter()
    w_inf, se_inf = estimate_lost_probability(informative, 0, 10_000, 200, SEED)
    w_base, se_base = estimate_lost_probability(base, 0, 10_000, 200, SEED)
    secs = time.perf_counter() - t0
    ok = w_inf >= 0.45 and w_base <= 0.03 and secs < 120
    announce(3, ok, f"P(lost | more informative) = {w_inf:.4f} +- {se_inf:.4f} (>= 0.45), "
                    f"P(lost | baseline) = {w_base:.4f} +- {se_base:.4f} (<= 0.03), {secs:.1f}s (< 120s)")


def test_criterion_04_transcript_containment():
    rep, secs = timed(transcripts, seed=SEED, replicas=1000, pairs=20, horizon=400)
    d = rep.data
    announce(4, rep.passed, f"{d['contained']}/{d['replicas_run']} replicas contained "
                            f"({d['strictly_larger']} strictly larger), {secs:.1f}s")


def _random_curve(rng):
    if rng.random() < 0.25:
        dist = PointMass(float(rng.uniform(0.5, 2.0)))
    else:
        lo = float(rng.uniform(0.0, 0.5))
        inner = np.sort(rng.uniform(lo + 0.1, lo + 2.0, size=int(rng.integers(0, 3)))).tolist()
        knots = [lo, *inner, lo + 2.1]
        dens = np.sort(rng.uniform(0.5, 2.0, size=len(knots) - 1))
        mass = np.cumsum(np.diff(knots) * dens)
        pts = [(knots[0], 0.0)] + [(x, float(m / mass[-1])) for x, m in zip(knots[1:], mass)]
        pts[-1] = (pts[-1][0], 1.0)
        dist = PiecewiseLinearCDF(tuple(pts))
    return effective_value_demand(dist, float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.4, 1.0)),
                                  float(rng.uniform(0.0, 0.2)))


def test_criterion_05_symmetric_equilibrium():
    rng = np.random.default_rng(SEED)
    worst_gap = worst_gain = worst_rev = 0.0
    for _ in range(20):
        curve = _random_curve(rng)
        _, r_star = monopolist_optimum(curve)
        for n in (2, 3, 5):
            prof = symmetric_equilibrium(curve, n)
            check = verify_equilibrium(prof, 10_000)
            worst_gap = max(worst_gap, check.on_support_gap)
            worst_gain = max(worst_gain, check.max_gain)
            worst_rev = max(worst_rev, abs(prof.per_business_revenue - (1 - curve.fit_prob) ** (n - 1) * r_star))
    hand = symmetric_equilibrium(effective_value_demand(PointMass(1.0), 0.5, 1.0, 0.0), 2)
    p = np.linspace(0.5, 1.0, 1001)
    hand_err = float(np.max(np.abs(hand.cdf(p[1:-1]) - (2 - 1 / p[1:-1]))))
    hand_ok = hand.floor_price == 0.5 and hand.top_price == 1.0 and hand.per_business_revenue == 0.25
    ok = worst_gap <= 1e-6 and worst_gain <= 1e-6 and worst_rev <= 1e-9 and hand_ok and hand_err <= 1e-12
    announce(5, ok, f"on-support gap {worst_gap:.1e}, max deviation gain {worst_gain:.1e} (<= 1e-6), "
                    f"revenue identity {worst_rev:.1e} (<= 1e-9); n=2 hand case G=2-1/p err {hand_err:.1e}, "
                    f"revenue {hand.per_business_revenue}")


def test_criterion_06_informative_search_lowers_surplus_under_pricing():
    base, informative = inform_pricing_markets(EPS)
    targets = (0.49005, 0.245025)
    results = []
    for spec in (base, informative):
        vm = validate_market(spec)
        trace = run_market(vm, RandomnessBundle((SEED, 0)), 50, record=False)
        prof = canonical_equilibrium(vm, trace)
        ex, secs = timed(welfare, prof, "exact")
        mc = welfare(prof, "monte_carlo", samples=400_000, seed=SEED)
        results.append((ex.consumer_surplus, secs, abs(mc.consumer_surplus - ex.consumer_surplus) / mc.se))
    (cs_m, t_m, z_m), (cs_t, t_t, z_t) = results
    ok = (
        abs(cs_m - targets[0]) <= 1e-6 and abs(cs_t - targets[1]) <= 1e-6 and cs_m > cs_t
        and t_m + t_t < 1 and z_m <= 3 and z_t <= 3
    )
    announce(6, ok, f"CS(M) = {cs_m:.7f} (0.49005), CS(M~) = {cs_t:.7f} (0.245025), closed form {t_m + t_t:.4f}s, "
                    f"Monte Carlo z = {z_m:.2f}, {z_t:.2f} (<= 3)")


def test_criterion_07_revenue_example():
    rep, secs = timed(revenue_example, seed=SEED, n=8)
    d = rep.data
    checks = {c.name: c for c in rep.checks}
    free_ok = checks["rev_free_minus_2^-n"].passed
    stated = checks["rev_costly_vs_stated_factor_2/3_z"]
    rho, pi, n_large = d["rho"], 0.5, d["n_large"]
    ratio_stated = 2 / 3 * (2 * rho * pi) * (2 * (1 - rho * pi)) ** (n_large - 1)
    ok = free_ok and stated.passed and ratio_stated > 1
    announce(7, ok, f"Rev(M~) = 2^-8 exactly: {free_ok}; simulated Rev(M) = {d['rev_costly_sim']:.6f} +- "
                    f"{d['rev_costly_se']:.6f} vs (2/3)rho*pi(1-rho*pi)^7 = {d['prediction_stated_factor_2/3']:.6f} "
                    f"with rho = {rho:.4f}: z = {stated.value:.1f} (<= 3); n=20 ratio {ratio_stated:.0f} (> 1); "
                    f"{secs:.1f}s [note: factor p* = {d['monopoly_price']:.4f} instead of 2/3 gives "
                    f"z = {checks['rev_costly_vs_monopoly_price_factor_z'].value:.2f}]")


def test_criterion_08_martingale_and_consistency():
    priors = [
        IndependentPrior(Beta(1.0, 1.0), Beta(2.0, 3.0)),
        IndependentPrior(Atoms((0.1, 0.4, 0.8), (0.3, 0.3, 0.4)), Atoms((0.2, 0.9), (0.5, 0.5))),
        DiscreteJoint(((0.2, 0.3), (0.6, 0.9), (0.9, 0.5)), (0.2, 0.5, 0.3)),
    ]
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for prior in priors:
        for _ in range(50):
            s, f, qs, qf = (int(x) for x in rng.integers(0, 20, size=4))
            qs = min(qs, s)
            qf = min(qf, s - qs)
            now = posterior_from_counts(prior, (s, f), (qs, qf))
            up = posterior_from_counts(prior, (s + 1, f), (qs, qf))
            down = posterior_from_counts(prior, (s, f + 1), (qs, qf))
            worst = max(worst, abs(now.post_fit * up.post_fit + (1 - now.post_fit) * down.post_fit - now.post_fit))
            qup = posterior_from_counts(prior, (s, f), (qs + 1, qf))
            qdown = posterior_from_counts(prior, (s, f), (qs, qf + 1))
            pq = now.post_quality
            worst = max(worst, abs(pq * qup.post_quality + (1 - pq) * qdown.post_quality - pq))
    n = 10_000
    good = 0
    for seed in range(200):
        bundle = RandomnessBundle((SEED, seed))
        pi = 0.05 + 0.9 * bundle.value_uniform(0)
        succ = sum(bundle.fit_bit(0, r, pi) for r in range(n))
        post = posterior_from_counts(IndependentPrior(Beta(1.0, 1.0), Atoms.point(1.0)), (succ, n - succ))
        good += abs(post.post_fit - pi) < 5 * math.sqrt(pi * (1 - pi) / n)
    ok = worst <= 1e-12 and good >= 190
    announce(8, ok, f"martingale identity error {worst:.1e} (<= 1e-12); consistency {good}/200 seeds (>= 190)")


def test_criterion_09_utility_converges_on_learned_set():
    base, _ = inform_bad_markets(EPS, 0.2)
    vm = validate_market(base)
    worst, used, i, comparator = 0.0, 0, 0, float("nan")
    while used < 5 and i < 50:
        trace = run_market(vm, RandomnessBundle((SEED, 10_000 + i)), 12_000)
        i += 1
        if not trace.learned_flags[0]:
            continue
        series, comparator = utility_convergence_series(trace)
        worst = max(worst, float(np.max(np.abs(series[10_000 - 1:] - comparator))))
        used += 1
    ok = used > 0 and worst <= 1e-3
    announce(9, ok, f"{used} learned replicas, max |E[U_i] - U*(learned)| over rounds >= 10^4 = {worst:.1e} "
                    f"(<= 1e-3), U* = {comparator:.6f}")


def test_criterion_10_transformed_market_equivalence():
    rng = np.random.default_rng(SEED)
    worst, fails = 0.0, 0
    for i in range(50):
        params = [(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.3, 1.0)), float(rng.uniform(0.0, 0.5)))
                  for _ in range(2)]
        dist = Uniform(0.0, float(rng.uniform(1.0, 2.0))) if rng.random() < 0.7 else PointMass(float(rng.uniform(0.5, 1.5)))
        cost = float(rng.uniform(0.0, 0.2))
        exact = transformed_market_revenue_exact(params, dist, cost)
        mean, se = search_market_revenue(params, dist, cost, 20_000, SEED + i)
        for a, b, s in zip(mean, exact, se):
            z = abs(a - b) / s if s > 0 else (0.0 if a == b else math.inf)
            worst = max(worst, z)
            fails += z > 3
    announce(10, fails == 0, f"50 instances x 2 businesses, max |search - transformed| = {worst:.2f} SE (<= 3)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
