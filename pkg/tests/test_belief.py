import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searchmarket.belief import (
    HistoryProjection,
    posterior_from_counts,
    posterior_means,
    posterior_update,
    prior_belief,
    project_history,
)
from searchmarket.constructions import inform_bad_direct
from searchmarket.dynamics import run_market
from searchmarket.errors import MarketError, UnknownBusiness
from searchmarket.model import Atoms, Beta, DiscreteJoint, IndependentPrior, PerScreenPrior, validate_market
from searchmarket.rng import RandomnessBundle

EPS = 0.01


def test_beta_one_failure():
    prior = IndependentPrior(Beta(1.0, 1.0), Atoms.point(1.0))
    b = posterior_update(prior, HistoryProjection(fit_obs=(0,)))
    assert b.posterior.fit == Beta(1.0, 2.0)
    assert b.post_fit == pytest.approx(1 / 3)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_two_point_one_failure(eps):
    prior = DiscreteJoint(((eps / 2, 1.0), ((1 - eps) / 2, 1.0)), (0.5, 0.5))
    b = posterior_update(prior, HistoryProjection(fit_obs=(0,)))
    w = b.posterior.weights
    lo, hi = 1 - eps / 2, (1 + eps) / 2
    assert w == pytest.approx((lo / (lo + hi), hi / (lo + hi)), abs=1e-14)
    assert abs(b.post_fit - 1 / 6) <= 2 * eps


def test_empty_projection_is_prior():
    prior = DiscreteJoint(((0.2, 0.4), (0.7, 0.9)), (0.3, 0.7))
    b = posterior_update(prior, HistoryProjection())
    assert b.posterior == prior
    assert posterior_means(b) == pytest.approx((0.2 * 0.3 + 0.7 * 0.7, 0.4 * 0.3 + 0.9 * 0.7))


def test_prior_means():
    two = IndependentPrior(Atoms((EPS, 1 - EPS), (0.5, 0.5)), Atoms.point(0.5))
    assert posterior_means(prior_belief(two)) == pytest.approx((0.5, 0.5))
    pt = DiscreteJoint(((0.3, 0.8),), (1.0,))
    assert posterior_means(prior_belief(pt)) == pytest.approx((0.3, 0.8))
    assert prior_belief(IndependentPrior(Beta(1, 1), Beta(1, 1))).post_fit == 0.5


def test_quality_updates_correlated_joint():
    prior = DiscreteJoint(((0.3, 0.9), (0.7, 0.2)), (0.5, 0.5))
    b = posterior_update(prior, HistoryProjection(fit_obs=(1,), quality_obs=(1,)))
    l0, l1 = 0.3 * 0.9, 0.7 * 0.2
    assert b.posterior.weights == pytest.approx((l0 / (l0 + l1), l1 / (l0 + l1)))


def test_more_quality_than_fits_rejected():
    with pytest.raises(MarketError):
        HistoryProjection(fit_obs=(0,), quality_obs=(1,))


priors = st.sampled_from(
    [
        IndependentPrior(Beta(1.0, 1.0), Beta(2.0, 1.0)),
        IndependentPrior(Beta(0.7, 3.0), Atoms((0.2, 0.9), (0.4, 0.6))),
        IndependentPrior(Atoms((0.1, 0.5, 0.8), (0.2, 0.3, 0.5)), Atoms.point(0.6)),
        DiscreteJoint(((0.2, 0.3), (0.6, 0.9), (0.9, 0.5)), (0.2, 0.5, 0.3)),
    ]
)
bits = st.lists(st.integers(0, 1), max_size=30)


def _qual_obs(fits, draw_bits):
    return tuple(draw_bits[: sum(fits)])


@settings(max_examples=100, deadline=None)
@given(priors, bits, bits, st.randoms(use_true_random=False))
def test_exchangeable(prior, fits, qbits, rnd):
    q = _qual_obs(fits, qbits)
    a = posterior_update(prior, HistoryProjection(tuple(fits), q))
    perm = list(fits)
    rnd.shuffle(perm)
    b = posterior_update(prior, HistoryProjection(tuple(perm), tuple(reversed(q))))
    assert a.post_fit == pytest.approx(b.post_fit, abs=1e-12)
    assert a.post_quality == pytest.approx(b.post_quality, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(priors, bits, bits)
def test_one_step_martingale(prior, fits, qbits):
    q = _qual_obs(fits, qbits)
    s, f = sum(fits), len(fits) - sum(fits)
    qs, qf = sum(q), len(q) - sum(q)
    now = posterior_from_counts(prior, (s, f), (qs, qf))
    up = posterior_from_counts(prior, (s + 1, f), (qs, qf))
    down = posterior_from_counts(prior, (s, f + 1), (qs, qf))
    assert abs(now.post_fit * up.post_fit + (1 - now.post_fit) * down.post_fit - now.post_fit) <= 1e-12
    qup = posterior_from_counts(prior, (s, f), (qs + 1, qf))
    qdown = posterior_from_counts(prior, (s, f), (qs, qf + 1))
    pq = now.post_quality
    assert abs(pq * qup.post_quality + (1 - pq) * qdown.post_quality - pq) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(priors, st.integers(0, 500), st.integers(0, 500))
def test_weights_stay_a_distribution(prior, s, f):
    b = posterior_from_counts(prior, (s, f), (0, 0))
    post = b.posterior
    ws = post.weights if isinstance(post, DiscreteJoint) else getattr(post.fit, "weights", (1.0,))
    assert min(ws) >= 0
    assert abs(sum(ws) - 1) <= 1e-12


def test_per_screen_martingale():
    prior = PerScreenPrior((Beta(2.0, 1.0), Atoms((0.3, 0.9), (0.5, 0.5)), Beta(1.0, 1.0)))
    counts = ((3, 1), (2, 1), (1, 0))
    for ell in range(3):
        now = posterior_from_counts(prior, screens=counts, degree=2)
        m = now.posterior.screens[ell].mean
        up = list(counts)
        down = list(counts)
        up[ell] = (counts[ell][0] + 1, counts[ell][1])
        down[ell] = (counts[ell][0], counts[ell][1] + 1)
        a = posterior_from_counts(prior, screens=tuple(up), degree=2).posterior.screens[ell].mean
        b = posterior_from_counts(prior, screens=tuple(down), degree=2).posterior.screens[ell].mean
        assert abs(m * a + (1 - m) * b - m) <= 1e-12


def test_consistency_small():
    rng = np.random.default_rng(5)
    prior = IndependentPrior(Beta(1.0, 1.0), Atoms.point(1.0))
    n, ok = 10_000, 0
    for _ in range(40):
        pi = float(rng.uniform(0.05, 0.95))
        s = int((rng.random(n) < pi).sum())
        b = posterior_from_counts(prior, (s, n - s))
        ok += abs(b.post_fit - pi) < 5 * np.sqrt(pi * (1 - pi) / n)
    assert ok >= 38


def test_project_history():
    base, _ = inform_bad_direct(horizon=50)
    vm = validate_market(base)
    trace = run_market(vm, RandomnessBundle(3), 50)
    proj = project_history(trace, 0)
    assert proj == trace.projections[0]
    fits = tuple(i.fit for r in trace.rounds for i in r.inspections)
    assert proj.fit_obs == fits
    assert len(proj.quality_obs) == sum(fits)
    with pytest.raises(UnknownBusiness):
        project_history(trace, 1)


def test_project_history_hand_built():
    from types import SimpleNamespace

    from searchmarket.dynamics import Inspection

    rounds = [
        SimpleNamespace(inspections=(Inspection(0, 1),), transaction=0, quality=1),
        SimpleNamespace(inspections=(Inspection(1, 1),), transaction=1, quality=0),
        SimpleNamespace(inspections=(Inspection(0, 0), Inspection(1, 0)), transaction=None, quality=None),
    ]
    trace = SimpleNamespace(n_businesses=2, transcripts=False, rounds=rounds)
    assert project_history(trace, 0) == HistoryProjection((1, 0), (1,))
    empty = SimpleNamespace(n_businesses=2, transcripts=False, rounds=[])
    assert project_history(empty, 1) == HistoryProjection()


def test_projection_json_round_trip():
    proj = HistoryProjection((1, 0, 1), (1, 0), ((1, 1), (0,), (1, 1, 0)))
    assert HistoryProjection.from_dict(json.loads(json.dumps(proj.to_dict()))) == proj
    plain = HistoryProjection((0, 1), (1,))
    assert HistoryProjection.from_dict(plain.to_dict()) == plain
