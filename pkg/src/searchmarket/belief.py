"""History projections and exact Bayesian updating.

A business's posterior depends on the history only through its own
projection, and for Bernoulli observations only through success/failure
counts.  Posteriors are therefore always rebuilt from counts, which keeps
coupled replays bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import xlog1py, xlogy

from .errors import MarketError, UnknownBusiness
from .model import Atoms, Beta, DiscreteJoint, IndependentPrior, Marginal, PerScreenPrior, Prior


@dataclass(frozen=True)
class HistoryProjection:
    """Ordered observation log of one business.

    ``screen_obs`` holds, per inspection, the screen outcomes the market saw
    (screens in order, stopping at the first failure).  It is ``None`` when
    screen transcripts are not collected.
    """

    fit_obs: tuple[int, ...] = ()
    quality_obs: tuple[int, ...] = ()
    screen_obs: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if len(self.quality_obs) > sum(self.fit_obs):
            raise MarketError("more quality observations than successful inspections")

    @property
    def fit_counts(self) -> tuple[int, int]:
        s = sum(self.fit_obs)
        return s, len(self.fit_obs) - s

    @property
    def quality_counts(self) -> tuple[int, int]:
        s = sum(self.quality_obs)
        return s, len(self.quality_obs) - s

    def screen_counts(self, n_screens: int) -> tuple[tuple[int, int], ...]:
        return screen_counts(self.screen_obs or (), n_screens)

    def to_dict(self) -> dict:
        out = {"fit_obs": list(self.fit_obs), "quality_obs": list(self.quality_obs)}
        if self.screen_obs is not None:
            out["screen_obs"] = [list(r) for r in self.screen_obs]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "HistoryProjection":
        screens = d.get("screen_obs")
        return cls(
            tuple(d.get("fit_obs", ())),
            tuple(d.get("quality_obs", ())),
            None if screens is None else tuple(tuple(r) for r in screens),
        )


def screen_counts(records: Sequence[Sequence[int]], n_screens: int) -> tuple[tuple[int, int], ...]:
    succ = [0] * n_screens
    fail = [0] * n_screens
    for rec in records:
        for ell, bit in enumerate(rec):
            if bit:
                succ[ell] += 1
            else:
                fail[ell] += 1
    return tuple(zip(succ, fail))


@dataclass(frozen=True)
class BeliefState:
    """Posterior of one business together with its cached means."""

    posterior: Prior
    post_fit: float
    post_quality: float
    degree: int | None = None


# ---------------------------------------------------------------------------
# Conjugate / discrete updates
# ---------------------------------------------------------------------------


def _reweight(log_w0: np.ndarray, loglik: np.ndarray) -> tuple[float, ...]:
    logw = log_w0 + loglik
    top = np.max(logw)
    if not np.isfinite(top):
        raise MarketError("observations have zero likelihood under the prior")
    w = np.exp(logw - top)
    w /= w.sum()
    return tuple(w.tolist())


def _bernoulli_loglik(p: np.ndarray, s: int, f: int) -> np.ndarray:
    return xlogy(s, p) + xlog1py(f, -p)


def _trusted(cls, **fields):
    """Build a frozen value without re-running input validation."""
    obj = object.__new__(cls)
    for k, v in fields.items():
        object.__setattr__(obj, k, v)
    return obj


@lru_cache(maxsize=1 << 18)
def update_marginal(m: Marginal, s: int, f: int) -> Marginal:
    if s == 0 and f == 0:
        return m
    if isinstance(m, Beta):
        return _trusted(Beta, a=m.a + s, b=m.b + f)
    if len(m.values) == 1:
        return m
    vals = np.array(m.values)
    with np.errstate(divide="ignore"):
        w = _reweight(np.log(np.array(m.weights)), _bernoulli_loglik(vals, s, f))
    return _trusted(Atoms, values=m.values, weights=w)


@lru_cache(maxsize=1 << 18)
def update_joint(prior: DiscreteJoint, fit: tuple[int, int], quality: tuple[int, int]) -> DiscreteJoint:
    if fit == (0, 0) and quality == (0, 0):
        return prior
    pts = np.array(prior.points)
    ll = _bernoulli_loglik(pts[:, 0], *fit) + _bernoulli_loglik(pts[:, 1], *quality)
    with np.errstate(divide="ignore"):
        w = _reweight(np.log(np.array(prior.weights)), ll)
    return _trusted(DiscreteJoint, points=prior.points, weights=w)


@lru_cache(maxsize=1 << 18)
def _joint_belief(prior: DiscreteJoint, fit, quality) -> BeliefState:
    post = update_joint(prior, fit, quality)
    w = np.array(post.weights)
    pts = np.array(post.points)
    return BeliefState(post, float(w @ pts[:, 0]), float(w @ pts[:, 1]))


def posterior_from_counts(
    prior: Prior,
    fit: tuple[int, int] = (0, 0),
    quality: tuple[int, int] = (0, 0),
    screens: tuple[tuple[int, int], ...] | None = None,
    degree: int | None = None,
) -> BeliefState:
    """Exact posterior given sufficient-statistic counts."""
    if isinstance(prior, DiscreteJoint):
        # a coordinate that is constant over the support carries no information
        if len({q for _, q in prior.points}) == 1:
            quality = (0, 0)
        if len({f for f, _ in prior.points}) == 1:
            fit = (0, 0)
        return _joint_belief(prior, tuple(fit), tuple(quality))
    if isinstance(prior, IndependentPrior):
        return _independent_belief(prior, tuple(fit), tuple(quality))
    if isinstance(prior, PerScreenPrior):
        if degree is None:
            raise MarketError("a per-screen prior needs the search degree")
        counts = screens if screens is not None else ((0, 0),) * len(prior.screens)
        return _screen_belief(prior, tuple(map(tuple, counts)), degree)
    raise TypeError(f"unsupported prior {prior!r}")


@lru_cache(maxsize=1 << 18)
def _independent_belief(prior: IndependentPrior, fit, quality) -> BeliefState:
    pf = update_marginal(prior.fit, *fit)
    pq = update_marginal(prior.quality, *quality)
    return BeliefState(_trusted(IndependentPrior, fit=pf, quality=pq), pf.mean, pq.mean)


@lru_cache(maxsize=1 << 18)
def _screen_belief(prior: PerScreenPrior, counts, degree: int) -> BeliefState:
    post = tuple(update_marginal(m, s, f) for m, (s, f) in zip(prior.screens, counts))
    means = [m.mean for m in post]
    return BeliefState(
        _trusted(PerScreenPrior, screens=post), math.prod(means[:degree]), math.prod(means[degree:]), degree
    )


def posterior_update(prior: Prior, proj: HistoryProjection, degree: int | None = None) -> BeliefState:
    """Posterior of one business after observing its projection.

    For a :class:`PerScreenPrior` the screen transcript drives the update and
    ``degree`` splits the screens into the fit and quality groups.
    """
    if isinstance(prior, PerScreenPrior):
        return posterior_from_counts(
            prior, screens=proj.screen_counts(len(prior.screens)), degree=degree
        )
    return posterior_from_counts(prior, proj.fit_counts, proj.quality_counts)


def posterior_means(belief: BeliefState) -> tuple[float, float]:
    return belief.post_fit, belief.post_quality


def prior_belief(prior: Prior, degree: int | None = None) -> BeliefState:
    return posterior_from_counts(prior, degree=degree)


def predictive_fit(belief: BeliefState) -> float:
    """Probability that the next inspection reveals a fit."""
    return belief.post_fit


def project_history(trace, j: int) -> HistoryProjection:
    """Business ``j``'s observations from a recorded trace, in order.

    Prices are not part of the projection.
    """
    m = trace.n_businesses
    if not 0 <= j < m:
        raise UnknownBusiness(f"business {j} not in a market of {m}")
    fits: list[int] = []
    quals: list[int] = []
    screens: list[tuple[int, ...]] | None = [] if trace.transcripts else None
    for rec in trace.rounds:
        for insp in rec.inspections:
            if insp.business != j:
                continue
            fits.append(insp.fit)
            if screens is not None:
                screens.append(insp.screens)
        if rec.transaction == j:
            quals.append(rec.quality)
    return HistoryProjection(tuple(fits), tuple(quals), None if screens is None else tuple(screens))
