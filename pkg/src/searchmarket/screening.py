"""Sequential screening, search degree and screen transcripts.

A business has ordered screens with conditional pass probabilities.  With
search degree ``k`` the first ``k`` screens are resolved at inspection (their
product is the fit) and the rest after a transaction (their product is the
quality).  A transcript additionally reveals which screen failed first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .belief import BeliefState, posterior_from_counts, screen_counts
from .errors import DegreeOutOfRange, InvalidDistribution
from .model import Atoms, Beta, IndependentPrior, Marginal, PerScreenPrior


def effective_params(screen_probs: Sequence[float], k: int) -> tuple[float, float]:
    """``(fit_prob, quality)`` implied by screens and search degree ``k``."""
    if not 0 <= k <= len(screen_probs):
        raise DegreeOutOfRange(f"degree {k} with {len(screen_probs)} screens")
    return math.prod(screen_probs[:k]), math.prod(screen_probs[k:])


@dataclass(frozen=True)
class InspectionSignal:
    """What one inspection (and any transaction that follows) reveals.

    Screen indices are 1-based.  ``first_fail`` and ``post_first_fail`` are
    only filled in when transcripts are collected.  ``observed`` lists the
    outcomes of every screen that was actually drawn, in order.
    """

    fit: int
    first_fail: int | None = None
    post_first_fail: int | None = None
    quality: int | None = None
    observed: tuple[int, ...] = ()


def screen_draw(
    screen_probs: Sequence[float],
    k: int,
    uniform: Callable[[int], float],
    transcripts: bool = True,
) -> InspectionSignal:
    """Draw screens in order until the first failure.

    ``uniform(ell)`` returns the next uniform for screen ``ell`` (0-based);
    the screen passes iff it falls below the pass probability.  Screens after
    ``k`` are the post-transaction phase and are only drawn when the fit
    group passes.
    """
    if not 0 <= k <= len(screen_probs):
        raise DegreeOutOfRange(f"degree {k} with {len(screen_probs)} screens")
    observed: list[int] = []
    for ell, p in enumerate(screen_probs):
        bit = int(uniform(ell) < p)
        observed.append(bit)
        if not bit:
            break
    n_obs = len(observed)
    failed_at = n_obs if observed and observed[-1] == 0 else None  # 1-based
    fit = int(failed_at is None or failed_at > k)
    quality = int(failed_at is None) if fit else None
    first_fail = failed_at if transcripts and failed_at is not None and failed_at <= k else None
    post_fail = failed_at if transcripts and failed_at is not None and failed_at > k else None
    return InspectionSignal(fit, first_fail, post_fail, quality, tuple(observed))


def group_marginal(screens: Sequence[Marginal]) -> Marginal:
    """Prior of the product of independent screen probabilities.

    One screen keeps its own marginal; several finite-support screens give
    the finite-support distribution of the product; no screens give the
    point mass at 1.
    """
    if not screens:
        return Atoms.point(1.0)
    if len(screens) == 1:
        return screens[0]
    if any(isinstance(m, Beta) for m in screens):
        raise InvalidDistribution("a product of several Beta screens has no conjugate form; use transcripts or finite support")
    acc: dict[float, float] = {}
    for combo in itertools.product(*(zip(m.values, m.weights) for m in screens)):
        v = math.prod(x for x, _ in combo)
        acc[v] = acc.get(v, 0.0) + math.prod(w for _, w in combo)
    vals = sorted(acc)
    total = math.fsum(acc.values())
    return Atoms(tuple(vals), tuple(acc[v] / total for v in vals))


def group_prior(prior: PerScreenPrior, k: int) -> IndependentPrior:
    """Prior over (fit, quality) seen by a market without transcripts."""
    if not 0 <= k <= len(prior.screens):
        raise DegreeOutOfRange(f"degree {k} with {len(prior.screens)} screens")
    return IndependentPrior(group_marginal(prior.screens[:k]), group_marginal(prior.screens[k:]))


def screen_posterior_update(
    prior: PerScreenPrior,
    signals: Sequence[InspectionSignal],
    transcripts: bool,
    k: int,
) -> BeliefState:
    """Posterior after a sequence of inspection signals.

    With transcripts each observed screen gets its own Bernoulli update and
    the implied means are products of per-screen means.  Without, only the
    fit bit and the quality bit are used, on the grouped prior.
    """
    if transcripts:
        counts = screen_counts([s.observed for s in signals], len(prior.screens))
        return posterior_from_counts(prior, screens=counts, degree=k)
    fits = [s.fit for s in signals]
    quals = [s.quality for s in signals if s.fit and s.quality is not None]
    fs = sum(fits)
    qs = sum(quals)
    return posterior_from_counts(group_prior(prior, k), (fs, len(fits) - fs), (qs, len(quals) - qs))
