"""Domain types for sequential consumer-search markets.

Everything here is an immutable value.  ``validate_market`` enforces the
structural assumptions (fit probabilities strictly inside (0, 1), priors that
are probability vectors, screen products that match the stored parameters)
and returns a :class:`ValidatedMarket` handle that the simulation consumes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence, Union

import numpy as np

from .errors import (
    DegreeOutOfRange,
    InconsistentScreens,
    InvalidDistribution,
    InvalidFitProb,
    MarketError,
    NegativeCost,
    WeightSum,
)

WEIGHT_TOL = 1e-12
SCREEN_TOL = 1e-12


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Beta:
    """Beta(a, b) marginal over a probability."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidDistribution(f"Beta parameters must be positive, got ({self.a}, {self.b})")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


@dataclass(frozen=True)
class Atoms:
    """Finite-support marginal over a probability; a point mass is one atom."""

    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.values) != len(self.weights) or not self.values:
            raise InvalidDistribution("Atoms needs equally many (non-zero) values and weights")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise InvalidDistribution(f"support points must lie in [0, 1]: {self.values}")
        _check_weights(self.weights)

    @classmethod
    def point(cls, value: float) -> "Atoms":
        return cls((value,), (1.0,))

    @property
    def mean(self) -> float:
        return float(sum(v * w for v, w in zip(self.values, self.weights)))


Marginal = Union[Beta, Atoms]


@dataclass(frozen=True)
class DiscreteJoint:
    """Finite-support joint prior over (fit_prob, quality).

    Fit and quality may be correlated within a business.
    """

    points: tuple[tuple[float, float], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        pts = tuple((float(f), float(q)) for f, q in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(pts) != len(self.weights) or not pts:
            raise InvalidDistribution("DiscreteJoint needs equally many (non-zero) points and weights")
        for f, q in pts:
            if not 0.0 < f < 1.0:
                raise InvalidFitProb(f"support fit probability {f} outside (0, 1)")
            if not 0.0 <= q <= 1.0:
                raise InvalidDistribution(f"support quality {q} outside [0, 1]")
        _check_weights(self.weights)


@dataclass(frozen=True)
class IndependentPrior:
    """Independent marginals over fit probability and quality."""

    fit: Marginal
    quality: Marginal

    def __post_init__(self):
        if isinstance(self.fit, Atoms) and any(not 0.0 < v < 1.0 for v in self.fit.values):
            raise InvalidFitProb(f"support fit probabilities {self.fit.values} must lie in (0, 1)")


@dataclass(frozen=True)
class PerScreenPrior:
    """Independent marginal per screen pass probability."""

    screens: tuple[Marginal, ...]

    def __post_init__(self):
        object.__setattr__(self, "screens", tuple(self.screens))
        if not self.screens:
            raise InvalidDistribution("PerScreenPrior needs at least one screen")


Prior = Union[DiscreteJoint, IndependentPrior, PerScreenPrior]


def beta_pair(a: float, b: float, a_quality: float, b_quality: float) -> IndependentPrior:
    return IndependentPrior(Beta(a, b), Beta(a_quality, b_quality))


def point_prior(fit_prob: float, quality: float) -> DiscreteJoint:
    return DiscreteJoint(((fit_prob, quality),), (1.0,))


def _check_weights(weights: Sequence[float]) -> None:
    if any(w < 0 or not math.isfinite(w) for w in weights):
        raise WeightSum(f"weights must be nonnegative and finite: {weights}")
    total = math.fsum(weights)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise WeightSum(f"weights sum to {total!r}, not 1")


# ---------------------------------------------------------------------------
# Value distributions
# ---------------------------------------------------------------------------


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class PointMass:
    value: float

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise InvalidDistribution(f"point mass must be a finite nonnegative value, got {self.value}")

    @property
    def v_min(self) -> float:
        return self.value

    @property
    def v_max(self) -> float:
        return self.value

    @property
    def mean(self) -> float:
        return self.value

    def cdf(self, x):
        return _scalar_or_array(x, np.where(np.asarray(x, dtype=float) >= self.value, 1.0, 0.0))

    def cdf_left(self, x):
        """P(V < x)."""
        return _scalar_or_array(x, np.where(np.asarray(x, dtype=float) > self.value, 1.0, 0.0))

    def quantile(self, u):
        return _scalar_or_array(u, np.full(np.shape(u), self.value, dtype=float))

    def knots(self) -> tuple[float, ...]:
        return (self.value,)

    def integrate(self, f: Callable[[float], float], breaks: Sequence[float] = ()) -> float:
        return float(f(self.value))


@dataclass(frozen=True)
class PiecewiseLinearCDF:
    """Continuous CDF, linear between knots ``(x, F(x))``.

    The density is piecewise constant.  Only nondecreasing, strictly positive
    densities are accepted, which is exactly the family of such CDFs that is
    regular (a downward density jump makes the virtual value jump down).
    """

    knots_: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(F)) for x, F in self.knots_)
        object.__setattr__(self, "knots_", pts)
        if len(pts) < 2:
            raise InvalidDistribution("need at least two knots")
        xs = [x for x, _ in pts]
        Fs = [F for _, F in pts]
        if xs[0] < 0:
            raise InvalidDistribution("support must lie in [0, inf)")
        if Fs[0] != 0.0 or Fs[-1] != 1.0:
            raise InvalidDistribution("CDF must start at 0 and end at 1")
        slopes = []
        for (x0, F0), (x1, F1) in zip(pts, pts[1:]):
            if not (x1 > x0 and F1 > F0):
                raise InvalidDistribution("knots must be strictly increasing in x and F")
            slopes.append((F1 - F0) / (x1 - x0))
        if any(s1 < s0 * (1 - 1e-12) for s0, s1 in zip(slopes, slopes[1:])):
            raise InvalidDistribution("density must be nondecreasing for regularity")
        object.__setattr__(self, "_xs", np.array(xs))
        object.__setattr__(self, "_Fs", np.array(Fs))

    @property
    def v_min(self) -> float:
        return self.knots_[0][0]

    @property
    def v_max(self) -> float:
        return self.knots_[-1][0]

    @property
    def mean(self) -> float:
        return math.fsum((F1 - F0) * (x0 + x1) / 2 for (x0, F0), (x1, F1) in zip(self.knots_, self.knots_[1:]))

    def cdf(self, x):
        return _scalar_or_array(x, np.interp(np.asarray(x, dtype=float), self._xs, self._Fs, left=0.0, right=1.0))

    cdf_left = cdf

    def quantile(self, u):
        return _scalar_or_array(u, np.interp(np.asarray(u, dtype=float), self._Fs, self._xs))

    def knots(self) -> tuple[float, ...]:
        return tuple(x for x, _ in self.knots_)

    def integrate(self, f: Callable[[float], float], breaks: Sequence[float] = ()) -> float:
        """E[f(V)], exact when ``f`` is linear between consecutive points of
        knots and ``breaks`` (f may jump at those points)."""
        lo, hi = self.v_min, self.v_max
        pts = sorted({lo, hi, *self.knots(), *(b for b in breaks if lo < b < hi)})
        total = 0.0
        for a, b in zip(pts, pts[1:]):
            mass = self.cdf(b) - self.cdf(a)
            if mass > 0:
                total += mass * f(0.5 * (a + b))
        return total


def Uniform(lo: float, hi: float) -> PiecewiseLinearCDF:
    """Uniform distribution on [lo, hi]."""
    return PiecewiseLinearCDF(((lo, 0.0), (hi, 1.0)))


ValueDist = Union[PointMass, PiecewiseLinearCDF]


def is_uniform(dist: ValueDist) -> bool:
    return isinstance(dist, PiecewiseLinearCDF) and len(dist.knots_) == 2


# ---------------------------------------------------------------------------
# Businesses, pricing modes, market spec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BusinessTruth:
    fit_prob: float
    quality: float
    price: float = 0.0
    screen_probs: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.screen_probs is not None:
            object.__setattr__(self, "screen_probs", tuple(float(p) for p in self.screen_probs))

    @classmethod
    def from_screens(cls, screen_probs: Sequence[float], degree: int, price: float = 0.0) -> "BusinessTruth":
        from .screening import effective_params

        fit, quality = effective_params(screen_probs, degree)
        return cls(fit, quality, price, tuple(screen_probs))


@dataclass(frozen=True)
class Exogenous:
    pass


@dataclass(frozen=True)
class FixedClamped:
    price: float
    margin: float = 1e-6


@dataclass(frozen=True)
class MyopicMonopoly:
    margin: float = 1e-6


PricingRule = Union[FixedClamped, MyopicMonopoly]


@dataclass(frozen=True)
class DemandResponsive:
    rule: PricingRule = field(default_factory=MyopicMonopoly)


@dataclass(frozen=True)
class CanonicalEquilibrium:
    """Learning runs with zero prices (a demand-responsive rule); the price
    profile of interest is the symmetric equilibrium on the learned set."""

    learning_rule: PricingRule = field(default_factory=lambda: FixedClamped(0.0))


PriceMode = Union[Exogenous, DemandResponsive, CanonicalEquilibrium]


@dataclass(frozen=True)
class MarketSpec:
    businesses: tuple[BusinessTruth, ...]
    priors: tuple[Prior, ...]
    value_dist: ValueDist
    search_cost: float
    search_degree: int | None = None
    transcripts: bool = False
    price_mode: PriceMode = field(default_factory=Exogenous)
    horizon: int = 10_000
    tolerance: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "businesses", tuple(self.businesses))
        object.__setattr__(self, "priors", tuple(self.priors))

    @property
    def screening(self) -> bool:
        return self.search_degree is not None

    @property
    def endogenous_prices(self) -> bool:
        return not isinstance(self.price_mode, Exogenous)

    def with_(self, **changes) -> "MarketSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class ValidatedMarket:
    """Handle proving that ``spec`` satisfies every model invariant.

    ``belief_priors`` holds the prior the market actually updates for each
    business: the declared prior outside screening mode, the per-screen prior
    with transcripts, and the induced (fit-group, quality-group) prior
    without them.
    """

    spec: MarketSpec
    belief_priors: tuple[Prior, ...]

    @property
    def n_businesses(self) -> int:
        return len(self.spec.businesses)

    @property
    def v_max(self) -> float:
        return self.spec.value_dist.v_max

    def price_floor(self, j: int) -> float:
        return 0.0 if self.spec.endogenous_prices else self.spec.businesses[j].price


def _support_fit_range(prior: Prior) -> tuple[float, float]:
    if isinstance(prior, DiscreteJoint):
        fits = [f for f, _ in prior.points]
        return min(fits), max(fits)
    if isinstance(prior, IndependentPrior):
        m = prior.fit
        if isinstance(m, Beta):
            return 0.5, 0.5  # open support (0, 1)
        return min(m.values), max(m.values)
    raise TypeError(prior)


def validate_market(spec: MarketSpec) -> ValidatedMarket:
    """Check every invariant of ``spec``; raise a :class:`MarketError` subclass otherwise."""
    from .screening import group_prior

    if not spec.businesses:
        raise MarketError("a market needs at least one business")
    if len(spec.priors) != len(spec.businesses):
        raise MarketError("need exactly one prior per business")
    if not (spec.search_cost >= 0 and math.isfinite(spec.search_cost)):
        raise NegativeCost(f"search cost must be a finite nonnegative number, got {spec.search_cost}")
    if spec.horizon < 1:
        raise MarketError("horizon must be at least 1")
    if not spec.tolerance >= 0:
        raise MarketError("tolerance must be nonnegative")

    for j, b in enumerate(spec.businesses):
        if not 0.0 < b.fit_prob < 1.0:
            raise InvalidFitProb(f"business {j}: fit probability {b.fit_prob} outside (0, 1)")
        if not 0.0 <= b.quality <= 1.0:
            raise MarketError(f"business {j}: quality {b.quality} outside [0, 1]")
        if b.price < 0:
            raise MarketError(f"business {j}: negative price {b.price}")

    belief_priors: list[Prior] = []
    if spec.screening:
        k = spec.search_degree
        for j, (b, prior) in enumerate(zip(spec.businesses, spec.priors)):
            if b.screen_probs is None:
                raise MarketError(f"business {j}: screening mode requires screen_probs")
            if not 0 <= k <= len(b.screen_probs):
                raise DegreeOutOfRange(f"business {j}: degree {k} with {len(b.screen_probs)} screens")
            if any(not 0.0 < p <= 1.0 for p in b.screen_probs):
                raise MarketError(f"business {j}: screen probabilities must lie in (0, 1]")
            fit = math.prod(b.screen_probs[:k])
            quality = math.prod(b.screen_probs[k:])
            if abs(fit - b.fit_prob) > SCREEN_TOL or abs(quality - b.quality) > SCREEN_TOL:
                raise InconsistentScreens(
                    f"business {j}: screens imply (fit, quality)=({fit}, {quality}), "
                    f"stored ({b.fit_prob}, {b.quality})"
                )
            if not isinstance(prior, PerScreenPrior) or len(prior.screens) != len(b.screen_probs):
                raise MarketError(f"business {j}: screening mode needs a PerScreenPrior with one marginal per screen")
            if spec.transcripts:
                belief_priors.append(prior)
            else:
                belief_priors.append(group_prior(prior, k))
        if len({len(b.screen_probs) for b in spec.businesses}) > 1:
            # screens per business may differ; degree must fit each one (checked above)
            pass
    else:
        for j, prior in enumerate(spec.priors):
            if isinstance(prior, PerScreenPrior):
                raise MarketError(f"business {j}: PerScreenPrior needs screening mode (search_degree)")
            belief_priors.append(prior)

    for j, prior in enumerate(belief_priors):
        if isinstance(prior, PerScreenPrior):
            fit_part = prior.screens[: spec.search_degree]
            if not fit_part:
                raise InvalidFitProb(f"business {j}: degree 0 makes the fit probability identically 1")
            lo = math.prod(_marginal_range(m)[0] for m in fit_part)
            hi = math.prod(_marginal_range(m)[1] for m in fit_part)
        else:
            lo, hi = _support_fit_range(prior)
        if not (0.0 < lo and hi < 1.0):
            raise InvalidFitProb(f"business {j}: prior puts mass on fit probability outside (0, 1)")

    return ValidatedMarket(spec, tuple(belief_priors))


def _marginal_range(m: Marginal) -> tuple[float, float]:
    if isinstance(m, Beta):
        return 0.5, 0.5
    return min(m.values), max(m.values)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _marginal_to_dict(m: Marginal) -> dict[str, Any]:
    if isinstance(m, Beta):
        return {"type": "beta", "a": m.a, "b": m.b}
    return {"type": "atoms", "values": list(m.values), "weights": list(m.weights)}


def _marginal_from_dict(d: dict[str, Any]) -> Marginal:
    kind = d["type"]
    if kind == "beta":
        return Beta(float(d["a"]), float(d["b"]))
    if kind == "atoms":
        return Atoms(tuple(d["values"]), tuple(d["weights"]))
    if kind == "point":
        return Atoms.point(float(d["value"]))
    raise MarketError(f"unknown marginal type {kind!r}")


def prior_to_dict(prior: Prior) -> dict[str, Any]:
    if isinstance(prior, DiscreteJoint):
        return {
            "type": "discrete_joint",
            "support": [[f, q, w] for (f, q), w in zip(prior.points, prior.weights)],
        }
    if isinstance(prior, IndependentPrior):
        return {"type": "independent", "fit": _marginal_to_dict(prior.fit), "quality": _marginal_to_dict(prior.quality)}
    return {"type": "per_screen", "screens": [_marginal_to_dict(m) for m in prior.screens]}


def prior_from_dict(d: dict[str, Any]) -> Prior:
    kind = d["type"]
    if kind == "discrete_joint":
        support = d["support"]
        return DiscreteJoint(tuple((s[0], s[1]) for s in support), tuple(s[2] for s in support))
    if kind == "independent":
        return IndependentPrior(_marginal_from_dict(d["fit"]), _marginal_from_dict(d["quality"]))
    if kind == "beta_pair":
        return beta_pair(d["a"], d["b"], d["a_quality"], d["b_quality"])
    if kind == "per_screen":
        return PerScreenPrior(tuple(_marginal_from_dict(m) for m in d["screens"]))
    raise MarketError(f"unknown prior type {kind!r}")


def value_dist_to_dict(dist: ValueDist) -> dict[str, Any]:
    if isinstance(dist, PointMass):
        return {"type": "point_mass", "value": dist.value}
    if is_uniform(dist):
        return {"type": "uniform", "lo": dist.v_min, "hi": dist.v_max}
    return {"type": "piecewise_linear", "knots": [list(k) for k in dist.knots_]}


def value_dist_from_dict(d: dict[str, Any]) -> ValueDist:
    kind = d["type"]
    if kind == "point_mass":
        return PointMass(float(d["value"]))
    if kind == "uniform":
        return Uniform(float(d["lo"]), float(d["hi"]))
    if kind == "piecewise_linear":
        return PiecewiseLinearCDF(tuple((k[0], k[1]) for k in d["knots"]))
    raise MarketError(f"unknown value distribution type {kind!r}")


def _rule_to_dict(rule: PricingRule) -> dict[str, Any]:
    if isinstance(rule, FixedClamped):
        return {"type": "fixed_clamped", "price": rule.price, "margin": rule.margin}
    return {"type": "myopic_monopoly", "margin": rule.margin}


def _rule_from_dict(d: dict[str, Any]) -> PricingRule:
    if d["type"] == "fixed_clamped":
        return FixedClamped(float(d["price"]), float(d.get("margin", 1e-6)))
    if d["type"] == "myopic_monopoly":
        return MyopicMonopoly(float(d.get("margin", 1e-6)))
    raise MarketError(f"unknown pricing rule {d['type']!r}")


def price_mode_to_dict(mode: PriceMode) -> dict[str, Any]:
    if isinstance(mode, Exogenous):
        return {"type": "exogenous"}
    if isinstance(mode, DemandResponsive):
        return {"type": "demand_responsive", "rule": _rule_to_dict(mode.rule)}
    return {"type": "canonical_equilibrium", "learning_rule": _rule_to_dict(mode.learning_rule)}


def price_mode_from_dict(d: dict[str, Any]) -> PriceMode:
    kind = d["type"]
    if kind == "exogenous":
        return Exogenous()
    if kind == "demand_responsive":
        return DemandResponsive(_rule_from_dict(d.get("rule", {"type": "myopic_monopoly"})))
    if kind == "canonical_equilibrium":
        if "learning_rule" in d:
            return CanonicalEquilibrium(_rule_from_dict(d["learning_rule"]))
        return CanonicalEquilibrium()
    raise MarketError(f"unknown price mode {kind!r}")


def spec_to_dict(spec: MarketSpec) -> dict[str, Any]:
    out: dict[str, Any] = {
        "businesses": [{"fit_prob": b.fit_prob, "quality": b.quality, "price": b.price} for b in spec.businesses],
        "priors": [prior_to_dict(p) for p in spec.priors],
        "value_dist": value_dist_to_dict(spec.value_dist),
        "search_cost": spec.search_cost,
        "price_mode": price_mode_to_dict(spec.price_mode),
        "horizon": spec.horizon,
        "tolerance": spec.tolerance,
    }
    if spec.screening:
        out["screens"] = [list(b.screen_probs) for b in spec.businesses]
        out["degree"] = spec.search_degree
        out["transcripts"] = spec.transcripts
    return out


def spec_from_dict(d: dict[str, Any]) -> MarketSpec:
    """Build a :class:`MarketSpec` from its JSON form.

    In screening mode ``businesses[j].fit_prob``/``quality`` may be omitted;
    they are then derived from ``screens`` and ``degree``.
    """
    try:
        degree = d.get("degree", d.get("search_degree"))
        screens = d.get("screens")
        rows = d["businesses"]
        if screens is not None and len(screens) != len(rows):
            raise MarketError("need one screen list per business")
        businesses = []
        for j, row in enumerate(rows):
            price = float(row.get("price", 0.0))
            if screens is not None:
                if degree is None:
                    raise MarketError("'screens' requires 'degree'")
                sp = tuple(float(p) for p in screens[j])
                if "fit_prob" in row:
                    businesses.append(BusinessTruth(float(row["fit_prob"]), float(row["quality"]), price, sp))
                else:
                    businesses.append(BusinessTruth.from_screens(sp, int(degree), price))
            else:
                businesses.append(BusinessTruth(float(row["fit_prob"]), float(row["quality"]), price))
        priors = tuple(prior_from_dict(p) for p in d["priors"])
        return MarketSpec(
            businesses=tuple(businesses),
            priors=priors,
            value_dist=value_dist_from_dict(d["value_dist"]),
            search_cost=float(d["search_cost"]),
            search_degree=None if degree is None else int(degree),
            transcripts=bool(d.get("transcripts", False)),
            price_mode=price_mode_from_dict(d.get("price_mode", {"type": "exogenous"})),
            horizon=int(d.get("horizon", 10_000)),
            tolerance=float(d.get("tolerance", 1e-9)),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise MarketError(f"malformed market spec: {exc!r}") from exc


def load_spec(path: str | Path) -> MarketSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))


def dump_spec(spec: MarketSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
        fh.write("\n")
