"""Named reproductions of the worked constructions, each with pass/fail checks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import plotting
from .constructions import (
    inform_bad_markets,
    inform_pricing_markets,
    random_market,
    random_screening_market,
    revenue_example_markets,
)
from .dynamics import estimate_lost_probability, replica_bundle, run_coupled, run_market, utility_convergence_series
from .errors import UnknownReproduction
from .model import validate_market
from .pricing import canonical_equilibrium, welfare
from .search import brute_force_policy_value, exact_policy_utility


@dataclass
class Check:
    name: str
    value: float
    target: str
    passed: bool
    detail: str = ""


@dataclass
class Report:
    name: str
    params: dict[str, Any]
    checks: list[Check] = field(default_factory=list)
    data: dict[str, Any] = field(default_factory=dict)
    figures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, target: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, float(value), target, bool(passed), detail))

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "params": self.params,
            "checks": [asdict(c) for c in self.checks],
            "data": self.data,
            "figures": self.figures,
        }


def _figure(report: Report, out_dir: Path | None, fname: str, draw: Callable[[Path], Any]) -> None:
    if out_dir is None:
        return
    path = Path(out_dir) / fname
    draw(path)
    report.figures.append(fname)


# ---------------------------------------------------------------------------


def weitzman_oracle(seed: int = 0, instances: int = 200, out_dir: Path | None = None, **_) -> Report:
    """Index policy vs the dynamic-programming optimum on random known-parameter instances."""
    rep = Report("weitzman-oracle", {"seed": seed, "instances": instances})
    rng = np.random.default_rng(seed)
    policy, optimum = [], []
    for _ in range(instances):
        m = int(rng.integers(1, 4))
        params = [
            (float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 0.5)))
            for _ in range(m)
        ]
        value = float(rng.uniform(0.5, 2.0))
        cost = float(rng.uniform(0.0, 0.3))
        policy.append(exact_policy_utility(value, params, cost))
        optimum.append(brute_force_policy_value(value, params, cost))
    gaps = np.abs(np.array(policy) - np.array(optimum))
    matches = int(np.sum(gaps <= 1e-9))
    rep.add("oracle_matches", matches, f"== {instances}", matches == instances)
    rep.add("max_abs_gap", float(gaps.max()), "<= 1e-9", gaps.max() <= 1e-9)
    rep.data["policy"] = policy
    rep.data["optimum"] = optimum
    _figure(rep, out_dir, "weitzman_oracle.png", lambda p: plotting.plot_oracle_agreement(policy, optimum, p))
    return rep


def inform_bad(
    seed: int = 0,
    replicas: int = 10_000,
    horizon: int = 200,
    eps: float = 0.01,
    cost: float = 0.2,
    out_dir: Path | None = None,
    utility_horizon: int = 12_000,
    utility_replicas: int = 5,
    **_,
) -> Report:
    """Lost probabilities of the single-business pair where more informative search hurts."""
    rep = Report(
        "inform-bad",
        {"seed": seed, "replicas": replicas, "horizon": horizon, "eps": eps, "cost": cost},
    )
    base, informative = inform_bad_markets(eps, cost)
    w_base, se_base = estimate_lost_probability(base, 0, replicas, horizon, seed)
    w_inf, se_inf = estimate_lost_probability(informative, 0, replicas, horizon, seed)
    rep.data.update(
        lost_base=w_base, lost_base_se=se_base, lost_informative=w_inf, lost_informative_se=se_inf,
        lost_base_ci=[w_base - 1.96 * se_base, w_base + 1.96 * se_base],
        lost_informative_ci=[w_inf - 1.96 * se_inf, w_inf + 1.96 * se_inf],
    )
    rep.add("p_lost_informative", w_inf, ">= 0.45", w_inf >= 0.45)
    rep.add("p_lost_base", w_base, "<= 0.03", w_base <= 0.03)

    # expected utility converges to U*(learned set) on learned replicas
    vm = validate_market(base)
    worst, used, comparator = 0.0, 0, float("nan")
    i = 0
    while used < utility_replicas and i < 10 * utility_replicas:
        trace = run_market(vm, replica_bundle(seed + 1, i), utility_horizon)
        i += 1
        if not trace.learned_flags[0]:
            continue
        series, comparator = utility_convergence_series(trace)
        tail = series[10_000 - 1 :] if len(series) >= 10_000 else series[-1:]
        worst = max(worst, float(np.max(np.abs(tail - comparator))))
        used += 1
        if used == 1:
            _figure(rep, out_dir, "utility_series.png", lambda p: plotting.plot_utility_series(series, comparator, p))
    rep.data.update(utility_comparator=comparator, utility_replicas=used)
    rep.add("utility_tail_gap", worst, "<= 1e-3", used > 0 and worst <= 1e-3)
    _figure(
        rep,
        out_dir,
        "inform_bad_lost.png",
        lambda p: plotting.plot_lost_probabilities(
            ["baseline", "more informative"], [w_base, w_inf], [se_base, se_inf], [("<=", 0.03), (">=", 0.45)], p
        ),
    )
    return rep


def _containment(name: str, make_pair, seed: int, pairs: int, replicas: int, horizon: int, out_dir) -> Report:
    rep = Report(name, {"seed": seed, "pairs": pairs, "replicas": replicas, "horizon": horizon})
    rng = np.random.default_rng(seed)
    total = contained = differ = 0
    sizes_a, sizes_b = [], []
    rows = []
    for pair in range(pairs):
        spec_a, spec_b = make_pair(rng, horizon)
        per = replicas // pairs + (1 if pair < replicas % pairs else 0)
        for r in range(per):
            a, b = run_coupled(spec_a, spec_b, (seed, pair, r), horizon, settle=True)
            ok = b.learned_set >= a.learned_set
            total += 1
            contained += ok
            differ += b.learned_set != a.learned_set
            sizes_a.append(len(a.learned_set))
            sizes_b.append(len(b.learned_set))
            rows.append((pair, r, sorted(a.learned_set), sorted(b.learned_set), ok))
    frac = contained / total if total else 1.0
    rep.data.update(replicas_run=total, contained=contained, strictly_larger=differ, rows=rows)
    rep.add("containment_fraction", frac, "== 1", contained == total)
    _figure(
        rep, out_dir, f"{name}_learned.png",
        lambda p: plotting.plot_learned_counts(sizes_a, sizes_b, ("baseline", "improved"), p),
    )
    return rep


def cheaper_search(seed: int = 0, replicas: int = 1000, pairs: int = 20, horizon: int = 400, out_dir=None, **_) -> Report:
    """Coupled markets differing only in search cost: the cheaper one learns a superset."""

    def make(rng, h):
        spec = random_market(rng, horizon=h)
        return spec, spec.with_(search_cost=spec.search_cost * float(rng.uniform(0.1, 0.9)))

    return _containment("cheaper-search", make, seed, pairs, replicas, horizon, out_dir)


def transcripts(seed: int = 0, replicas: int = 1000, pairs: int = 20, horizon: int = 400, out_dir=None, **_) -> Report:
    """Coupled transcribed screening markets: higher search degree learns a superset."""
    return _containment(
        "transcripts", lambda rng, h: random_screening_market(rng, horizon=h), seed, pairs, replicas, horizon, out_dir
    )


def inform_pricing(
    seed: int = 0, eps: float = 0.01, samples: int = 400_000, horizon: int = 200, out_dir=None, **_
) -> Report:
    """Canonical welfare of the free-search pair where informativeness lowers consumer surplus."""
    rep = Report("inform-pricing", {"seed": seed, "eps": eps, "samples": samples, "horizon": horizon})
    base, informative = inform_pricing_markets(eps, horizon)
    targets = {"base": 0.5 * (1 - eps**2) - eps * (1 - eps), "informative": 1 - ((1 + eps) / 2) ** 2 - (1 - eps**2) / 2}
    profiles = {}
    for label, spec in (("base", base), ("informative", informative)):
        vm = validate_market(spec)
        trace = run_market(vm, replica_bundle(seed, 0), horizon, record=False)
        prof = canonical_equilibrium(vm, trace)
        profiles[label] = prof
        ex = welfare(prof, "exact")
        mc = welfare(prof, "monte_carlo", samples=samples, seed=seed)
        rep.data[label] = {
            "learned": len(trace.learned_set),
            "floor_price": prof.floor_price,
            "top_price": prof.top_price,
            "per_business_revenue": prof.per_business_revenue,
            "cs": ex.consumer_surplus, "revenue": ex.revenue, "tw": ex.total_welfare,
            "cs_mc": mc.consumer_surplus, "cs_mc_se": mc.se,
        }
        rep.add(f"cs_{label}", ex.consumer_surplus, f"{targets[label]:.6f} +- 1e-6",
                abs(ex.consumer_surplus - targets[label]) <= 1e-6)
        rep.add(f"cs_{label}_monte_carlo_z", abs(mc.consumer_surplus - ex.consumer_surplus) / mc.se, "<= 3",
                abs(mc.consumer_surplus - ex.consumer_surplus) <= 3 * mc.se)
    cs_b, cs_i = rep.data["base"]["cs"], rep.data["informative"]["cs"]
    rep.add("cs_base_minus_informative", cs_b - cs_i, "> 0", cs_b > cs_i)
    _figure(rep, out_dir, "inform_pricing_cdf.png", lambda p: plotting.plot_price_cdfs(profiles, p))
    return rep


def _revenue_formula(factor: float, rho: float, pi: float, n: int) -> float:
    return factor * rho * pi * (1 - rho * pi) ** (n - 1)


def _revenue_formula_slope(factor: float, rho: float, pi: float, n: int) -> float:
    return factor * pi * (1 - rho * pi) ** (n - 2) * (1 - n * rho * pi)


def revenue_example(
    seed: int = 0,
    n: int = 8,
    replicas: int = 400,
    rho_replicas: int = 4000,
    horizon: int = 400,
    cost: float = 1 / 3,
    n_large: int = 20,
    out_dir=None,
    **_,
) -> Report:
    """Per-business canonical revenue with costly vs free search."""
    rep = Report(
        "revenue-example",
        {"seed": seed, "n": n, "replicas": replicas, "rho_replicas": rho_replicas, "horizon": horizon, "cost": cost},
    )
    pi = 0.5
    costly, free = revenue_example_markets(n, cost, horizon)

    vm_free = validate_market(free)
    tr = run_market(vm_free, replica_bundle(seed, 0), horizon, record=False)
    rev_free = canonical_equilibrium(vm_free, tr).per_business_revenue
    rep.add("rev_free_minus_2^-n", abs(rev_free - 2.0**-n), "<= 1e-12", abs(rev_free - 2.0**-n) <= 1e-12)

    single, _ = revenue_example_markets(1, cost, horizon)
    lost, lost_se = estimate_lost_probability(single, 0, rho_replicas, horizon, seed + 1, settle=True)
    rho, rho_se = 1 - lost, lost_se

    vm = validate_market(costly)
    revs, sizes = [], []
    p_star = None
    for i in range(replicas):
        trace = run_market(vm, replica_bundle(seed + 2, i), horizon, record=False, settle=True)
        prof = canonical_equilibrium(vm, trace)
        if prof.n and p_star is None:
            p_star = prof.top_price
        sizes.append(prof.n)
        revs.append(prof.n / n * prof.per_business_revenue)
    revs = np.array(revs)
    sim, sim_se = float(revs.mean()), float(revs.std(ddof=1) / math.sqrt(replicas))
    if p_star is None:
        p_star = 1.0 - cost / pi
    rep.data.update(rho=rho, rho_se=rho_se, rev_costly_sim=sim, rev_costly_se=sim_se, rev_free=rev_free,
                    monopoly_price=p_star, learned_sizes=sizes)

    for label, factor in (("stated_factor_2/3", 2 / 3), ("monopoly_price_factor", p_star)):
        pred = _revenue_formula(factor, rho, pi, n)
        se = math.hypot(sim_se, _revenue_formula_slope(factor, rho, pi, n) * rho_se)
        z = abs(sim - pred) / se
        rep.data[f"prediction_{label}"] = pred
        rep.add(f"rev_costly_vs_{label}_z", z, "<= 3", z <= 3, f"simulated {sim:.6g} vs predicted {pred:.6g}")

    ratio_stated = _revenue_formula(2 / 3, rho, pi, n_large) / 2.0**-n_large
    ratio_price = _revenue_formula(p_star, rho, pi, n_large) / 2.0**-n_large
    rep.data.update(ratio_stated_n_large=ratio_stated, ratio_price_n_large=ratio_price, n_large=n_large)
    rep.add(f"rev_ratio_costly_over_free_n{n_large}", ratio_price, "> 1", ratio_price > 1)

    ns = list(range(1, n_large + 1))
    _figure(
        rep, out_dir, "revenue_vs_n.png",
        lambda p: plotting.plot_revenue_vs_n(
            ns, [_revenue_formula(p_star, rho, pi, k) for k in ns], [2.0**-k for k in ns], p, (n, sim, sim_se)
        ),
    )
    return rep


REPRODUCTIONS: dict[str, Callable[..., Report]] = {
    "inform-bad": inform_bad,
    "transcripts": transcripts,
    "cheaper-search": cheaper_search,
    "inform-pricing": inform_pricing,
    "revenue-example": revenue_example,
    "weitzman-oracle": weitzman_oracle,
}


def reproduce(name: str, seed: int = 0, **overrides) -> Report:
    try:
        fn = REPRODUCTIONS[name]
    except KeyError:
        raise UnknownReproduction(f"unknown reproduction {name!r}; choose from {sorted(REPRODUCTIONS)}") from None
    return fn(seed=seed, **{k: v for k, v in overrides.items() if v is not None})
