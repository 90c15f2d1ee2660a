"""Command-line entry point: run experiments and named reproductions.

Examples::

    searchmarket --config market.json --replicas 10 --seed 1 --out runs/a
    searchmarket --kind couple --config a.json --config b.json --replicas 100
    searchmarket --kind lost-prob --config market.json --replicas 2000
    searchmarket --kind equilibrium --config market.json
    searchmarket --reproduce inform-bad --seed 0

Exit status: 0 on success, 1 on invalid input (a JSON error object is
written to stderr), 2 when a reproduction's checks fail.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import MarketError, UnknownReproduction
from .model import MarketSpec, load_spec, spec_from_dict, validate_market

SCHEMA_VERSION = 1
KINDS = ("simulate", "couple", "lost-prob", "equilibrium", "reproduce")
ROUNDS_HEADER = ["round", "value", "inspections", "transaction", "quality", "utility", "prices"]
COUPLE_HEADER = ["replica", "learned_a", "learned_b", "contained"]
LOST_HEADER = ["business", "lost_probability", "std_error", "replicas"]
CDF_HEADER = ["price", "cdf"]
REPORT_HEADER = ["check", "value", "target", "passed", "detail"]


class UsageError(MarketError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "simulate"
    specs: list[MarketSpec] = field(default_factory=list)
    replicas: int = 1
    horizon: int | None = None
    seed: int = 0
    out: Path = Path("searchmarket_out")
    reproduce: str | None = None
    settle: bool = False
    grid_size: int = 1000
    figures: bool = True
    replicas_given: bool = False


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_jsonable(v) for v in items]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalar
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _simulate(cfg: ExperimentConfig) -> int:
    from .dynamics import replica_bundle, run_market, utility_convergence_series

    vm = validate_market(cfg.specs[0])
    rows = []
    first = None
    for i in range(cfg.replicas):
        trace = run_market(vm, replica_bundle(cfg.seed, i), cfg.horizon, record=(i == 0), settle=cfg.settle)
        if i == 0:
            first = trace
        rows.append(
            {
                "replica": i,
                "learned": sorted(trace.learned_set),
                "lost": sorted(trace.lost_set),
                "lost_at": list(trace.lost_at),
                "post_fit": [b.post_fit for b in trace.final_beliefs],
                "post_quality": [b.post_quality for b in trace.final_beliefs],
                "mean_error": list(trace.mean_errors()),
                "welfare": _replica_welfare(vm, trace),
            }
        )
    series, comparator = utility_convergence_series(first)
    _write_csv(
        cfg.out / "rounds.csv",
        ROUNDS_HEADER,
        (
            (
                r.round,
                r.value,
                ";".join(f"{x.business}:{x.fit}" for x in r.inspections),
                "" if r.transaction is None else r.transaction,
                "" if r.quality is None else r.quality,
                r.utility,
                ";".join(_fmt(p) for p in r.prices),
            )
            for r in first.rounds
        ),
    )
    learned_freq = [sum(j in row["learned"] for row in rows) / cfg.replicas for j in range(vm.n_businesses)]
    summary = {
        "kind": "simulate",
        "replicas": rows,
        "learned_frequency": learned_freq,
        "expected_utility_final": float(series[-1]),
        "utility_comparator": comparator,
    }
    _finish(cfg, summary)
    if cfg.figures:
        from . import plotting

        plotting.plot_utility_series(series, comparator, cfg.out / "utility_series.png")
    return 0


def _replica_welfare(vm, trace) -> dict | None:
    """Canonical welfare of one replica's learned set; None when prices are exogenous."""
    from .errors import AsymmetricInput
    from .model import CanonicalEquilibrium
    from .pricing import canonical_equilibrium, welfare

    if not isinstance(vm.spec.price_mode, CanonicalEquilibrium):
        return None
    try:
        w = welfare(canonical_equilibrium(vm, trace))
    except AsymmetricInput:
        return None
    return {"consumer_surplus": w.consumer_surplus, "revenue": w.revenue, "total_welfare": w.total_welfare}


def _couple(cfg: ExperimentConfig) -> int:
    from .dynamics import run_coupled

    if len(cfg.specs) != 2:
        raise UsageError("couple needs exactly two market specs")
    a_vm, b_vm = (validate_market(s) for s in cfg.specs)
    rows = []
    for i in range(cfg.replicas):
        a, b = run_coupled(a_vm, b_vm, (cfg.seed, i), cfg.horizon, settle=cfg.settle)
        rows.append((i, sorted(a.learned_set), sorted(b.learned_set), b.learned_set >= a.learned_set))
    _write_csv(
        cfg.out / "couple.csv",
        COUPLE_HEADER,
        ((i, " ".join(map(str, la)), " ".join(map(str, lb)), str(ok).lower()) for i, la, lb, ok in rows),
    )
    summary = {
        "kind": "couple",
        "replicas": [{"replica": i, "learned_a": la, "learned_b": lb, "contained": ok} for i, la, lb, ok in rows],
        "containment_fraction": sum(r[3] for r in rows) / len(rows) if rows else 1.0,
    }
    _finish(cfg, summary)
    if cfg.figures:
        from . import plotting

        plotting.plot_learned_counts([len(r[1]) for r in rows], [len(r[2]) for r in rows], ("A", "B"),
                                     cfg.out / "couple_learned.png")
    return 0


def _lost_prob(cfg: ExperimentConfig) -> int:
    from .dynamics import replica_bundle, run_market

    vm = validate_market(cfg.specs[0])
    m = vm.n_businesses
    lost = [0] * m
    joint = 0
    for i in range(cfg.replicas):
        trace = run_market(vm, replica_bundle(cfg.seed, i), cfg.horizon, record=False, settle=cfg.settle)
        flags = trace.learned_flags
        for j in range(m):
            lost[j] += not flags[j]
        joint += all(not f for f in flags)
    est = [(j, lost[j] / cfg.replicas) for j in range(m)]
    rows = [(j, w, math.sqrt(w * (1 - w) / cfg.replicas), cfg.replicas) for j, w in est]
    _write_csv(cfg.out / "lost.csv", LOST_HEADER, rows)
    summary = {
        "kind": "lost-prob",
        "lost_probability": [{"business": j, "estimate": w, "std_error": se} for j, w, se, _ in rows],
        "all_lost_frequency": joint / cfg.replicas,
        "product_of_marginals": math.prod(w for _, w in est),
    }
    _finish(cfg, summary)
    if cfg.figures:
        from . import plotting

        plotting.plot_lost_probabilities(
            [f"business {j}" for j in range(m)], [w for _, w, _, _ in rows], [se for _, _, se, _ in rows], [], cfg.out / "lost.png"
        )
    return 0


def _equilibrium(cfg: ExperimentConfig) -> int:
    import numpy as np

    from .pricing import _check_symmetric, effective_value_demand, symmetric_equilibrium, verify_equilibrium, welfare

    spec = cfg.specs[0]
    vm = validate_market(spec)
    fits = [b.fit_prob for b in spec.businesses]
    quals = [b.quality for b in spec.businesses]
    _check_symmetric(fits, quals)
    curve = effective_value_demand(spec.value_dist, fits[0], quals[0], spec.search_cost)
    prof = symmetric_equilibrium(curve, vm.n_businesses)
    check = verify_equilibrium(prof, grid_size=max(cfg.grid_size, 2))
    w = welfare(prof)
    grid = np.linspace(0.0, max(prof.top_price, 1e-12), cfg.grid_size)
    _write_csv(cfg.out / "cdf.csv", CDF_HEADER, zip(grid.tolist(), np.asarray(prof.cdf(grid)).tolist()))
    eq = {
        "n": prof.n,
        "floor_price": prof.floor_price,
        "top_price": prof.top_price,
        "monopoly_revenue": prof.monopoly_revenue,
        "per_business_revenue": prof.per_business_revenue,
        "welfare": {"consumer_surplus": w.consumer_surplus, "revenue": w.revenue, "total_welfare": w.total_welfare},
        "on_support_gap": check.on_support_gap,
        "max_deviation_gain": check.max_gain,
    }
    _write_json(cfg.out / "equilibrium.json", eq)
    _finish(cfg, {"kind": "equilibrium", "equilibrium": eq})
    if cfg.figures:
        from . import plotting

        plotting.plot_price_cdfs({"equilibrium": prof}, cfg.out / "equilibrium_cdf.png")
    return 0


def _reproduce(cfg: ExperimentConfig) -> int:
    from .reproduce import reproduce

    overrides = {"out_dir": cfg.out if cfg.figures else None}
    if cfg.replicas_given:
        overrides["replicas"] = cfg.replicas
    if cfg.horizon is not None:
        overrides["horizon"] = cfg.horizon
    rep = reproduce(cfg.reproduce, cfg.seed, **overrides)
    _write_json(cfg.out / "report.json", rep.to_dict())
    _write_csv(
        cfg.out / "report.csv",
        REPORT_HEADER,
        ((c.name, c.value, c.target, str(c.passed).lower(), c.detail) for c in rep.checks),
    )
    _finish(cfg, {"kind": "reproduce", "name": rep.name, "passed": rep.passed,
                  "checks": [{"check": c.name, "passed": c.passed} for c in rep.checks]})
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {rep.name}:{c.name} value={c.value:.6g} target {c.target}")
    return 0 if rep.passed else 2


def _finish(cfg: ExperimentConfig, summary: dict) -> None:
    summary = {"schema_version": SCHEMA_VERSION, "seed": cfg.seed, **summary}
    _write_json(cfg.out / "summary.json", summary)


RUNNERS = {
    "simulate": _simulate,
    "couple": _couple,
    "lost-prob": _lost_prob,
    "equilibrium": _equilibrium,
    "reproduce": _reproduce,
}


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="searchmarket", description="Consumer-search market simulator.")
    p.add_argument("--config", action="append", default=[], metavar="PATH",
                   help="market spec or experiment config JSON (repeat for couple)")
    p.add_argument("--kind", choices=KINDS, help="experiment kind (default: from config, else simulate)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--replicas", type=int, help="number of replicas")
    p.add_argument("--horizon", type=int, help="rounds per replica")
    p.add_argument("--out", help="output directory (default: $SEARCHMARKET_OUT or ./searchmarket_out)")
    p.add_argument("--reproduce", metavar="NAME", help="run a named reproduction")
    p.add_argument("--settle", action="store_true", help="settle active businesses past the horizon")
    p.add_argument("--grid-size", type=int, help="grid points for equilibrium output")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    return p


def _load_specs(entries, base: Path) -> list[MarketSpec]:
    specs = []
    for e in entries:
        if isinstance(e, dict):
            specs.append(spec_from_dict(e))
        else:
            specs.append(load_spec(base / e))
    return specs


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.replicas_given = args.replicas is not None
    file_cfg: dict[str, Any] = {}
    specs: list[MarketSpec] = []
    for path in args.config:
        path = Path(path)
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path} is not valid JSON: {exc}") from None
        if isinstance(doc, dict) and "kind" in doc:
            file_cfg.update(doc)
            specs.extend(_load_specs(doc.get("specs", []), path.parent))
        else:
            specs.append(spec_from_dict(doc))
    cfg.specs = specs
    cfg.kind = args.kind or file_cfg.get("kind", "reproduce" if args.reproduce else "simulate")
    if args.reproduce:
        cfg.kind = "reproduce"
        cfg.reproduce = args.reproduce
    elif cfg.kind == "reproduce":
        cfg.reproduce = file_cfg.get("reproduce")
        if not cfg.reproduce:
            raise UsageError("reproduce needs --reproduce NAME")
    cfg.seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    cfg.replicas = args.replicas if args.replicas is not None else int(file_cfg.get("replicas", 1))
    if "replicas" in file_cfg:
        cfg.replicas_given = True
    cfg.horizon = args.horizon if args.horizon is not None else file_cfg.get("horizon")
    cfg.settle = args.settle or bool(file_cfg.get("settle", False))
    cfg.grid_size = args.grid_size or int(file_cfg.get("grid_size", 1000))
    cfg.figures = not args.no_figures and bool(file_cfg.get("figures", True))
    out = args.out or file_cfg.get("out") or os.environ.get("SEARCHMARKET_OUT") or "searchmarket_out"
    cfg.out = Path(out)
    if cfg.replicas < 1:
        raise UsageError("--replicas must be at least 1")
    if cfg.horizon is not None and cfg.horizon < 1:
        raise UsageError("--horizon must be at least 1")
    if cfg.kind != "reproduce" and not cfg.specs:
        raise UsageError(f"{cfg.kind} needs a market spec via --config")
    return cfg


def run_experiment(cfg: ExperimentConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.kind](cfg)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run_experiment(cfg)
    except (MarketError, UnknownReproduction) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc).strip("'\"")}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
