"""Static figures for experiment reports (Agg backend, deterministic PNG output)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 120,
}


def new_figure(width: float = 6.0, height: float | None = None):
    golden = (math.sqrt(5) - 1.0) / 2.0
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(width, height or width * golden))
    return fig, ax


def save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # no timestamp or version metadata, so reruns produce identical bytes
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_price_cdfs(profiles: dict, path: str | Path, points: int = 400) -> Path:
    fig, ax = new_figure()
    for label, prof in profiles.items():
        if prof.n == 0:
            continue
        lo = 0.0
        hi = max(prof.top_price * 1.05, 1e-9)
        p = np.linspace(lo, hi, points)
        ax.plot(p, prof.cdf(p), label=f"{label} (n={prof.n})")
    ax.set_xlabel("price")
    ax.set_ylabel("G(p)")
    ax.set_title("Equilibrium price distribution")
    ax.legend()
    return save(fig, path)


def plot_lost_probabilities(labels, estimates, errors, thresholds, path: str | Path) -> Path:
    fig, ax = new_figure()
    x = np.arange(len(labels))
    ax.bar(x, estimates, yerr=[1.96 * e for e in errors], color=["#4c72b0", "#dd8452"][: len(labels)], capsize=4)
    for xi, (kind, thr) in zip(x, thresholds):
        ax.hlines(thr, xi - 0.4, xi + 0.4, colors="k", linestyles="--")
        ax.annotate(f"{kind} {thr:g}", (xi, thr), textcoords="offset points", xytext=(0, 4), ha="center")
    ax.set_xticks(x, labels)
    ax.set_ylabel("P(lost)")
    ax.set_ylim(0, 1)
    ax.set_title("Probability the business is lost")
    return save(fig, path)


def plot_learned_counts(counts_a, counts_b, labels, path: str | Path) -> Path:
    fig, ax = new_figure()
    top = int(max(max(counts_a, default=0), max(counts_b, default=0)))
    bins = np.arange(-0.5, top + 1.5, 1.0)
    ax.hist([counts_a, counts_b], bins=bins, label=list(labels))
    ax.set_xlabel("learned businesses")
    ax.set_ylabel("replicas")
    ax.set_title("Learned-set sizes under coupling")
    ax.legend()
    return save(fig, path)


def plot_revenue_vs_n(ns, rev_costly, rev_free, path: str | Path, simulated=None) -> Path:
    fig, ax = new_figure()
    ax.semilogy(ns, rev_costly, "o-", label="costly search")
    ax.semilogy(ns, rev_free, "s-", label="free search")
    if simulated is not None:
        n_sim, mean, se = simulated
        ax.errorbar([n_sim], [mean], yerr=[1.96 * se], fmt="k^", capsize=4, label="simulated (costly)")
    ax.set_xlabel("businesses n")
    ax.set_ylabel("expected revenue per business")
    ax.set_title("Canonical revenue per business")
    ax.legend()
    return save(fig, path)


def plot_oracle_agreement(policy, optimum, path: str | Path) -> Path:
    fig, ax = new_figure(width=4.5, height=4.5)
    ax.plot(optimum, policy, ".", ms=4)
    lo = min(min(optimum, default=0), min(policy, default=0))
    hi = max(max(optimum, default=1), max(policy, default=1))
    ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
    ax.set_xlabel("dynamic-programming optimum")
    ax.set_ylabel("index policy")
    ax.set_title("Expected utility")
    return save(fig, path)


def plot_utility_series(series, comparator, path: str | Path) -> Path:
    fig, ax = new_figure()
    rounds = np.arange(1, len(series) + 1)
    ax.plot(rounds, series, lw=0.8, label="E[U_i | history]")
    ax.axhline(comparator, color="k", ls="--", lw=0.8, label="U*(learned set)")
    ax.set_xscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("expected utility")
    ax.legend()
    return save(fig, path)
