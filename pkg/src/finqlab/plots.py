"""Matplotlib figure rendering for the report path. All figures go to files."""
from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .bsm import MarketPoint, bsm_price


def price_curve(points, predictions, path, label="model") -> None:
    """Model predictions at discrete points against the continuous BSM curve."""
    p0 = points[0]
    m_grid = np.linspace(0.78, 1.22, 200)
    curve = [bsm_price(MarketPoint(m=m, T=p0.T, r=p0.r, sigma=p0.sigma)).c_hat for m in m_grid]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(m_grid, curve, "k-", lw=1.2, label="BSM analytic")
    ax.plot([p.m for p in points], predictions, "o", ms=6, label=label)
    ax.set_xlabel("moneyness m")
    ax.set_ylabel("normalized call price")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def loss_history(history, path) -> None:
    """Training and validation MSE per iteration, log scale."""
    iters = [h[0] for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(iters, [h[1] for h in history], label="train MSE")
    ax.semilogy(iters, [h[2] for h in history], label="validation MSE")
    ax.set_xlabel("iteration")
    ax.set_ylabel("MSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def shot_noise(stats, path) -> None:
    """Std-dev column of the shot grid vs shot count, with a 1/sqrt(N) guide."""
    fig, ax = plt.subplots(figsize=(6, 4))
    reps = sorted({s.repetitions for s in stats})
    for r in reps:
        cells = sorted(
            [s for s in stats if s.repetitions == r and s.shots], key=lambda s: s.shots
        )
        if not cells:
            continue
        ns = [s.shots for s in cells]
        ax.loglog(ns, [s.std_dev for s in cells], "o-", label=f"R={r}")
    if stats and stats[0].shots:
        ns = np.array(sorted({s.shots for s in stats if s.shots}))
        ref = stats[0].std_dev * np.sqrt(stats[0].shots / ns)
        ax.loglog(ns, ref, "k--", lw=0.8, label=r"$1/\sqrt{N}$")
    ax.set_xlabel("shots per repetition")
    ax.set_ylabel("std dev across repetitions")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def stability(track, path) -> None:
    """Per-repetition price series for each point; dashed lines mark BSM values."""
    fig, ax = plt.subplots(figsize=(7, 4))
    reps = np.arange(track.series.shape[0])
    for j, p in enumerate(track.points):
        (line,) = ax.plot(reps, track.series[:, j], "o-", ms=3, lw=0.8, label=f"m={p.m:g}")
        ax.axhline(bsm_price(p).c_hat, color=line.get_color(), ls="--", lw=0.8)
    ax.set_xlabel("repetition")
    ax.set_ylabel("price estimate")
    ax.legend(ncol=len(track.points), fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def convergence(stats, path) -> None:
    """Estimator mean with std band per shot-ladder rung."""
    fig, ax = plt.subplots(figsize=(6, 4))
    mu = np.array(stats.means)
    sd = np.array(stats.stds)
    ax.errorbar(stats.shots, mu, yerr=sd, fmt="o-", capsize=4, label="estimator")
    ax.axhline(bsm_price(stats.point).c_hat, color="k", ls="--", lw=0.8, label="BSM value")
    ax.set_xlabel("shots")
    ax.set_ylabel(f"price estimate at m={stats.point.m:g}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
