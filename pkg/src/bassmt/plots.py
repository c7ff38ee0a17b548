"""Figure rendering for solver and sampling reports.

All figures go straight to files through the Agg backend, with pinned
metadata so reruns of the same configuration are byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE = {"dpi": 110, "metadata": {"Software": "bassmt"}}


def plot_paths(ens, path, max_shown: int = 120) -> str:
    """Fan of sampled (B, M) paths; planar trajectories in dim 2."""
    shown = min(ens.n_paths, max_shown)
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6), sharey=(ens.dim == 1))
    if ens.dim == 1:
        for ax, series, label in ((axes[0], ens.B, "B_t"), (axes[1], ens.M, "M_t")):
            ax.plot(ens.times, series[:shown, :, 0].T, lw=0.5, alpha=0.35)
            ax.set_xlabel("t")
            ax.set_title(label)
    else:
        for ax, series, label in ((axes[0], ens.B, "B paths"), (axes[1], ens.M, "M paths")):
            for p in range(shown):
                ax.plot(series[p, :, 0], series[p, :, 1], lw=0.5, alpha=0.35)
            ax.scatter(series[:shown, -1, 0], series[:shown, -1, 1], s=4, color="k",
                       zorder=3)
            ax.set_aspect("equal")
            ax.set_title(label)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return str(path)


def plot_measures(mu, nu, alpha, path) -> str:
    """Input marginals and the fitted initial law on one canvas."""
    fig, ax = plt.subplots(figsize=(5.4, 4.2))
    if mu.dim == 1:
        ax.stem(nu.atoms[:, 0], nu.weights, linefmt="C1-", markerfmt="C1o",
                basefmt=" ", label="nu")
        ax.stem(mu.atoms[:, 0], mu.weights, linefmt="C0-", markerfmt="C0s",
                basefmt=" ", label="mu")
        if alpha is not None:
            ax.stem(alpha.atoms[:, 0], alpha.weights, linefmt="C2--",
                    markerfmt="C2^", basefmt=" ", label="alpha")
        ax.set_xlabel("x")
        ax.set_ylabel("weight")
    else:
        ax.scatter(nu.atoms[:, 0], nu.atoms[:, 1], s=220.0 * nu.weights + 2.0,
                   color="C1", alpha=0.6, label="nu")
        ax.scatter(mu.atoms[:, 0], mu.atoms[:, 1], s=220.0 * mu.weights + 2.0,
                   color="C0", alpha=0.8, marker="s", label="mu")
        if alpha is not None:
            ax.scatter(alpha.atoms[:, 0], alpha.atoms[:, 1],
                       s=220.0 * alpha.weights + 2.0, color="C2", alpha=0.8,
                       marker="^", label="alpha")
        ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return str(path)


def plot_circle_construction(mu, nu, path, radii=(0.5, 1.6, 1.0)) -> str:
    """Scatter of the constructed marginals against the reference circles."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.scatter(nu.atoms[:, 0], nu.atoms[:, 1], s=1.0, color="C1", alpha=0.25,
               label="nu cloud", rasterized=True)
    ax.scatter(mu.atoms[:, 0], mu.atoms[:, 1], s=6.0, color="C0", label="mu atoms")
    theta = np.linspace(0.0, 2.0 * np.pi, 256)
    for r in radii:
        ax.plot(r * np.cos(theta), r * np.sin(theta), "k--", lw=0.6)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return str(path)


def plot_derivative_recovery(grid, recovered, target, path,
                             labels=("recovered", "target")) -> str:
    """Recovered monotone derivative against its oracle on a common grid."""
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    ax.plot(grid, target, "k-", lw=1.2, label=labels[1])
    ax.plot(grid, recovered, "C3--", lw=1.2, label=labels[0])
    ax.set_xlabel("z")
    ax.set_ylabel("v'(z)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return str(path)
