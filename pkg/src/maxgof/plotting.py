"""
Figures written next to the CSV outputs of the command-line tools.

Matplotlib is imported lazily with the Agg backend so the library itself
never needs a display.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PlotUnavailable(ImportError):
    """Matplotlib is not installed."""


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # optional dependency
        raise PlotUnavailable("--plot needs matplotlib: pip install 'artifact[plot]'") from exc

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"font.size": 9, "axes.titlesize": 10, "figure.dpi": 120})
    return plt


def plot_field(values: np.ndarray, path, title: str = "") -> Path:
    """Heat map of one lattice realization (log scale for heavy tails)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(np.log(np.clip(values, 1e-300, None)), origin="lower", cmap="viridis")
    fig.colorbar(im, ax=ax, label="log value")
    ax.set_xlabel("$t_2$")
    ax.set_ylabel("$t_1$")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_surface(values: np.ndarray, path, c_sim: float, c_boot: float, t_obs: float) -> Path:
    """Normalized deviation surface with both critical values marked on the colour bar."""
    plt = _pyplot()
    n = values.shape[0]
    lam = 2 * np.pi * np.arange(1, n + 1) / n
    fig, ax = plt.subplots(figsize=(4.8, 3.8))
    mesh = ax.pcolormesh(lam, lam, values, shading="nearest", cmap="magma")
    cbar = fig.colorbar(mesh, ax=ax)
    for level, colour, label in ((c_sim, "tab:blue", "c_sim"), (c_boot, "tab:red", "c_boot")):
        if values.min() <= level <= values.max():
            ax.contour(lam, lam, values, levels=[level], colors=colour, linewidths=1.0)
        cbar.ax.axhline(level, color=colour, lw=1.5)
    ax.set_xlabel(r"$\omega_2$")
    ax.set_ylabel(r"$\omega_1$")
    ax.set_title(f"T={t_obs:.2f}  c_sim={c_sim:.2f}  c_boot={c_boot:.2f}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_densities(sim_stats, boot_stats, path) -> Path:
    """Kernel density estimates of the simulation and bootstrap statistics."""
    from scipy.stats import gaussian_kde

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    pooled = np.concatenate([sim_stats, boot_stats])
    grid = np.linspace(pooled.min(), pooled.max(), 256)
    for sample, style, label in ((sim_stats, "-", "simulation"), (boot_stats, "--", "bootstrap")):
        sample = np.asarray(sample, dtype=float)
        if np.ptp(sample) > 0:
            ax.plot(grid, gaussian_kde(sample)(grid), style, color="k", label=label)
    ax.set_xlabel("statistic")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
