"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.linewidth": 0.3,
    "savefig.dpi": 150,
}


def figsize(scale=1.0, width_pt=412.56, ratio=None):
    """Figure size in inches for a fraction of a text column."""
    ratio = (math.sqrt(5.0) - 1.0) / 2.0 if ratio is None else ratio
    width = width_pt / 72.27 * scale
    return width, width * ratio


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_singular_values(sigma, path):
    sigma = np.asarray(sigma, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.semilogy(np.arange(1, sigma.size + 1), sigma / sigma[0], "o-", ms=2, lw=1)
        ax.set_xlabel("Number of singular values")
        ax.set_ylabel(r"$\sigma/\sigma_1$")
        return _save(fig, path)


def plot_error_study(report, path):
    """Two panels: mean relative error against database size and mode count."""
    with plt.rc_context(STYLE):
        fig, (left, right) = plt.subplots(1, 2, figsize=figsize(ratio=0.45))
        if report.errors_by_size:
            n, _, e = zip(*report.errors_by_size)
            left.semilogy(n, e, "o-", color="C3", ms=2, lw=1)
        left.set_xlabel("Number of snapshots")
        left.set_ylabel("mean relative error")
        if report.errors_by_modes:
            m, e = zip(*report.errors_by_modes)
            right.semilogy(m, e, "o-", color="C3", ms=2, lw=1)
        right.set_xlabel("Number of modes")
        return _save(fig, path)


def plot_field(grid, path, title=None, label="temperature", cmap="jet"):
    """Filled contour of a sampled field over the physical domain."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.7, ratio=0.95))
        x, y = grid.points[..., 0], grid.points[..., 1]
        cs = ax.contourf(x, y, grid.values, levels=30, cmap=cmap)
        fig.colorbar(cs, ax=ax, label=label, shrink=0.8)
        ax.set_aspect("equal")
        ax.grid(False)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        if title:
            fig.suptitle(title, fontsize=9)
        return _save(fig, path)
