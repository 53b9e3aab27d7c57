"""Figures for scenario reports, rendered off-screen to PNG."""

from __future__ import annotations

import math
import os
from contextlib import contextmanager
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .energy import EnergyBreakdown  # noqa: E402
from .grid import Field  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0
FIG_WIDTH = 4.5

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "mathtext.fontset": "stix",
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


@contextmanager
def figure(width: float = FIG_WIDTH, height: float | None = None):
    """A styled figure and axes that are always closed afterwards."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height or width * GOLDEN))
        try:
            yield fig, ax
        finally:
            plt.close(fig)


def _save(fig, path) -> str:
    path = os.fspath(path)
    fig.savefig(path, metadata={"Software": None})
    return path


def plot_phase(v: Field, path, title: str = "phase field") -> str:
    g = v.grid
    with figure(FIG_WIDTH, FIG_WIDTH * g.ly / g.lx) as (fig, ax):
        im = ax.imshow(v.as_image(), origin="lower", extent=(0, g.lx, 0, g.ly),
                       cmap="magma", vmin=0.0, vmax=1.0, interpolation="nearest")
        fig.colorbar(im, ax=ax, label="$v$")
        ax.set_xlabel("$x_1$")
        ax.set_ylabel("$x_2$")
        ax.set_title(title)
        return _save(fig, path)


def plot_history(energies: Sequence[EnergyBreakdown], path, title: str = "energy history") -> str:
    rows = np.array([e.as_row() for e in energies]) if energies else np.zeros((0, 5))
    it = np.arange(rows.shape[0])
    with figure() as (fig, ax):
        for col, label in zip(range(5), ("bulk, modulated", "bulk, unmodulated",
                                          "surface, gradient", "surface, well", "total")):
            ax.plot(it, rows[:, col], label=label, lw=2.0 if col == 4 else 1.0)
        if rows.size and np.all(rows[:, 4] > 0):
            # the Dirichlet lift of the first state dwarfs later values
            ax.set_yscale("symlog", linthresh=max(1e-8, 1e-3 * float(rows[:, 4].min())))
        ax.set_xlabel("recorded half-step")
        ax.set_ylabel("energy")
        ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_recovery(eps: Sequence[float], ratios: Sequence[float], bounds: Sequence[float], path) -> str:
    with figure() as (fig, ax):
        ax.semilogx(eps, ratios, "o-", label="recovery / sharp")
        ax.semilogx(eps, bounds, "s--", label=r"$1+\ell/2$")
        ax.axhline(1.0, color="0.6", lw=0.8)
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel("energy ratio")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_profile(eps: float, path, span: float = 8.0) -> str:
    x = np.linspace(0.0, span * eps, 400)
    gamma = -np.expm1(-0.5 * x / eps)
    with figure() as (fig, ax):
        ax.plot(x / eps, gamma, label=r"$\gamma(x/\varepsilon)$")
        ax.plot(x / eps, np.exp(-x / eps) / 2.0, "--", label="surface density $\\times\\varepsilon$")
        ax.set_xlabel(r"$x/\varepsilon$")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_lemma(ratios: Sequence[float], path) -> str:
    with figure() as (fig, ax):
        r = np.asarray(ratios, float)
        ax.hist(r[np.isfinite(r)], bins=40, color="#2b8cbe")
        ax.axvline(1.0, color="k", lw=0.8)
        ax.set_xlabel("$L^p$ error ratio / explicit constant")
        ax.set_ylabel("trials")
        return _save(fig, path)
