"""Figure rendering for registration artifacts.

Everything here draws to files with the non-interactive Agg backend: a line
rendering of the deformed grid, heat maps of scalar fields, and the
per-level convergence traces.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .fields import Deformation
from .grid import ScalarField
from .registration import IterationRecord


def render_grid(phi: Deformation, path: str | Path, stride: int = 1) -> None:
    """Draw the deformed grid lines (rows and columns of cell centers)."""
    p1, p2 = phi.phi.comp1, phi.phi.comp2
    fig, ax = plt.subplots(figsize=(5, 5))
    for i in range(0, p1.shape[0], stride):
        ax.plot(p1[i, :], p2[i, :], color="steelblue", linewidth=0.5)
    for j in range(0, p1.shape[1], stride):
        ax.plot(p1[:, j], p2[:, j], color="steelblue", linewidth=0.5)
    ax.set_aspect("equal")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_title("deformed grid")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def render_hotmap(field: ScalarField, path: str | Path, title: str) -> None:
    """Heat map of a cell-centered scalar field on [0,1]^2."""
    fig, ax = plt.subplots(figsize=(5.5, 5))
    # values[i, j] has i along x, so transpose for imshow's (row, col) layout
    im = ax.imshow(field.values.T, origin="lower", extent=(0, 1, 0, 1),
                   cmap="coolwarm")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def render_trace(trace: list[IterationRecord], path: str | Path) -> None:
    """Per-level data-term and total-energy curves over outer iterations."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    levels = sorted({rec.level for rec in trace}, reverse=True)
    for level in levels:
        recs = [rec for rec in trace if rec.level == level]
        its = [rec.iteration for rec in recs]
        ax1.plot(its, [rec.energy.data for rec in recs],
                 marker=".", label=f"level {level}")
        ax2.plot(its, [rec.energy.total for rec in recs],
                 marker=".", label=f"level {level}")
    ax1.set_title("data term")
    ax2.set_title("total energy")
    positive = all(rec.energy.total > 0.0 for rec in trace)
    for ax in (ax1, ax2):
        ax.set_xlabel("iteration")
        if positive:
            ax.set_yscale("log")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
