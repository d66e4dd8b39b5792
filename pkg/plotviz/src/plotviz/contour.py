"""Side-by-side KDE contour panels: model prediction vs ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .kde2d import kde_grid
from .samples import read_sample_csv

__all__ = ["PlotJob", "render_kde_contour"]

MIN_ROWS = 100


@dataclass
class PlotJob:
    """One contour figure: model and ground-truth sample CSVs, the outcome
    pair to plot, the output path, and the evaluation grid resolution."""

    model_csv: str
    truth_csv: str
    outcome_x: str = "y_1"
    outcome_y: str = "y_2"
    output_path: str = "contour.png"
    resolution: int = 120
    unit_id: Optional[int] = None
    arm: Optional[int] = None


def _load_pair(job: PlotJob, path):
    table = read_sample_csv(path)
    table = table.filtered(unit_id=job.unit_id, arm=job.arm)
    if table.n < MIN_ROWS:
        raise ValueError(
            f"{path}: need at least {MIN_ROWS} rows after filtering, "
            f"got {table.n}"
        )
    return np.column_stack([table.column(job.outcome_x),
                            table.column(job.outcome_y)])


def render_kde_contour(job: PlotJob) -> Path:
    """Render the two-panel contour figure; returns the output path.

    Shared axes and color scale across panels so the panels are directly
    comparable. Deterministic: identical inputs give identical bytes.
    """
    model_pts = _load_pair(job, job.model_csv)
    truth_pts = _load_pair(job, job.truth_csv)
    pooled = np.vstack([model_pts, truth_pts])
    pad = 0.05 * (pooled.max(axis=0) - pooled.min(axis=0) + 1e-9)
    xlim = (pooled[:, 0].min() - pad[0], pooled[:, 0].max() + pad[0])
    ylim = (pooled[:, 1].min() - pad[1], pooled[:, 1].max() + pad[1])

    grids = [
        kde_grid(pts, xlim, ylim, job.resolution)
        for pts in (model_pts, truth_pts)
    ]
    vmax = max(d.max() for _, _, d in grids)
    levels = np.linspace(0.0, vmax, 11)[1:]

    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0), sharex=True,
                             sharey=True)
    titles = ("model prediction", "ground truth")
    for ax, (gx, gy, density), title in zip(axes, grids, titles):
        cs = ax.contourf(gx, gy, density.T, levels=levels, cmap="viridis",
                         extend="min")
        ax.contour(gx, gy, density.T, levels=levels, colors="white",
                   linewidths=0.4, alpha=0.5)
        ax.set_title(title)
        ax.set_xlabel(job.outcome_x)
        ax.set_xlim(*xlim)
        ax.set_ylim(*ylim)
    axes[0].set_ylabel(job.outcome_y)
    fig.colorbar(cs, ax=axes, fraction=0.03, pad=0.02)

    out = Path(job.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    # Strip the matplotlib version stamp so identical inputs yield identical
    # bytes.
    fig.savefig(out, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return out
