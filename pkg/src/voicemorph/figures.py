"""Matplotlib figure rendering for the report path (PNG alongside the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import HistogramData
from .report import SERIES_COLORS


def render_histogram_png(hist: HistogramData, path: str | Path, dpi: int = 110) -> None:
    """Overlaid translucent score histograms, one series per population."""
    edges = hist.bin_edges
    widths = edges[1:] - edges[:-1]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for name, counts in hist.series.items():
        ax.bar(
            edges[:-1],
            counts,
            width=widths,
            align="edge",
            alpha=0.45,
            label=name,
            color=SERIES_COLORS.get(name, "#888888"),
        )
    ax.set_xlim(-1.0, 1.0)
    ax.set_xlabel("match score")
    ax.set_ylabel("count")
    ax.legend(loc="upper left", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
