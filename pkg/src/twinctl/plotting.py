"""Matplotlib defaults and deterministic vector output."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "svg.fonttype": "path",
    "svg.hashsalt": "twinctl",
    "path.simplify": False,
}

COLORS = ("#1f4e9c", "#c0392b", "#218c5a", "#8e44ad", "#d68910", "#566573")


def figure(width=3.5, height=None):
    """Single-column figure; height defaults to width times the golden ratio."""
    if height is None:
        height = width * (math.sqrt(5) - 1.0) / 2.0
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def save(fig, path):
    # Pinned metadata and hash salt keep regenerated SVGs byte-identical.
    with plt.rc_context(RC):
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "twinctl"})
    plt.close(fig)
    return path
