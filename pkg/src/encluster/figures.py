"""Matplotlib report figures written next to the delimited outputs."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")  # headless rendering

import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "encluster"  # stable glyph ids

_SAVE_KW = {"metadata": {"Date": None}}


def save_loss_curve_figure(losses: Sequence[float], path) -> None:
    """Training cost per epoch."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(range(1, len(losses) + 1), losses, color="#1f77b4", linewidth=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean reconstruction error")
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, **(_SAVE_KW if str(path).endswith(".svg") else {}))
    plt.close(fig)


def save_eta_comparison_figure(category_names: Sequence[str],
                               eta_aekmc: Sequence[float],
                               eta_kmeans: Sequence[float], path) -> None:
    """Grouped bars of per-category eta for the two pipelines."""
    n = len(category_names)
    xs = range(n)
    width = 0.38
    fig, ax = plt.subplots(figsize=(6.4, 3.8))
    ax.bar([x - width / 2 for x in xs], [v * 100 for v in eta_aekmc],
           width=width, label="AE-kMC", color="#1f77b4")
    ax.bar([x + width / 2 for x in xs], [v * 100 for v in eta_kmeans],
           width=width, label="k-means", color="#d62728")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(category_names, rotation=20, ha="right")
    ax.set_ylabel("eta (%)")
    ax.set_ylim(0, 105)
    ax.legend(frameon=False)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, **(_SAVE_KW if str(path).endswith(".svg") else {}))
    plt.close(fig)
