"""Headless figure rendering for the evaluation report.

Figures land next to the delimited report so a run's directory tells
its own story: mean ROUGE per method, the usefulness tuning curve, and
the extractor's loss trace.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def read_trace(path) -> list[float]:
    """Second column of a two-column TSV trace; empty when absent."""
    path = Path(path)
    if not path.exists():
        return []
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        next(fh, None)  # header
        for line in fh:
            parts = line.split("\t")
            if len(parts) == 2:
                values.append(float(parts[1]))
    return values


def render_mean_rouge(mean_rows: dict, path) -> None:
    """Grouped bars of mean ROUGE-1/2/L recall per method."""
    methods = list(mean_rows)
    recalls = np.array([
        [mean_rows[m][0], mean_rows[m][3], mean_rows[m][6]] for m in methods
    ])
    x = np.arange(len(methods))
    width = 0.25
    fig, ax = plt.subplots(figsize=(7, 4))
    for k, (label, offset) in enumerate(
        (("ROUGE-1", -width), ("ROUGE-2", 0.0), ("ROUGE-L", width))
    ):
        ax.bar(x + offset, recalls[:, k], width, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(methods, rotation=20, ha="right")
    ax.set_ylabel("mean recall")
    ax.set_title("held-out recall by method")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_series(values, title: str, ylabel: str, path) -> None:
    """Simple line plot of one trace."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(len(values)), values, marker="o", markersize=3)
    ax.set_xlabel("step")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
