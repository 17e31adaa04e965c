"""Figure rendering for the experiment report path (headless Agg backend)."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ExperimentResult

_COLORS = {"onestep": "tab:blue", "sgd": "tab:orange", "init": "tab:green", "mle": "tab:gray"}


def render_histograms(result: ExperimentResult, out_dir: str, stem: str = "errors") -> list[str]:
    """One PNG per (sample size, epsilon) cell, estimators overlaid.

    Files land next to the delimited output as
    ``<stem>_n<N>_eps<eps>.png``; returns the paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for cell in result.cells:
        edges = np.asarray(cell.bin_edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        width = edges[1] - edges[0]
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for name in sorted(cell.histograms):
            counts = np.asarray(cell.histograms[name], dtype=float)
            ax.bar(
                centers,
                counts,
                width=width,
                alpha=0.45,
                label=name,
                color=_COLORS.get(name),
                edgecolor="none",
            )
        ax.set_xlabel("estimate - population target")
        ax.set_ylabel("count over (trial, coordinate)")
        ax.set_title(f"n={cell.sample_size}, epsilon={cell.epsilon:g}, T={cell.trials}")
        ax.legend(frameon=False)
        fig.tight_layout()
        eps_tag = f"{cell.epsilon:g}".replace(".", "p")
        path = os.path.join(out_dir, f"{stem}_n{cell.sample_size}_eps{eps_tag}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
