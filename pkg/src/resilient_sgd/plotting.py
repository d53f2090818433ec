"""Convergence figures rendered from summary CSV files."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PANELS = (("opt_error_mean", "optimality error"), ("W_mean", "W (tracker error)"))


def read_summary(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {col: np.array([float(r[col]) for r in rows]) for col in rows[0]}


def convergence_figure(summaries: dict[int, str | Path], out_path: str | Path,
                       title: str = "") -> Path:
    """Log-log plot of the optimality error and W against k, one line per f.

    Round 0 is dropped since it has no place on a log axis.
    """
    fig, axes = plt.subplots(1, len(PANELS), figsize=(10, 4), constrained_layout=True)
    for f in sorted(summaries):
        data = read_summary(summaries[f])
        k = data["k"]
        keep = k > 0
        for ax, (col, _) in zip(axes, PANELS):
            ax.loglog(k[keep], data[col][keep], label=f"f = {f}", lw=1.2)
    for ax, (_, label) in zip(axes, PANELS):
        ax.set_xlabel("round k")
        ax.set_ylabel(label)
        ax.grid(True, which="major", alpha=0.3)
        ax.legend(frameon=False)
    if title:
        fig.suptitle(title)
    out_path = Path(out_path)
    # fixed metadata keeps the PNG bytes stable across runs
    fig.savefig(out_path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return out_path
