"""Static loss-curve figures from a run's losses.csv."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import ConfigError


def read_losses_csv(path) -> tuple[list[str], dict[str, list[float]]]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise ConfigError(f"{path} holds no loss rows")
    header = rows[0]
    cols = {h: [] for h in header}
    for r in rows[1:]:
        if len(r) != len(header):
            raise ConfigError(f"{path}: ragged row {r!r}")
        for h, v in zip(header, r):
            cols[h].append(float(v))
    return header, cols


def plot_losses(csv_path, out_png) -> int:
    """One panel per loss term; returns the panel count."""
    header, cols = read_losses_csv(csv_path)
    it = cols["iter"]
    content_cols = [h for h in header if h.startswith("L_C_")]
    relation_cols = [h for h in header if h.startswith("L_R_")]
    panels = [
        ("L_FC", [("L_FC", cols["L_FC"])]),
        ("L_G", [("L_G", cols["L_G"])]),
        ("L_P", [("L_P", cols["L_P"])]),
        ("L_C per level", [(h, cols[h]) for h in content_cols]),
        ("L_R per (n, level)", [(h, cols[h]) for h in relation_cols]),
    ]
    if any(v != 0.0 for v in cols.get("L_Adv", [])):
        panels.append(("L_Adv", [("L_Adv", cols["L_Adv"])]))

    ncols = 3
    nrows = (len(panels) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.2 * ncols, 3.0 * nrows), squeeze=False)
    for ax in axes.flat:
        ax.set_visible(False)
    for ax, (title, series) in zip(axes.flat, panels):
        ax.set_visible(True)
        for label, ys in series:
            ax.plot(it, ys, linewidth=0.9, label=label)
        ax.set_title(title)
        ax.set_xlabel("iteration")
        if len(series) > 1:
            ax.legend(fontsize=6)
    fig.tight_layout()
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=110)
    plt.close(fig)
    return len(panels)
