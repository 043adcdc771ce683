"""Static figures: detection overlays and evaluation summaries."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Polygon as PolygonPatch  # noqa: E402

KIND_COLORS = {"line": "tab:red", "word": "tab:green", "gt": "tab:blue"}


def overlay_figure(background: np.ndarray, polygons: Sequence, kinds: Sequence[str], scores=None, gt=()):
    h, w = background.shape
    dpi = 100
    fig, ax = plt.subplots(figsize=(max(w, 200) / dpi, max(h, 200) / dpi), dpi=dpi)
    ax.imshow(background, cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest", extent=(0, w, h, 0))
    for poly in gt:
        ax.add_patch(PolygonPatch(np.asarray(poly), closed=True, fill=False, lw=1.0, ls="--", ec=KIND_COLORS["gt"]))
    for k, (poly, kind) in enumerate(zip(polygons, kinds)):
        pts = np.asarray(poly).reshape(-1, 2)
        ax.add_patch(PolygonPatch(pts, closed=True, fill=False, lw=1.5, ec=KIND_COLORS.get(kind, "tab:orange")))
        if scores is not None:
            ax.text(pts[0, 0], pts[0, 1] - 1, f"{scores[k]:.2f}", color="yellow", fontsize=6, va="bottom")
    ax.set_xlim(0, w)
    ax.set_ylim(h, 0)
    ax.set_axis_off()
    fig.tight_layout(pad=0)
    return fig


def save_overlay(path, background, polygons, kinds, scores=None, gt=()) -> Path:
    fig = overlay_figure(background, polygons, kinds, scores, gt)
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def save_prf_chart(path, names: Sequence[str], rows: Sequence[tuple[float, float, float]]) -> Path:
    """Grouped precision/recall/F bars, one group per image plus the aggregate."""
    rows = np.asarray(rows, dtype=float).reshape(-1, 3)
    x = np.arange(len(names))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(names) + 2), 3.0))
    for k, label in enumerate(("precision", "recall", "F")):
        ax.bar(x + (k - 1) * width, rows[:, k], width, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
