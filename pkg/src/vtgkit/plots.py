"""Figure rendering for run artifacts.

Every function writes a PNG next to the delimited data it mirrors and
returns the path. The Agg backend keeps rendering headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .errors import EmptyInputError, InvalidInputError  # noqa: E402


def plot_loss(records: list[dict], path: str | Path) -> Path:
    """Loss over global step, one line per stage."""
    steps = [r for r in records if r.get("event") == "step"]
    if not steps:
        raise EmptyInputError("no step records to plot")
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    offset = 0
    for stage in sorted({r["stage"] for r in steps}):
        ys = [r["loss"] for r in steps if r["stage"] == stage]
        xs = np.arange(offset, offset + len(ys))
        ax.plot(xs, ys, label=f"stage {stage}")
        offset += len(ys)
        if offset < len(steps):
            ax.axvline(offset - 0.5, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("step")
    ax.set_ylabel("mean loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_frame_weights(weights, path: str | Path) -> Path:
    """Per-frame attention as a bar chart."""
    arr = np.asarray(weights, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("expected a non-empty 1D weight vector")
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.bar(np.arange(arr.size), arr, width=0.85)
    ax.set_xlabel("frame")
    ax.set_ylabel("attention")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_projection(proj, path: str | Path) -> Path:
    """Scatter of PCA coordinates, colored by token index (1D/2D/3D)."""
    coords = np.asarray(proj.coords, dtype=float)
    if coords.ndim != 2 or coords.shape[0] == 0:
        raise InvalidInputError("projection has no points")
    n, d = coords.shape
    idx = np.arange(n)
    path = Path(path)
    fig = plt.figure(figsize=(6, 5))
    if d == 3:
        ax = fig.add_subplot(projection="3d")
        sc = ax.scatter(coords[:, 0], coords[:, 1], coords[:, 2], c=idx,
                        cmap="viridis", s=18)
        ax.set_zlabel("pc3")
    elif d == 2:
        ax = fig.add_subplot()
        sc = ax.scatter(coords[:, 0], coords[:, 1], c=idx, cmap="viridis", s=18)
    else:
        ax = fig.add_subplot()
        sc = ax.scatter(idx, coords[:, 0], c=idx, cmap="viridis", s=18)
        ax.set_xlabel("token index")
        ax.set_ylabel("pc1")
    if d >= 2:
        ax.set_xlabel("pc1")
        ax.set_ylabel("pc2")
    fig.colorbar(sc, ax=ax, label="token index", shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_iou_histogram(ious, path: str | Path) -> Path:
    arr = np.asarray(ious, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise EmptyInputError("no IoU values to plot")
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.hist(arr, bins=20, range=(0.0, 1.0), edgecolor="black", lw=0.4)
    ax.set_xlabel("IoU")
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_gap_curve(gaps, means, path: str | Path) -> Path:
    """Mean embedding distance as a function of token-index gap."""
    g = np.asarray(gaps, dtype=float)
    m = np.asarray(means, dtype=float)
    if g.size == 0 or g.shape != m.shape:
        raise InvalidInputError("gap and mean arrays must match and be non-empty")
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(g, m)
    ax.set_xlabel("index gap")
    ax.set_ylabel("mean distance")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
