"""Peeking inside a trained model: per-frame attention and embedding maps.

Attention rows over the video prefix collapse to one weight per frame by
dropping the spatial rows and averaging the temporal rows of each frame.
Time-token embedding tables reduce to 1-3 plot coordinates through exact
PCA. Both paths emit plain CSV so rendering stays external.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig, token_budget
from .errors import ConfigError, InvalidInputError
from .model import StagedModel


class RankDeficiencyWarning(UserWarning):
    """Requested more components than the data has variance directions."""


# --- attention aggregation ---


def aggregate_attention(weights, cfg: EncoderConfig,
                        head_reduce: str = "mean") -> np.ndarray:
    """Collapse an attention row over the video prefix to per-frame weights.

    Accepts a single row of length token_budget(cfg) or a (heads, budget)
    stack, reduced across heads first. Spatial rows are dropped; the
    temporal rows of each frame are averaged.
    """
    arr = np.asarray(weights, dtype=float)
    if arr.ndim == 2:
        if head_reduce == "mean":
            arr = arr.mean(axis=0)
        elif head_reduce == "max":
            arr = arr.max(axis=0)
        else:
            raise ConfigError(f"unknown head reduction {head_reduce!r}")
    if arr.ndim != 1:
        raise InvalidInputError(f"expected 1D or 2D attention, got {arr.ndim}D")
    budget = token_budget(cfg)
    if arr.shape[0] != budget:
        raise InvalidInputError(
            f"attention length {arr.shape[0]} != token budget {budget}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidInputError("attention weights must be finite and non-negative")
    if not cfg.temporal_stream:
        raise ConfigError("config has no temporal stream to aggregate over")
    nt = cfg.temporal_tokens
    if cfg.spatial_stream:
        per_segment = arr.reshape(cfg.segments, cfg.rows_per_segment)
        temporal = per_segment[:, cfg.spatial_tokens:]
    else:
        temporal = arr
    return temporal.reshape(cfg.frames, nt).mean(axis=1)


# --- PCA of embedding tables ---


@dataclass(frozen=True)
class Projection:
    """Low-dimensional view of an embedding table.

    coords is (points, d); components is (d, dim) with orthonormal rows
    (zero rows pad past the data rank); explained holds non-increasing
    variance ratios.
    """

    coords: np.ndarray
    components: np.ndarray
    explained: np.ndarray


def pca(embeddings, d: int) -> Projection:
    """Exact principal components of a small embedding table.

    Components follow a fixed sign convention: the largest-magnitude
    entry of each is positive. Asking for more components than the data
    rank warns and zero-pads.
    """
    if d not in (1, 2, 3):
        raise InvalidInputError(f"d must be 1, 2 or 3, got {d}")
    x = np.asarray(embeddings, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError(f"expected a 2D table, got {x.ndim}D")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("embeddings must be finite")
    n, dim = x.shape
    if n <= d:
        raise InvalidInputError(f"need more than {d} points, got {n}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    total = float(eigvals.sum())
    rank = int(np.sum(eigvals > (eigvals[0] * 1e-12 if eigvals.size else 0.0)))
    keep = min(d, rank)
    if keep < d:
        warnings.warn(f"data rank {keep} < requested {d}; padding with zeros",
                      RankDeficiencyWarning, stacklevel=2)
    components = np.zeros((d, dim))
    components[:keep] = eigvecs[:, :keep].T
    for row in components[:keep]:
        if row[int(np.argmax(np.abs(row)))] < 0:
            row *= -1.0
    explained = np.zeros(d)
    if total > 0:
        explained[:keep] = eigvals[:keep] / total
    return Projection(coords=centered @ components.T, components=components,
                      explained=explained)


# --- embedding extraction and adjacency ---


def temporal_token_embeddings(model: StagedModel) -> np.ndarray:
    """Embedding rows of every time token, index order, shape (M+1, d)."""
    if model.vocab is None:
        raise ConfigError("model has no temporal vocabulary")
    ids = [model.vocab.temporal_id(t) for t in range(model.vocab.chunks + 1)]
    return model.params["embed"][ids].copy()


def adjacency_distances(embeddings, near: int = 5,
                        far: int = 100) -> tuple[float, float]:
    """Mean pairwise embedding distance at small and large index gaps.

    Returns (mean over pairs with gap <= near, mean over pairs with
    gap >= far). A locality-ordered table has the first well below the
    second.
    """
    x = np.asarray(embeddings, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError(f"expected a 2D table, got {x.ndim}D")
    n = x.shape[0]
    if not 1 <= near < far:
        raise InvalidInputError(f"need 1 <= near < far, got {near}, {far}")
    if n <= far:
        raise InvalidInputError(f"need more than {far} rows, got {n}")
    dist = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
    i, j = np.triu_indices(n, k=1)
    gap = j - i
    return (float(dist[i[gap <= near], j[gap <= near]].mean()),
            float(dist[i[gap >= far], j[gap >= far]].mean()))


# --- plot-ready CSV ---


def emit_plot_data(obj, path: str | Path) -> Path:
    """Write per-frame weights (frame,weight) or a Projection
    (index,x[,y[,z]]) as CSV."""
    path = Path(path)
    if isinstance(obj, Projection):
        d = obj.coords.shape[1]
        header = ",".join(["index", "x", "y", "z"][:1 + d])
        lines = [header] + [
            ",".join([str(i)] + [f"{float(v):.17g}" for v in row])
            for i, row in enumerate(obj.coords)]
    else:
        arr = np.asarray(obj, dtype=float)
        if arr.ndim != 1:
            raise InvalidInputError("per-frame weights must be a 1D array")
        lines = ["frame,weight"] + [f"{i},{float(w):.17g}"
                                    for i, w in enumerate(arr)]
    path.write_text("\n".join(lines) + "\n")
    return path
