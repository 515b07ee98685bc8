"""Toy autoregressive decoder over the extended vocabulary.

A small pre-norm transformer in float64 with hand-written exact gradients,
so stage-wise parameter freezing can be audited byte-for-byte and gradients
can be checked against finite differences. Video token rows enter the
sequence as soft embeddings produced by the two projector MLPs (which are
part of the model so stage-1 training can reach them); text and time tokens
go through the embedding table. Low-rank adapter pairs can be attached to
the frozen backbone matrices; until then adapter tensors simply do not
exist in the parameter set.

Sequence layout per example:

    [head ids] [projected video rows] [pre ids = markers + instruction] [answer ids]

The loss supervises answer positions only, summed per the training
objective; a mean reduction exists for optimizer convenience.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np

from .codec import TemporalVocab
from .errors import (
    ConfigError,
    DegenerateExampleError,
    DivergenceError,
    InvalidInputError,
    SchemaError,
)

CKPT_FORMAT = "vtgkit-ckpt-v1"

_STAGE_GROUPS = {
    1: frozenset({"projectors"}),
    2: frozenset({"projectors", "embed", "head"}),
    3: frozenset({"projectors", "embed", "head", "adapters"}),
}

_ADAPTER_TARGETS = ("attn.wq", "attn.wk", "attn.wv", "attn.wo", "ffn.w1", "ffn.w2")

# activation -> (forward, derivative in terms of (pre, post))
_ACT = {
    "tanh": (np.tanh, lambda pre, post: 1.0 - post * post),
    "relu": (lambda x: np.maximum(x, 0.0), lambda pre, post: (pre > 0).astype(float)),
    "linear": (lambda x: x, lambda pre, post: 1.0),
}


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    n_heads: int
    n_blocks: int
    d_ff: int
    max_len: int
    base_vocab: int
    spatial_channels: int
    temporal_channels: int
    proj_hidden: int = 0          # 0 means: use d_model
    activation: str = "tanh"
    embed_update: str = "temporal_only"  # or "all"
    init_scale: float = 0.02
    eos_id: int = 1

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.n_heads}")
        if self.activation not in _ACT:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.embed_update not in ("all", "temporal_only"):
            raise ConfigError(f"embed_update must be 'all' or 'temporal_only'")
        for name in ("d_model", "n_heads", "n_blocks", "d_ff", "max_len", "base_vocab",
                     "spatial_channels", "temporal_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.eos_id < self.base_vocab:
            raise ConfigError("eos_id outside base vocab")

    @property
    def projector_hidden(self) -> int:
        return self.proj_hidden or self.d_model


def parameter_group(name: str) -> str:
    if name == "embed":
        return "embed"
    if name == "head":
        return "head"
    if name.startswith("proj_"):
        return "projectors"
    if name.startswith("lora."):
        return "adapters"
    return "backbone"


def trainable_mask(stage: int) -> frozenset[str]:
    """Parameter groups trainable at a curriculum stage."""
    if stage not in _STAGE_GROUPS:
        raise ConfigError(f"unknown stage {stage!r}")
    return _STAGE_GROUPS[stage]


class StagedModel:
    def __init__(self, cfg: ModelConfig, seed: int = 0,
                 params: dict[str, np.ndarray] | None = None):
        self.cfg = cfg
        self.vocab: TemporalVocab | None = None
        self.stage = 0
        self.adapter_rank: int | None = None
        self.adapter_alpha: float | None = None
        if params is not None:
            self.params = params
            return
        rng = np.random.default_rng(seed)
        d, s = cfg.d_model, cfg.init_scale
        p: dict[str, np.ndarray] = {}
        p["embed"] = rng.normal(0.0, s, (cfg.base_vocab, d))
        p["head"] = rng.normal(0.0, s, (cfg.base_vocab, d))
        p["pos"] = rng.normal(0.0, s, (cfg.max_len, d))
        for i in range(cfg.n_blocks):
            b = f"blk{i}"
            p[f"{b}.ln1.scale"] = np.ones(d)
            p[f"{b}.ln1.shift"] = np.zeros(d)
            for w in ("wq", "wk", "wv", "wo"):
                p[f"{b}.attn.{w}"] = rng.normal(0.0, 1.0 / np.sqrt(d), (d, d))
            p[f"{b}.ln2.scale"] = np.ones(d)
            p[f"{b}.ln2.shift"] = np.zeros(d)
            p[f"{b}.ffn.w1"] = rng.normal(0.0, 1.0 / np.sqrt(d), (cfg.d_ff, d))
            p[f"{b}.ffn.b1"] = np.zeros(cfg.d_ff)
            p[f"{b}.ffn.w2"] = rng.normal(0.0, 1.0 / np.sqrt(cfg.d_ff), (d, cfg.d_ff))
            p[f"{b}.ffn.b2"] = np.zeros(d)
        p["final_norm.scale"] = np.ones(d)
        p["final_norm.shift"] = np.zeros(d)
        h = cfg.projector_hidden
        for prefix, c_in in (("proj_f", cfg.spatial_channels), ("proj_g", cfg.temporal_channels)):
            p[f"{prefix}.w0"] = rng.normal(0.0, 1.0 / np.sqrt(c_in), (h, c_in))
            p[f"{prefix}.b0"] = np.zeros(h)
            p[f"{prefix}.w1"] = rng.normal(0.0, 1.0 / np.sqrt(h), (d, h))
            p[f"{prefix}.b1"] = np.zeros(d)
        self.params = {k: np.ascontiguousarray(v, dtype=np.float64) for k, v in p.items()}

    # --- introspection helpers ---

    @property
    def vocab_rows(self) -> int:
        return self.params["embed"].shape[0]

    @property
    def eos_id(self) -> int:
        return self.cfg.eos_id

    @property
    def has_adapters(self) -> bool:
        return self.adapter_rank is not None

    @property
    def adapter_scale(self) -> float:
        if not self.has_adapters:
            return 0.0
        return self.adapter_alpha / self.adapter_rank

    def parameter_count(self, group: str | None = None) -> int:
        return sum(v.size for k, v in self.params.items()
                   if group is None or parameter_group(k) == group)

    def group_bytes(self, group: str) -> bytes:
        """Concatenated raw bytes of a parameter group, for freeze audits."""
        names = sorted(k for k in self.params if parameter_group(k) == group)
        return b"".join(np.ascontiguousarray(self.params[k]).tobytes() for k in names)


@dataclass
class TrainingExample:
    """One sequence: optional video rows, then text ids, then answer ids.

    spatial_rows / temporal_rows are pre-projection pooled token rows per
    segment unit (the projectors run inside the model so their gradients
    flow); head_ids precede the video rows, pre_ids follow them up to the
    answer.
    """

    head_ids: list[int] = field(default_factory=list)
    pre_ids: list[int] = field(default_factory=list)
    answer_ids: list[int] = field(default_factory=list)
    spatial_rows: list[np.ndarray] | None = None
    temporal_rows: list[np.ndarray] | None = None

    @property
    def n_video_rows(self) -> int:
        n = 0
        for rows in (self.spatial_rows or []):
            n += rows.shape[0]
        for rows in (self.temporal_rows or []):
            n += rows.shape[0]
        return n

    @property
    def seq_len(self) -> int:
        return len(self.head_ids) + self.n_video_rows + len(self.pre_ids) + len(self.answer_ids)

    def loss_mask(self) -> np.ndarray:
        m = np.zeros(self.seq_len, dtype=bool)
        if self.answer_ids:
            m[-len(self.answer_ids):] = True
        return m

    def with_answer(self, answer_ids: list[int]) -> "TrainingExample":
        return TrainingExample(head_ids=self.head_ids, pre_ids=self.pre_ids,
                               answer_ids=answer_ids, spatial_rows=self.spatial_rows,
                               temporal_rows=self.temporal_rows)


# --- low-level pieces ---


def _ln_fwd(x, scale, shift, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return scale * xhat + shift, (xhat, inv)


def _ln_bwd(dy, scale, cache):
    xhat, inv = cache
    dscale = (dy * xhat).sum(0)
    dshift = dy.sum(0)
    dxhat = dy * scale
    dx = inv * (dxhat - dxhat.mean(-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    return dx, dscale, dshift


def _lin_fwd(params, name, x, scale):
    """y = x W^T plus the low-rank adapter delta when one is attached."""
    y = x @ params[name].T
    a = params.get(f"lora.{name}.a")
    xa = None
    if a is not None:
        xa = x @ a.T
        y = y + scale * (xa @ params[f"lora.{name}.b"].T)
    return y, (x, xa)


def _lin_bwd(params, grads, name, dy, cache, scale):
    x, xa = cache
    grads[name] += dy.T @ x
    dx = dy @ params[name]
    if xa is not None:
        grads[f"lora.{name}.b"] += scale * (dy.T @ xa)
        dxa = scale * (dy @ params[f"lora.{name}.b"])
        grads[f"lora.{name}.a"] += dxa.T @ x
        dx = dx + dxa @ params[f"lora.{name}.a"]
    return dx


def _mlp_fwd(params, prefix, x, act_name):
    fwd = _ACT[act_name][0]
    n = 0
    while f"{prefix}.w{n}" in params:
        n += 1
    inputs, hidden = [], []
    for k in range(n):
        w = params[f"{prefix}.w{k}"]
        if x.shape[-1] != w.shape[1]:
            raise InvalidInputError(
                f"{prefix} layer {k}: input dim {x.shape[-1]} != {w.shape[1]}")
        inputs.append(x)
        x = x @ w.T + params[f"{prefix}.b{k}"]
        if k < n - 1:
            pre = x
            x = fwd(x)
            hidden.append((pre, x))
        else:
            hidden.append(None)
    return x, (inputs, hidden, n)


def _mlp_bwd(params, grads, prefix, dy, cache, act_name):
    dact = _ACT[act_name][1]
    inputs, hidden, n = cache
    for k in reversed(range(n)):
        if k < n - 1:
            pre, post = hidden[k]
            dy = dy * dact(pre, post)
        grads[f"{prefix}.w{k}"] += dy.T @ inputs[k]
        grads[f"{prefix}.b{k}"] += dy.sum(0)
        dy = dy @ params[f"{prefix}.w{k}"]
    return dy


def _block_fwd(params, i, x, n_heads, lora_scale, act_name):
    pre = f"blk{i}"
    n, d = x.shape
    dh = d // n_heads
    h1, ln1c = _ln_fwd(x, params[f"{pre}.ln1.scale"], params[f"{pre}.ln1.shift"])
    q, qc = _lin_fwd(params, f"{pre}.attn.wq", h1, lora_scale)
    k, kc = _lin_fwd(params, f"{pre}.attn.wk", h1, lora_scale)
    v, vc = _lin_fwd(params, f"{pre}.attn.wv", h1, lora_scale)
    qh = q.reshape(n, n_heads, dh).transpose(1, 0, 2)
    kh = k.reshape(n, n_heads, dh).transpose(1, 0, 2)
    vh = v.reshape(n, n_heads, dh).transpose(1, 0, 2)
    scores = qh @ kh.transpose(0, 2, 1) / np.sqrt(dh)
    causal = np.tril(np.ones((n, n), dtype=bool))
    scores = np.where(causal, scores, -np.inf)
    scores -= scores.max(-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(-1, keepdims=True)
    ctx = attn @ vh
    merged = ctx.transpose(1, 0, 2).reshape(n, d)
    ao, aoc = _lin_fwd(params, f"{pre}.attn.wo", merged, lora_scale)
    x1 = x + ao
    h2, ln2c = _ln_fwd(x1, params[f"{pre}.ln2.scale"], params[f"{pre}.ln2.shift"])
    f1, f1c = _lin_fwd(params, f"{pre}.ffn.w1", h2, lora_scale)
    f1 = f1 + params[f"{pre}.ffn.b1"]
    a_post = _ACT[act_name][0](f1)
    f2, f2c = _lin_fwd(params, f"{pre}.ffn.w2", a_post, lora_scale)
    f2 = f2 + params[f"{pre}.ffn.b2"]
    x2 = x1 + f2
    cache = (ln1c, qc, kc, vc, qh, kh, vh, attn, aoc, ln2c, f1c, f1, a_post, f2c)
    return x2, cache


def _block_bwd(params, grads, i, dx2, cache, n_heads, lora_scale, act_name):
    pre = f"blk{i}"
    ln1c, qc, kc, vc, qh, kh, vh, attn, aoc, ln2c, f1c, f1, a_post, f2c = cache
    dact = _ACT[act_name][1]
    # feed-forward branch
    grads[f"{pre}.ffn.b2"] += dx2.sum(0)
    da = _lin_bwd(params, grads, f"{pre}.ffn.w2", dx2, f2c, lora_scale)
    df1 = da * dact(f1, a_post)
    grads[f"{pre}.ffn.b1"] += df1.sum(0)
    dh2 = _lin_bwd(params, grads, f"{pre}.ffn.w1", df1, f1c, lora_scale)
    dx1_ln, dg, db = _ln_bwd(dh2, params[f"{pre}.ln2.scale"], ln2c)
    grads[f"{pre}.ln2.scale"] += dg
    grads[f"{pre}.ln2.shift"] += db
    dx1 = dx2 + dx1_ln
    # attention branch
    dmerged = _lin_bwd(params, grads, f"{pre}.attn.wo", dx1, aoc, lora_scale)
    n, d = dmerged.shape
    dh = d // n_heads
    dctx = dmerged.reshape(n, n_heads, dh).transpose(1, 0, 2)
    dattn = dctx @ vh.transpose(0, 2, 1)
    dvh = attn.transpose(0, 2, 1) @ dctx
    dscores = attn * (dattn - (dattn * attn).sum(-1, keepdims=True))
    dscores /= np.sqrt(dh)
    dq = (dscores @ kh).transpose(1, 0, 2).reshape(n, d)
    dk = (dscores.transpose(0, 2, 1) @ qh).transpose(1, 0, 2).reshape(n, d)
    dv = dvh.transpose(1, 0, 2).reshape(n, d)
    dh1 = _lin_bwd(params, grads, f"{pre}.attn.wq", dq, qc, lora_scale)
    dh1 = dh1 + _lin_bwd(params, grads, f"{pre}.attn.wk", dk, kc, lora_scale)
    dh1 = dh1 + _lin_bwd(params, grads, f"{pre}.attn.wv", dv, vc, lora_scale)
    dx_ln, dg, db = _ln_bwd(dh1, params[f"{pre}.ln1.scale"], ln1c)
    grads[f"{pre}.ln1.scale"] += dg
    grads[f"{pre}.ln1.shift"] += db
    return dx1 + dx_ln


def _assemble(model: StagedModel, ex: TrainingExample):
    """Build the input embedding matrix and remember how each row was made."""
    p = model.params
    rows_limit = model.vocab_rows
    ids_head = list(ex.head_ids)
    ids_tail = list(ex.pre_ids) + list(ex.answer_ids)
    for t in ids_head + ids_tail:
        if not isinstance(t, (int, np.integer)) or not 0 <= t < rows_limit:
            raise InvalidInputError(f"token id {t!r} outside vocab of {rows_limit} rows")
    if ex.spatial_rows is not None and ex.temporal_rows is not None:
        if len(ex.spatial_rows) != len(ex.temporal_rows):
            raise InvalidInputError("spatial and temporal units disagree")
    parts = []
    video_caches = []  # (projector prefix, mlp cache, row count)
    if ids_head:
        parts.append(p["embed"][ids_head])
    units = len(ex.spatial_rows or ex.temporal_rows or [])
    for u in range(units):
        if ex.spatial_rows is not None:
            y, c = _mlp_fwd(p, "proj_f", ex.spatial_rows[u], model.cfg.activation)
            parts.append(y)
            video_caches.append(("proj_f", c, y.shape[0]))
        if ex.temporal_rows is not None:
            y, c = _mlp_fwd(p, "proj_g", ex.temporal_rows[u], model.cfg.activation)
            parts.append(y)
            video_caches.append(("proj_g", c, y.shape[0]))
    if ids_tail:
        parts.append(p["embed"][ids_tail])
    if not parts:
        raise DegenerateExampleError("example has no content")
    x0 = np.vstack(parts)
    n = x0.shape[0]
    if n > model.cfg.max_len:
        raise InvalidInputError(f"sequence length {n} exceeds max_len {model.cfg.max_len}")
    return x0, ids_head, ids_tail, video_caches


def _forward_core(model: StagedModel, ex: TrainingExample):
    p = model.params
    cfg = model.cfg
    x0, ids_head, ids_tail, video_caches = _assemble(model, ex)
    n = x0.shape[0]
    x = x0 + p["pos"][:n]
    block_caches = []
    for i in range(cfg.n_blocks):
        x, c = _block_fwd(p, i, x, cfg.n_heads, model.adapter_scale, cfg.activation)
        block_caches.append(c)
    xf, lnf_cache = _ln_fwd(x, p["final_norm.scale"], p["final_norm.shift"])
    logits = xf @ p["head"].T
    if not np.all(np.isfinite(logits)):
        raise DivergenceError("non-finite activations in forward")
    cache = (n, ids_head, ids_tail, video_caches, block_caches, lnf_cache, xf)
    return logits, cache


def forward(model: StagedModel, example: TrainingExample) -> np.ndarray:
    """Logits for every position, shape (sequence length, vocab rows)."""
    logits, _ = _forward_core(model, example)
    return logits


def attention_maps(model: StagedModel, example: TrainingExample) -> list[np.ndarray]:
    """Per-block causal attention, each of shape (heads, n, n)."""
    _, cache = _forward_core(model, example)
    # attn sits at slot 7 of the block cache tuple built in _block_fwd
    return [c[7] for c in cache[4]]


def loss(logits: np.ndarray, example: TrainingExample, reduction: str = "sum") -> float:
    """Cross-entropy over the answer positions (summed by default)."""
    if reduction not in ("sum", "mean"):
        raise ConfigError(f"unknown reduction {reduction!r}")
    la = len(example.answer_ids)
    if la == 0:
        raise DegenerateExampleError("example has an empty answer")
    n = logits.shape[0]
    if la >= n:
        raise InvalidInputError("answer cannot cover the whole sequence")
    rows = logits[n - la - 1:n - 1]
    targets = np.asarray(example.answer_ids)
    m = rows.max(axis=-1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(rows - m).sum(axis=-1))
    total = float((lse - rows[np.arange(la), targets]).sum())
    return total / la if reduction == "mean" else total


def gradients(model: StagedModel, example: TrainingExample, stage: int | None = None,
              reduction: str = "sum") -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients for every parameter tensor.

    With `stage` given, gradients of groups outside the stage mask are
    zeroed; in 'temporal_only' embedding mode the base-vocabulary embedding
    rows are zeroed as well once the vocab has been extended.
    """
    p = model.params
    cfg = model.cfg
    logits, cache = _forward_core(model, example)
    n, ids_head, ids_tail, video_caches, block_caches, lnf_cache, xf = cache
    value = loss(logits, example, reduction=reduction)
    if not np.isfinite(value):
        raise DivergenceError(f"non-finite loss {value}")
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    la = len(example.answer_ids)
    dlogits = np.zeros_like(logits)
    rows = logits[n - la - 1:n - 1]
    m = rows.max(axis=-1, keepdims=True)
    e = np.exp(rows - m)
    soft = e / e.sum(axis=-1, keepdims=True)
    soft[np.arange(la), np.asarray(example.answer_ids)] -= 1.0
    if reduction == "mean":
        soft = soft / la
    dlogits[n - la - 1:n - 1] = soft
    grads["head"] += dlogits.T @ xf
    dxf = dlogits @ p["head"]
    dx, dg, db = _ln_bwd(dxf, p["final_norm.scale"], lnf_cache)
    grads["final_norm.scale"] += dg
    grads["final_norm.shift"] += db
    for i in reversed(range(cfg.n_blocks)):
        dx = _block_bwd(p, grads, i, dx, block_caches[i], cfg.n_heads,
                        model.adapter_scale, cfg.activation)
    grads["pos"][:n] += dx
    offset = 0
    if ids_head:
        np.add.at(grads["embed"], ids_head, dx[:len(ids_head)])
        offset = len(ids_head)
    for prefix, mlp_cache, count in video_caches:
        _mlp_bwd(p, grads, prefix, dx[offset:offset + count], mlp_cache, cfg.activation)
        offset += count
    if ids_tail:
        np.add.at(grads["embed"], ids_tail, dx[offset:offset + len(ids_tail)])
    if stage is not None:
        allowed = trainable_mask(stage)
        for name in grads:
            if parameter_group(name) not in allowed:
                grads[name][:] = 0.0
        if "embed" in allowed and cfg.embed_update == "temporal_only" and model.vocab is not None:
            grads["embed"][:cfg.base_vocab] = 0.0
    return value, grads


# --- adapters, vocabulary extension, generation ---


def adapter_forward(x: np.ndarray, w: np.ndarray, a: np.ndarray, b: np.ndarray,
                    alpha: float) -> np.ndarray:
    """Base linear map plus the scaled low-rank delta: x W^T + (alpha/r) x A^T B^T."""
    r = a.shape[0]
    if b.shape[1] != r or w.shape[0] != b.shape[0] or w.shape[1] != a.shape[1]:
        raise InvalidInputError(
            f"adapter shapes do not chain: W{w.shape} A{a.shape} B{b.shape}")
    if x.shape[-1] != w.shape[1]:
        raise InvalidInputError(f"input dim {x.shape[-1]} != {w.shape[1]}")
    return x @ w.T + (alpha / r) * ((x @ a.T) @ b.T)


def add_adapters(model: StagedModel, rank: int, alpha: float, seed: int = 0) -> int:
    """Attach zero-initialized adapter pairs to every backbone linear map.

    B starts at zero so the adapted forward pass is exactly the base pass.
    Returns the number of adapter parameters added.
    """
    if model.has_adapters:
        raise ConfigError("adapters already attached")
    if rank < 1 or alpha <= 0:
        raise ConfigError(f"bad adapter shape: rank {rank}, alpha {alpha}")
    rng = np.random.default_rng(seed)
    added = 0
    for i in range(model.cfg.n_blocks):
        for target in _ADAPTER_TARGETS:
            name = f"blk{i}.{target}"
            w = model.params[name]
            d_out, d_in = w.shape
            a = rng.normal(0.0, 1.0 / np.sqrt(d_in), (rank, d_in))
            b = np.zeros((d_out, rank))
            model.params[f"lora.{name}.a"] = a
            model.params[f"lora.{name}.b"] = b
            added += a.size + b.size
    model.adapter_rank = rank
    model.adapter_alpha = float(alpha)
    return added


def extend_embeddings(table: np.ndarray, vocab: TemporalVocab, init: str = "mean_noise",
                      seed=0, noise: float = 0.02) -> np.ndarray:
    """Append rows for time tokens and markers to a base embedding table."""
    if table.shape[0] != vocab.base_size:
        raise InvalidInputError(
            f"table has {table.shape[0]} rows, vocab expects base {vocab.base_size}")
    extra = vocab.total_size - vocab.base_size
    if init == "mean_noise":
        rng = np.random.default_rng(seed)
        new_rows = table.mean(axis=0) + rng.normal(0.0, noise, (extra, table.shape[1]))
    elif init == "zeros":
        new_rows = np.zeros((extra, table.shape[1]))
    else:
        raise ConfigError(f"unknown init strategy {init!r}")
    return np.vstack([table, new_rows])


def extend_model_vocab(model: StagedModel, vocab: TemporalVocab, seed: int = 0) -> None:
    """Grow embedding table and head to the extended vocabulary, once."""
    if model.vocab is not None:
        raise ConfigError("vocabulary already extended")
    if vocab.base_size != model.cfg.base_vocab:
        raise ConfigError(
            f"vocab base {vocab.base_size} != model base vocab {model.cfg.base_vocab}")
    model.params["embed"] = extend_embeddings(model.params["embed"], vocab, seed=[seed, 0])
    model.params["head"] = extend_embeddings(model.params["head"], vocab, seed=[seed, 1])
    model.vocab = vocab


def generate(model: StagedModel, example: TrainingExample, max_new: int = 32) -> list[int]:
    """Greedy decoding from the example's prefix; stops after eos."""
    out: list[int] = []
    for _ in range(max_new):
        logits = forward(model, example.with_answer(out))
        nxt = int(np.argmax(logits[-1]))
        out.append(nxt)
        if nxt == model.eos_id:
            break
    return out


# --- checkpoints ---


def save_checkpoint(model: StagedModel, path: str | Path) -> None:
    """One canonical JSON manifest line, then raw float64 tensors in name order."""
    names = sorted(model.params)
    manifest = {
        "format": CKPT_FORMAT,
        "dtype": "<f8",
        "config": asdict(model.cfg),
        "stage": model.stage,
        "vocab": model.vocab.to_dict() if model.vocab is not None else None,
        "adapters": ({"rank": model.adapter_rank, "alpha": model.adapter_alpha}
                     if model.has_adapters else None),
        "tensors": [{"name": k, "shape": list(model.params[k].shape)} for k in names],
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    chunks = [blob]
    for k in names:
        chunks.append(np.ascontiguousarray(model.params[k], dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> StagedModel:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise SchemaError(f"{path}: missing checkpoint manifest")
    try:
        manifest = json.loads(raw[:nl])
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: bad manifest: {e}") from e
    if manifest.get("format") != CKPT_FORMAT:
        raise SchemaError(f"{path}: not a {CKPT_FORMAT} file")
    cfg = ModelConfig(**manifest["config"])
    params: dict[str, np.ndarray] = {}
    offset = nl + 1
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 8
        if end > len(raw):
            raise SchemaError(f"{path}: truncated tensor data for {entry['name']}")
        params[entry["name"]] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise SchemaError(f"{path}: {len(raw) - offset} trailing bytes")
    model = StagedModel(cfg, params=params)
    model.stage = int(manifest["stage"])
    if manifest.get("vocab"):
        model.vocab = TemporalVocab.from_dict(manifest["vocab"])
    if manifest.get("adapters"):
        model.adapter_rank = int(manifest["adapters"]["rank"])
        model.adapter_alpha = float(manifest["adapters"]["alpha"])
    return model
