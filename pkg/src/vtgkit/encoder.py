"""Two-stream segment encoding of video feature maps.

A clip of `frames` frames is split into `segments` equal segments. Each
segment contributes one keyframe feature map on the spatial stream (lightly
pooled, many tokens) and all of its frames on the temporal stream (heavily
pooled, few tokens per frame). Pooled maps are flattened row-major into token
rows, projected by two small MLPs into the model width, and concatenated
spatial-first per segment:

    rows(segment) = [project_spatial(keyframe rows); project_temporal(frame rows)]

Either stream can be disabled, which reshapes the budget: spatial-only runs
every frame through the spatial stream, temporal-only keeps the segment
layout minus the keyframe rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .codec import GroundedEvent
from .errors import ConfigError, InvalidInputError, SchemaError

BUNDLE_FORMAT = "vtgkit-bundle-v1"


@dataclass(frozen=True)
class EncoderConfig:
    frames: int
    segments: int
    spatial_height: int
    spatial_width: int
    spatial_channels: int
    spatial_pool: int
    temporal_height: int
    temporal_width: int
    temporal_channels: int
    temporal_pool: int
    embed_dim: int
    spatial_stream: bool = True
    temporal_stream: bool = True
    noise_scale: float = 0.1          # synthetic feature noise sigma
    signature_amplitude: float = 1.0  # per-event mean shift in synthetic features

    def __post_init__(self) -> None:
        if not self.spatial_stream and not self.temporal_stream:
            raise ConfigError("at least one stream must be enabled")
        for name in ("frames", "segments", "spatial_height", "spatial_width",
                     "spatial_channels", "spatial_pool", "temporal_height",
                     "temporal_width", "temporal_channels", "temporal_pool", "embed_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.frames % self.segments != 0:
            raise ConfigError(
                f"frames {self.frames} not divisible by segments {self.segments}")
        if self.spatial_height % self.spatial_pool or self.spatial_width % self.spatial_pool:
            raise ConfigError(
                f"spatial pool {self.spatial_pool} does not divide "
                f"{self.spatial_height}x{self.spatial_width}")
        if self.temporal_height % self.temporal_pool or self.temporal_width % self.temporal_pool:
            raise ConfigError(
                f"temporal pool {self.temporal_pool} does not divide "
                f"{self.temporal_height}x{self.temporal_width}")

    @property
    def frames_per_segment(self) -> int:
        return self.frames // self.segments

    @property
    def spatial_tokens(self) -> int:
        """Token rows contributed by one pooled spatial map."""
        return (self.spatial_height // self.spatial_pool) * (self.spatial_width // self.spatial_pool)

    @property
    def temporal_tokens(self) -> int:
        """Token rows contributed by one pooled temporal map."""
        return (self.temporal_height // self.temporal_pool) * (self.temporal_width // self.temporal_pool)

    @property
    def rows_per_segment(self) -> int:
        rows = 0
        if self.spatial_stream:
            rows += self.spatial_tokens
        if self.temporal_stream:
            rows += self.frames_per_segment * self.temporal_tokens
        return rows

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(f"bad encoder config: {e}") from e


def load_config(path: str | Path) -> EncoderConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    return EncoderConfig.from_dict(data)


def token_budget(cfg: EncoderConfig) -> int:
    """Total video token rows for a clip under this config."""
    if cfg.spatial_stream and cfg.temporal_stream:
        return cfg.segments * cfg.rows_per_segment
    if cfg.spatial_stream:
        # every frame goes through the spatial stream
        return cfg.frames * cfg.spatial_tokens
    return cfg.frames * cfg.temporal_tokens


def full_scale_config(variant: str = "two_stream") -> EncoderConfig:
    """Reference-scale configs used for token accounting checks.

    two_stream: 96 frames, 12 segments, 24x24 keyframe maps pooled 2x,
    16x16 frame maps pooled 4x. The ablation variants trade the temporal
    stream for denser/sparser spatial coverage or drop the spatial stream.
    """
    common = dict(spatial_channels=16, temporal_channels=16, embed_dim=64)
    if variant == "two_stream":
        return EncoderConfig(frames=96, segments=12,
                             spatial_height=24, spatial_width=24, spatial_pool=2,
                             temporal_height=16, temporal_width=16, temporal_pool=4,
                             **common)
    if variant == "spatial_dense":
        # no temporal stream; all 96 frames, pooled harder to 6x6
        return EncoderConfig(frames=96, segments=12,
                             spatial_height=24, spatial_width=24, spatial_pool=4,
                             temporal_height=16, temporal_width=16, temporal_pool=4,
                             temporal_stream=False, **common)
    if variant == "spatial_sparse":
        # no temporal stream; 24 frames at the light 12x12 pooling
        return EncoderConfig(frames=24, segments=12,
                             spatial_height=24, spatial_width=24, spatial_pool=2,
                             temporal_height=16, temporal_width=16, temporal_pool=4,
                             temporal_stream=False, **common)
    if variant == "temporal_only":
        # no spatial stream; 14 frames of unpooled 16x16 maps
        return EncoderConfig(frames=14, segments=14,
                             spatial_height=24, spatial_width=24, spatial_pool=2,
                             temporal_height=16, temporal_width=16, temporal_pool=1,
                             spatial_stream=False, **common)
    raise ConfigError(f"unknown variant {variant!r}")


def partition_segments(frames: int, segments: int) -> list[tuple[range, int]]:
    """Equal segment frame ranges with the middle frame as keyframe.

    For even segment lengths the keyframe is the floor midpoint, i.e. local
    index frames_per_segment // 2.
    """
    if frames < 1 or segments < 1 or frames % segments != 0:
        raise ConfigError(f"cannot split {frames} frames into {segments} equal segments")
    per = frames // segments
    out = []
    for s in range(segments):
        start = s * per
        out.append((range(start, start + per), start + per // 2))
    return out


def avg_pool_2d(m: np.ndarray, size: int) -> np.ndarray:
    """Non-overlapping size x size mean pooling over the leading two axes."""
    if m.ndim != 3:
        raise InvalidInputError(f"expected (H, W, C) map, got shape {m.shape}")
    h, w, c = m.shape
    if size < 1 or h % size != 0 or w % size != 0:
        raise ConfigError(f"pool size {size} does not divide map {h}x{w}")
    return m.reshape(h // size, size, w // size, size, c).mean(axis=(1, 3))


def pooled_rows(m: np.ndarray, size: int) -> np.ndarray:
    """Pool a (H, W, C) map and flatten positions row-major to (h*w, C)."""
    p = avg_pool_2d(m, size)
    return p.reshape(-1, p.shape[-1])


# --- projection MLPs ---


@dataclass
class Mlp:
    """Plain MLP; weights[i] is (d_out, d_in), activation between layers only."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"


_ACTIVATIONS = {
    "linear": lambda x: x,
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
}


def mlp_forward(x: np.ndarray, mlp: Mlp) -> np.ndarray:
    if mlp.activation not in _ACTIVATIONS:
        raise ConfigError(f"unknown activation {mlp.activation!r}")
    act = _ACTIVATIONS[mlp.activation]
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        if x.shape[-1] != w.shape[1]:
            raise InvalidInputError(f"layer {i}: input dim {x.shape[-1]} != {w.shape[1]}")
        x = x @ w.T + b
        if i < last:
            x = act(x)
    return x


def init_mlp(sizes: list[int], activation: str = "tanh",
             rng: np.random.Generator | None = None) -> Mlp:
    """Gaussian init scaled by 1/sqrt(d_in)."""
    rng = rng or np.random.default_rng(0)
    ws, bs = [], []
    for d_in, d_out in zip(sizes[:-1], sizes[1:]):
        ws.append(rng.normal(0.0, 1.0 / np.sqrt(d_in), (d_out, d_in)))
        bs.append(np.zeros(d_out))
    return Mlp(weights=ws, biases=bs, activation=activation)


# --- synthetic features and encoding ---


@dataclass
class VideoFeatures:
    """Raw per-frame feature maps for one clip.

    spatial_maps: (units, H_s, W_s, C_s) where units is segments (two-stream)
    or frames (spatial-only). temporal_maps: (segments, frames_per_segment,
    H_t, W_t, C_t) or None.
    """

    spatial_maps: np.ndarray | None
    temporal_maps: np.ndarray | None


def _event_signature(seed: int, index: int, channels: int, amplitude: float) -> np.ndarray:
    # zero-mean channel pattern plus a constant, so the channel mean moves
    # by exactly `amplitude` inside the event
    rng = np.random.default_rng([seed, 1000 + index])
    pattern = rng.normal(0.0, 1.0, channels)
    pattern -= pattern.mean()
    return amplitude * (1.0 + pattern)


def synth_features(seed: int, cfg: EncoderConfig, events: list[GroundedEvent],
                   duration: float) -> VideoFeatures:
    """Deterministic noise maps with an additive per-event signature.

    Frame i covers midpoint time (i + 0.5) * duration / frames; frames whose
    midpoint falls inside an event get that event's signature added on every
    spatial position, in both streams.
    """
    if duration <= 0:
        raise InvalidInputError(f"duration must be positive, got {duration}")
    rng = np.random.default_rng(seed)
    times = (np.arange(cfg.frames) + 0.5) * duration / cfg.frames
    sig_s = [_event_signature(seed, i, cfg.spatial_channels, cfg.signature_amplitude)
             for i in range(len(events))]
    sig_t = [_event_signature(seed, 2000 + i, cfg.temporal_channels, cfg.signature_amplitude)
             for i in range(len(events))]

    def events_at(t: float) -> list[int]:
        return [i for i, ev in enumerate(events) if ev.start <= t <= ev.end]

    spatial = None
    if cfg.spatial_stream:
        if cfg.temporal_stream:
            key_frames = [k for _, k in partition_segments(cfg.frames, cfg.segments)]
        else:
            key_frames = list(range(cfg.frames))
        shape = (len(key_frames), cfg.spatial_height, cfg.spatial_width, cfg.spatial_channels)
        spatial = rng.normal(0.0, cfg.noise_scale, shape)
        for u, f in enumerate(key_frames):
            for i in events_at(times[f]):
                spatial[u] += sig_s[i]

    temporal = None
    if cfg.temporal_stream:
        per = cfg.frames_per_segment
        shape = (cfg.segments, per, cfg.temporal_height, cfg.temporal_width,
                 cfg.temporal_channels)
        temporal = rng.normal(0.0, cfg.noise_scale, shape)
        for s in range(cfg.segments):
            for j in range(per):
                for i in events_at(times[s * per + j]):
                    temporal[s, j] += sig_t[i]

    return VideoFeatures(spatial_maps=spatial, temporal_maps=temporal)


def stream_rows(feats: VideoFeatures, cfg: EncoderConfig) -> tuple[list[np.ndarray] | None,
                                                                   list[np.ndarray] | None]:
    """Pool and flatten raw maps into pre-projection token rows per unit.

    Returns (spatial_rows, temporal_rows); each is a list over units (segments,
    or frames for spatial-only), entries (n_rows, channels).
    """
    spatial_rows = None
    if cfg.spatial_stream:
        if feats.spatial_maps is None:
            raise InvalidInputError("config expects a spatial stream but features have none")
        if not np.all(np.isfinite(feats.spatial_maps)):
            raise InvalidInputError("non-finite spatial features")
        n_units = cfg.segments if cfg.temporal_stream else cfg.frames
        expected = (n_units, cfg.spatial_height, cfg.spatial_width, cfg.spatial_channels)
        if feats.spatial_maps.shape != expected:
            raise InvalidInputError(
                f"spatial maps shape {feats.spatial_maps.shape}, expected {expected}")
        spatial_rows = [pooled_rows(feats.spatial_maps[u], cfg.spatial_pool)
                        for u in range(n_units)]
    temporal_rows = None
    if cfg.temporal_stream:
        if feats.temporal_maps is None:
            raise InvalidInputError("config expects a temporal stream but features have none")
        if not np.all(np.isfinite(feats.temporal_maps)):
            raise InvalidInputError("non-finite temporal features")
        per = cfg.frames_per_segment
        expected = (cfg.segments, per, cfg.temporal_height, cfg.temporal_width,
                    cfg.temporal_channels)
        if feats.temporal_maps.shape != expected:
            raise InvalidInputError(
                f"temporal maps shape {feats.temporal_maps.shape}, expected {expected}")
        temporal_rows = [
            np.vstack([pooled_rows(feats.temporal_maps[s, j], cfg.temporal_pool)
                       for j in range(per)])
            for s in range(cfg.segments)
        ]
    return spatial_rows, temporal_rows


@dataclass
class VideoFeatureBundle:
    """Projected video token rows, unit-major, spatial rows first per unit."""

    video_rows: np.ndarray  # (token_budget, embed_dim)
    spatial_tokens: int
    temporal_tokens: int
    rows_per_unit: int
    units: int

    def segment_matrices(self) -> list[np.ndarray]:
        return [self.video_rows[u * self.rows_per_unit:(u + 1) * self.rows_per_unit]
                for u in range(self.units)]


def encode_segment(spatial_rows: np.ndarray | None, temporal_rows: np.ndarray | None,
                   f: Mlp | None, g: Mlp | None) -> np.ndarray:
    """Project one segment's pooled rows and concatenate spatial-first."""
    parts = []
    if spatial_rows is not None:
        if f is None:
            raise ConfigError("spatial rows given but no spatial projector")
        parts.append(mlp_forward(spatial_rows, f))
    if temporal_rows is not None:
        if g is None:
            raise ConfigError("temporal rows given but no temporal projector")
        parts.append(mlp_forward(temporal_rows, g))
    if not parts:
        raise InvalidInputError("segment has no rows on either stream")
    return np.vstack(parts)


def encode_video(feats: VideoFeatures, cfg: EncoderConfig,
                 f: Mlp | None, g: Mlp | None) -> VideoFeatureBundle:
    """Encode a full clip into its fused token-row matrix."""
    spatial_rows, temporal_rows = stream_rows(feats, cfg)
    if cfg.spatial_stream and cfg.temporal_stream:
        units = cfg.segments
        segs = [encode_segment(spatial_rows[u], temporal_rows[u], f, g) for u in range(units)]
    elif cfg.spatial_stream:
        units = cfg.frames
        segs = [encode_segment(spatial_rows[u], None, f, g) for u in range(units)]
    else:
        units = cfg.segments
        segs = [encode_segment(None, temporal_rows[u], f, g) for u in range(units)]
    video_rows = np.vstack(segs)
    expected = token_budget(cfg)
    if video_rows.shape[0] != expected:
        raise InvalidInputError(
            f"encoded {video_rows.shape[0]} rows but budget is {expected}")
    return VideoFeatureBundle(
        video_rows=video_rows,
        spatial_tokens=cfg.spatial_tokens if cfg.spatial_stream else 0,
        temporal_tokens=cfg.temporal_tokens if cfg.temporal_stream else 0,
        rows_per_unit=video_rows.shape[0] // units,
        units=units,
    )


def save_bundle(bundle: VideoFeatureBundle, path: str | Path) -> None:
    """One JSON header line, then raw little-endian float64 row data."""
    header = {
        "format": BUNDLE_FORMAT,
        "dtype": "<f8",
        "rows": int(bundle.video_rows.shape[0]),
        "cols": int(bundle.video_rows.shape[1]),
        "spatial_tokens": bundle.spatial_tokens,
        "temporal_tokens": bundle.temporal_tokens,
        "rows_per_unit": bundle.rows_per_unit,
        "units": bundle.units,
    }
    blob = json.dumps(header, sort_keys=True).encode() + b"\n"
    blob += np.ascontiguousarray(bundle.video_rows, dtype="<f8").tobytes()
    Path(path).write_bytes(blob)


def load_bundle(path: str | Path) -> VideoFeatureBundle:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise SchemaError(f"{path}: missing bundle header")
    try:
        header = json.loads(raw[:nl])
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: bad bundle header: {e}") from e
    if header.get("format") != BUNDLE_FORMAT:
        raise SchemaError(f"{path}: not a {BUNDLE_FORMAT} file")
    rows, cols = header["rows"], header["cols"]
    data = np.frombuffer(raw[nl + 1:], dtype="<f8")
    if data.size != rows * cols:
        raise SchemaError(f"{path}: expected {rows * cols} values, found {data.size}")
    return VideoFeatureBundle(
        video_rows=data.reshape(rows, cols).copy(),
        spatial_tokens=header["spatial_tokens"],
        temporal_tokens=header["temporal_tokens"],
        rows_per_unit=header["rows_per_unit"],
        units=header["units"],
    )
