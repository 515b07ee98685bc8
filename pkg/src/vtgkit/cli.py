"""Command line interface.

Subcommands: codec, encode, train, eval, datagen, viz. Every JSON payload
carries a provenance footer (config hash, seed, toolkit version), reports
land next to their figures, and exit codes follow one contract: 0 success,
1 runtime failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .codec import (
    parse_grounded_text,
    read_events_jsonl,
    render_grounded_text,
    timestamp_to_token,
    token_to_timestamp,
    vocab_layout,
)
from .curriculum import (
    StagePlan,
    VideoSpec,
    build_example,
    default_lexicon,
    default_plans,
    grounding_exact_match,
    make_task_sample,
    memorization_pool,
    run_curriculum,
    toy_encoder_config,
    toy_model_config,
    write_log,
)
from .datagen import (
    DatagenConfig,
    HttpChatClient,
    HttpEmbeddingClient,
    StubChatClient,
    StubEmbeddingClient,
    read_annotations,
    run_pipeline,
)
from .encoder import EncoderConfig, load_config, stream_rows, synth_features, token_budget
from .errors import (
    ConfigError,
    InputError,
    InvalidInputError,
    SchemaError,
    ToolkitError,
)
from .introspect import (
    adjacency_distances,
    aggregate_attention,
    emit_plot_data,
    pca,
    temporal_token_embeddings,
)
from .metrics import evaluate_dataset, interval_iou, recall_suite
from .model import StagedModel, attention_maps, generate, load_checkpoint
from .plots import (
    plot_frame_weights,
    plot_gap_curve,
    plot_iou_histogram,
    plot_loss,
    plot_projection,
)
from .tokenizer import TextTokenizer

TIMESTAMP_REQUEST = "Provide the timestamps that correspond to your answer."

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


# --- run configuration ---


@dataclass(frozen=True)
class RunConfig:
    """Defaults shared across subcommands; flags override fields."""

    seed: int = 0
    chunks: int = 120
    out_dir: str = "runs"
    pool_size: int = 16
    pool_seed: int = 7
    encoder: EncoderConfig | None = None
    plans: tuple[StagePlan, ...] | None = None
    datagen: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.chunks < 1:
            raise ConfigError(f"chunks must be >= 1, got {self.chunks}")
        if self.pool_size < 1:
            raise ConfigError(f"pool_size must be >= 1, got {self.pool_size}")

    def resolved_encoder(self) -> EncoderConfig:
        return self.encoder if self.encoder is not None else toy_encoder_config()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "chunks": self.chunks, "out_dir": self.out_dir,
            "pool_size": self.pool_size, "pool_seed": self.pool_seed,
            "encoder": self.encoder.to_dict() if self.encoder else None,
            "plans": [p.to_dict() for p in self.plans] if self.plans else None,
            "datagen": self.datagen,
        }


def _interp_env(value):
    # ${NAME} substitution, applied only inside the datagen client section
    # so secrets stay out of config files
    if isinstance(value, str):
        def sub(m):
            name = m.group(1)
            if name not in os.environ:
                raise ConfigError(f"environment variable {name} is not set")
            return os.environ[name]
        return _ENV_RE.sub(sub, value)
    if isinstance(value, dict):
        return {k: _interp_env(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interp_env(v) for v in value]
    return value


_RUN_KEYS = {"seed", "chunks", "out_dir", "pool_size", "pool_seed", "encoder",
             "plans", "datagen"}


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    unknown = sorted(set(data) - _RUN_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    kwargs: dict = {k: data[k] for k in ("seed", "chunks", "out_dir", "pool_size",
                                         "pool_seed") if k in data}
    if data.get("encoder") is not None:
        kwargs["encoder"] = EncoderConfig.from_dict(data["encoder"])
    if data.get("plans") is not None:
        kwargs["plans"] = tuple(StagePlan.from_dict(p) for p in data["plans"])
    if data.get("datagen") is not None:
        kwargs["datagen"] = _interp_env(data["datagen"])
    return RunConfig(**kwargs)


def _provenance(config: dict, seed: int) -> dict:
    blob = json.dumps(config, sort_keys=True, default=str)
    return {"config_hash": hashlib.sha256(blob.encode()).hexdigest()[:12],
            "seed": seed, "version": __version__}


def _emit(payload: dict, out: str | None = None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)


def _toolkit_objects(cfg: RunConfig):
    tok = TextTokenizer(default_lexicon())
    vocab = vocab_layout(tok.size, cfg.chunks)
    enc = cfg.resolved_encoder()
    return tok, vocab, enc


def _pool(cfg: RunConfig, enc: EncoderConfig):
    return memorization_pool(cfg.pool_size, seed=cfg.pool_seed,
                             frames=enc.frames, chunks=cfg.chunks)


# --- codec ---


def cmd_codec(args) -> int:
    prov = _provenance({"cmd": "codec", "sub": args.codec_cmd,
                        "chunks": getattr(args, "chunks", None)}, 0)
    if args.codec_cmd == "encode":
        token = timestamp_to_token(args.tau, args.duration, args.chunks)
        _emit({"token": token, "provenance": prov}, args.out)
    elif args.codec_cmd == "decode":
        tau = token_to_timestamp(args.token, args.duration, args.chunks)
        _emit({"timestamp": tau, "provenance": prov}, args.out)
    elif args.codec_cmd == "render":
        events = read_events_jsonl(args.events)
        vocab = vocab_layout(1, args.chunks)
        text = render_grounded_text(events, args.duration, vocab)
        _emit({"text": text, "provenance": prov}, args.out)
    elif args.codec_cmd == "parse":
        text = args.text if args.text is not None else sys.stdin.read()
        vocab = vocab_layout(1, args.chunks)
        parsed = parse_grounded_text(text, args.duration, vocab)
        _emit({"events": [{"start": e.start, "end": e.end, "caption": e.caption}
                          for e in parsed.events],
               "skipped": parsed.skipped, "provenance": prov}, args.out)
    else:  # budget
        enc = load_config(args.config) if args.config else toy_encoder_config()
        prov = _provenance(enc.to_dict(), 0)
        _emit({"budget": token_budget(enc), "provenance": prov}, args.out)
    return 0


# --- encode ---


def _read_video(path: str) -> VideoSpec:
    try:
        return VideoSpec.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{path}: bad video spec: {e}") from e


def cmd_encode(args) -> int:
    enc = load_config(args.encoder) if args.encoder else toy_encoder_config()
    video = _read_video(args.video)
    feats = synth_features(video.seed, enc, list(video.events), video.duration)
    spatial, temporal = stream_rows(feats, enc)
    arrays = {}
    if spatial is not None:
        arrays["spatial"] = np.stack(spatial)
    if temporal is not None:
        arrays["temporal"] = np.stack(temporal)
    np.savez(args.out, **arrays)
    payload = {
        "out": args.out,
        "budget": token_budget(enc),
        "units": len(spatial or temporal or []),
        "shapes": {k: list(v.shape) for k, v in arrays.items()},
        "provenance": _provenance(enc.to_dict(), video.seed),
    }
    _emit(payload)
    return 0


# --- train ---


def _parse_stages(text: str) -> tuple[int, ...]:
    try:
        stages = tuple(int(s) for s in text.split(","))
    except ValueError as e:
        raise InvalidInputError(f"bad --stages value {text!r}") from e
    if not stages:
        raise InvalidInputError("--stages is empty")
    return stages


def _select_plans(cfg: RunConfig, stages: tuple[int, ...], seed: int) -> list[StagePlan]:
    if cfg.plans is None:
        return default_plans(seed=seed, stages=stages)
    by_stage = {p.stage: p for p in cfg.plans}
    missing = [s for s in stages if s not in by_stage]
    if missing:
        raise ConfigError(f"config has no plan for stages {missing}")
    return [by_stage[s] for s in stages]


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    out_dir = Path(args.out_dir if args.out_dir is not None else cfg.out_dir)
    stages = _parse_stages(args.stages)
    plans = _select_plans(cfg, stages, seed)
    tok, vocab, enc = _toolkit_objects(cfg)
    pool = _pool(cfg, enc)
    model = StagedModel(toy_model_config(tok), seed=seed)
    records = run_curriculum(model, plans, pool, tok, enc, vocab,
                             out_dir=out_dir, seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "log.jsonl"
    write_log(records, log_path)
    figure = plot_loss(records, out_dir / "loss.png")
    losses = [r["loss"] for r in records if r["event"] == "step"]
    em = (grounding_exact_match(model, pool, tok, enc)
          if model.vocab is not None else None)
    payload = {
        "stages": [p.stage for p in plans],
        "steps": len(losses),
        "final_loss": losses[-1],
        "exact_match": em,
        "checkpoints": [str(out_dir / f"stage{p.stage}.ckpt") for p in plans],
        "log": str(log_path),
        "figure": str(figure),
        "provenance": _provenance({**cfg.to_dict(), "stages": list(stages)}, seed),
    }
    _emit(payload, args.out)
    return 0


# --- eval ---


def _check_gqa_protocol(gold_path: str) -> None:
    # datagen-style gold records carry conversations; their second user
    # turn must be the fixed timestamp request
    for ln, line in enumerate(Path(gold_path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        rounds = rec.get("rounds")
        if rounds is None:
            continue
        if (len(rounds) < 4 or rounds[2].get("role") != "user"
                or rounds[2].get("content") != TIMESTAMP_REQUEST):
            raise SchemaError(
                f"{gold_path}:{ln}: conversation does not follow the "
                f"two-round protocol")


def _eval_files(args, cfg: RunConfig) -> dict:
    if args.task == "gqa":
        _check_gqa_protocol(args.gold)
    report = evaluate_dataset(args.task, args.pred, args.gold)
    return report.to_dict()


def _eval_checkpoint(args, cfg: RunConfig) -> dict:
    if args.task != "grounding":
        raise InvalidInputError(
            "checkpoint evaluation supports --task grounding only")
    model = load_checkpoint(args.checkpoint)
    if model.vocab is None:
        raise ConfigError("checkpoint has no temporal vocabulary")
    tok = TextTokenizer(default_lexicon())
    if model.cfg.base_vocab != tok.size:
        raise ConfigError("checkpoint vocabulary does not match the lexicon")
    enc = cfg.resolved_encoder()
    pool = memorization_pool(cfg.pool_size, seed=cfg.pool_seed,
                             frames=enc.frames, chunks=model.vocab.chunks)
    vocab = model.vocab
    pairs = []
    per_sample = []
    exact = 0
    for k, video in enumerate(pool):
        sample = make_task_sample(video, "grounding", vocab, copy=0)
        ex = build_example(sample, vocab, tok, enc)
        gold_ids = [i for i in ex.answer_ids if vocab.is_temporal_id(i)]
        got_ids = [i for i in generate(model, ex, max_new=24)
                   if vocab.is_temporal_id(i)]
        exact += got_ids == gold_ids
        gold = (video.events[0].start, video.events[0].end)
        if len(got_ids) >= 2:
            pred = (token_to_timestamp(vocab.temporal_index(got_ids[0]),
                                       video.duration, vocab.chunks),
                    token_to_timestamp(vocab.temporal_index(got_ids[1]),
                                       video.duration, vocab.chunks))
            iou = interval_iou(pred, gold)
        else:
            pred = None
            iou = 0.0
        pairs.append((pred, gold))
        per_sample.append({"id": f"video{k}", "iou": iou, "pred": pred})
    scored = [(p, g) for p, g in pairs if p is not None]
    metrics = recall_suite(scored) if scored else \
        {"R@0.3": 0.0, "R@0.5": 0.0, "R@0.7": 0.0, "mIoU": 0.0}
    if len(scored) < len(pairs):
        # unparseable generations count as misses
        frac = len(scored) / len(pairs)
        metrics = {k: v * frac for k, v in metrics.items()}
    metrics["exact_match"] = exact / len(pool)
    return {"task": "grounding", "metrics": metrics, "num_samples": len(pool),
            "per_sample": per_sample, "notes": {"source": "checkpoint"}}


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    if args.checkpoint is not None:
        report = _eval_checkpoint(args, cfg)
        hashed = {"task": args.task, "checkpoint": args.checkpoint,
                  **cfg.to_dict()}
    else:
        if not (args.pred and args.gold):
            raise InvalidInputError("file evaluation needs --pred and --gold")
        report = _eval_files(args, cfg)
        hashed = {"task": args.task, "pred": args.pred, "gold": args.gold}
    report["provenance"] = _provenance(hashed, cfg.seed)
    _emit(report, args.out)
    if args.out is not None:
        ious = [s["iou"] for s in report.get("per_sample", []) if "iou" in s]
        if ious:
            out = Path(args.out)
            figure = plot_iou_histogram(ious, out.with_name(out.stem + "_iou.png"))
            sys.stderr.write(f"figure: {figure}\n")
    return 0


# --- datagen ---


def cmd_datagen(args) -> int:
    cfg = load_run_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    dg = dict(cfg.datagen)
    stub = args.stub or dg.get("mode", "stub") == "stub"
    if stub:
        chat, embed = StubChatClient(), StubEmbeddingClient()
    else:
        try:
            chat_spec, embed_spec = dg["chat"], dg["embed"]
            chat = HttpChatClient(chat_spec["base_url"], chat_spec["model"],
                                  api_key_env=chat_spec.get("api_key_env",
                                                            "OPENAI_API_KEY"))
            embed = HttpEmbeddingClient(embed_spec["base_url"], embed_spec["model"],
                                        api_key_env=embed_spec.get("api_key_env",
                                                                   "OPENAI_API_KEY"))
        except KeyError as e:
            raise ConfigError(f"datagen config missing {e}") from e
    knobs = {k: v for k, v in dg.items()
             if k in ("top_k", "band", "n_distractors", "max_retries", "backoff",
                      "max_answer_words")}
    if "band" in knobs:
        knobs["band"] = tuple(knobs["band"])
    dcfg = DatagenConfig(seed=seed, chunks=cfg.chunks, **knobs)
    annotations = read_annotations(args.annotations)
    records, stats = run_pipeline(annotations, chat, embed, dcfg,
                                  out_path=args.out)
    payload = {
        "out": args.out,
        "stats": {k: v for k, v in stats.items() if k != "skips"},
        "provenance": _provenance({"datagen": dg, "chunks": cfg.chunks,
                                   "stub": stub}, seed),
    }
    _emit(payload)
    for s in stats["skips"]:
        sys.stderr.write(f"skip {s['index']} ({s['video_id']}): {s['reason']}\n")
    if stats["generated"] == 0:
        sys.stderr.write("error: no records generated\n")
        return 1
    return 0


# --- viz ---


def _load_vector(path: str) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}") from e
    arr = np.asarray(data, dtype=float)
    if arr.ndim not in (1, 2):
        raise InvalidInputError(f"{path}: expected a 1D or 2D array")
    return arr


def _grounding_attention(args, cfg: RunConfig, enc: EncoderConfig) -> np.ndarray:
    """Attention row of the position that emits the first time token."""
    model = load_checkpoint(args.checkpoint)
    if model.vocab is None:
        raise ConfigError("checkpoint has no temporal vocabulary")
    tok = TextTokenizer(default_lexicon())
    if model.cfg.base_vocab != tok.size:
        raise ConfigError("checkpoint vocabulary does not match the lexicon")
    vocab = model.vocab
    video = _read_video(args.video)
    sample = make_task_sample(video, "grounding", vocab, copy=0)
    ex = build_example(sample, vocab, tok, enc)
    attn = attention_maps(model, ex)[-1]
    n = attn.shape[-1]
    first_temporal = next(i for i, t in enumerate(ex.answer_ids)
                          if vocab.is_temporal_id(t))
    row = n - len(ex.answer_ids) + first_temporal - 1
    col0 = len(ex.head_ids)
    return attn[:, row, col0:col0 + token_budget(enc)]


def cmd_viz(args) -> int:
    cfg = load_run_config(args.config)
    out_dir = Path(args.out_dir if args.out_dir is not None else cfg.out_dir)
    enc = (load_config(args.encoder) if getattr(args, "encoder", None)
           else cfg.resolved_encoder())
    if args.viz_cmd == "attn":
        if args.vector is not None:
            weights = _load_vector(args.vector)
        elif args.checkpoint is not None and args.video is not None:
            weights = _grounding_attention(args, cfg, enc)
        else:
            raise InvalidInputError("viz attn needs --vector, or --checkpoint "
                                    "with --video")
        frames = aggregate_attention(weights, enc, head_reduce=args.heads)
        # inputs are valid from here on, so creating the directory is safe
        out_dir.mkdir(parents=True, exist_ok=True)
        csv = emit_plot_data(frames, out_dir / "frame_weights.csv")
        figure = plot_frame_weights(frames, out_dir / "frame_weights.png")
        payload = {"csv": str(csv), "figure": str(figure),
                   "frames": int(frames.size),
                   "provenance": _provenance(enc.to_dict(), cfg.seed)}
    elif args.viz_cmd == "pca":
        model = load_checkpoint(args.checkpoint)
        emb = temporal_token_embeddings(model)
        proj = pca(emb, args.dims)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv = emit_plot_data(proj, out_dir / f"pca_{args.dims}d.csv")
        figure = plot_projection(proj, out_dir / f"pca_{args.dims}d.png")
        payload = {"csv": str(csv), "figure": str(figure),
                   "explained": [float(v) for v in proj.explained],
                   "provenance": _provenance({"checkpoint": args.checkpoint,
                                              "dims": args.dims}, cfg.seed)}
    else:  # adjacency
        model = load_checkpoint(args.checkpoint)
        emb = temporal_token_embeddings(model)
        near, far = adjacency_distances(emb, near=args.near, far=args.far)
        out_dir.mkdir(parents=True, exist_ok=True)
        dist = np.linalg.norm(emb[:, None, :] - emb[None, :, :], axis=-1)
        n = emb.shape[0]
        i, j = np.triu_indices(n, k=1)
        gaps = np.arange(1, n)
        means = np.array([dist[i[j - i == g], j[j - i == g]].mean() for g in gaps])
        csv = out_dir / "gap_distances.csv"
        csv.write_text("gap,mean_distance\n" + "".join(
            f"{g},{m:.17g}\n" for g, m in zip(gaps, means)))
        figure = plot_gap_curve(gaps, means, out_dir / "gap_distances.png")
        payload = {"near_mean": near, "far_mean": far, "ordered": near < far,
                   "csv": str(csv), "figure": str(figure),
                   "provenance": _provenance({"checkpoint": args.checkpoint,
                                              "near": args.near,
                                              "far": args.far}, cfg.seed)}
    _emit(payload, getattr(args, "out", None))
    return 0


# --- parser ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vtgkit",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    codec = sub.add_parser("codec", help="time-token encode/decode and "
                                         "grounded text")
    csub = codec.add_subparsers(dest="codec_cmd", required=True)
    enc_p = csub.add_parser("encode")
    enc_p.add_argument("--tau", type=float, required=True)
    dec_p = csub.add_parser("decode")
    dec_p.add_argument("--token", type=int, required=True)
    ren_p = csub.add_parser("render")
    ren_p.add_argument("--events", required=True, help="events JSONL")
    par_p = csub.add_parser("parse")
    par_p.add_argument("--text", default=None, help="grounded text (default stdin)")
    for p in (enc_p, dec_p, ren_p, par_p):
        p.add_argument("--duration", type=float, required=True)
        p.add_argument("--chunks", type=int, required=True)
        p.add_argument("--out", default=None)
    bud_p = csub.add_parser("budget")
    bud_p.add_argument("--config", default=None, help="encoder config JSON")
    bud_p.add_argument("--out", default=None)
    codec.set_defaults(func=cmd_codec)

    encode = sub.add_parser("encode", help="synthesize and pool video features")
    encode.add_argument("--video", required=True, help="video spec JSON")
    encode.add_argument("--encoder", default=None, help="encoder config JSON")
    encode.add_argument("--out", required=True, help="output NPZ path")
    encode.set_defaults(func=cmd_encode)

    train = sub.add_parser("train", help="run the staged curriculum")
    train.add_argument("--config", default=None, help="run config JSON")
    train.add_argument("--stages", default="1,2,3")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--out-dir", default=None)
    train.add_argument("--out", default=None, help="also write the report here")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score predictions or a checkpoint")
    ev.add_argument("--task", required=True,
                    choices=("grounding", "dense", "gqa"))
    ev.add_argument("--pred", default=None)
    ev.add_argument("--gold", default=None)
    ev.add_argument("--checkpoint", default=None)
    ev.add_argument("--config", default=None)
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_eval)

    dg = sub.add_parser("datagen", help="generate grounded QA records")
    dg.add_argument("--annotations", required=True)
    dg.add_argument("--out", required=True)
    dg.add_argument("--stub", action="store_true",
                    help="force offline stub clients")
    dg.add_argument("--config", default=None)
    dg.add_argument("--seed", type=int, default=None)
    dg.set_defaults(func=cmd_datagen)

    viz = sub.add_parser("viz", help="attention and embedding plots")
    vsub = viz.add_subparsers(dest="viz_cmd", required=True)
    attn = vsub.add_parser("attn")
    attn.add_argument("--vector", default=None, help="attention JSON array")
    attn.add_argument("--checkpoint", default=None)
    attn.add_argument("--video", default=None, help="video spec JSON")
    attn.add_argument("--encoder", default=None)
    attn.add_argument("--heads", default="mean", choices=("mean", "max"))
    pca_p = vsub.add_parser("pca")
    pca_p.add_argument("--checkpoint", required=True)
    pca_p.add_argument("--dims", type=int, default=2, choices=(1, 2, 3))
    adj = vsub.add_parser("adjacency")
    adj.add_argument("--checkpoint", required=True)
    adj.add_argument("--near", type=int, default=5)
    adj.add_argument("--far", type=int, default=100)
    for p in (attn, pca_p, adj):
        p.add_argument("--config", default=None)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--out", default=None)
    viz.set_defaults(func=cmd_viz)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return int(args.func(args) or 0)
    except InputError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except ToolkitError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except OSError as e:
        # unreadable/missing paths are caller mistakes, not crashes
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
