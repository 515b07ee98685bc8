"""Three-stage training loop over synthetic grounded-video tasks.

Stage 1 tunes only the feature projectors on captioning. Stage 2 extends
the vocabulary with time tokens and unlocks the embedding table and output
head so those tokens align with video timelines. Stage 3 attaches low-rank
adapters and trains the full task mix.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codec import (
    GroundedEvent,
    TemporalVocab,
    parse_grounded_text,
    render_grounded_text,
    timestamp_to_token,
)
from .encoder import EncoderConfig, stream_rows, synth_features
from .errors import ConfigError, EmptyInputError, InvalidInputError
from .model import (
    ModelConfig,
    StagedModel,
    TrainingExample,
    add_adapters,
    extend_model_vocab,
    generate,
    gradients,
    parameter_group,
    save_checkpoint,
    trainable_mask,
)
from .tokenizer import TextTokenizer

TASKS = ("captioning", "grounding", "dense_captioning", "referring",
         "grounded_qa", "plain_qa")

STAGE_TASKS = {
    1: frozenset({"captioning"}),
    2: frozenset({"grounding", "dense_captioning", "referring"}),
    3: frozenset(TASKS),
}

# stable per-task stream ids so a (video, task, copy) sample is identical
# no matter which stage or evaluation pass asks for it
_TASK_CODES = {t: i + 1 for i, t in enumerate(TASKS)}

TEMPLATES: dict[str, tuple[str, ...]] = {
    "captioning": (
        "Describe the following video concisely.",
        "Provide a brief description of the given video clip.",
        "Offer a succinct explanation of the footage presented.",
        "Summarize the visual content of the following video.",
        "Give a short and clear explanation of the subsequent video clip.",
        "Share a concise interpretation of the video provided.",
        "Present a compact description of the clip's key features.",
        "Relay a brief, clear account of the video shown.",
        "Render a clear and concise summary of the video below.",
        "Write a terse but informative summary of the following video clip.",
    ),
    "grounding": (
        "When does <query> happen in the video?",
        "At what time does the occurrence <query> take place in the video?",
        "During which part of the video does <query> occur?",
        "When in the video does the <query> incident occur?",
        "At which moment does <query> take place in the video?",
        "During which phase of the video does <query> happen?",
        "When does the <query> event occur in the video?",
        "At what time does <query> occur in the video sequence?",
        "When does the <query> situation take place in the video?",
        "At which time interval in the video can we see <query> occurring?",
    ),
    "dense_captioning": (
        "Localize a series of activity events in the video, output the start "
        "and end timestamp for each event, and describe each event with "
        "sentences.",
        "Detect and report the start and end timestamps of activity events in "
        "the video, along with descriptions.",
        "Pinpoint the time intervals of activity events in the video, and "
        "provide descriptions for each event.",
        "Can you compile a list of the activities and their timestamps "
        "featured in the video?",
        "I need you to scrutinize the video and catalog every event it "
        "contains, along with the timestamps.",
    ),
    "referring": (
        "What is happening from <start> to <end>?",
        "What is taking place between <start> and <end>?",
        "What events unfold between <start> and <end>?",
        "What is happening during the period from <start> to <end>?",
        "What occurs between <start> and <end>?",
        "What is going on from <start> to <end>?",
        "How do things progress from <start> to <end>?",
        "Can you describe what happens from <start> to <end>?",
        "Describe the events occurring between <start> and <end>.",
        "Narrate the actions that unfold from <start> to <end>.",
    ),
    "grounded_qa": (
        "Answer the question and report the time interval that supports your "
        "answer. Question: <query>",
        "Reply to the question below and include the matching time interval. "
        "Question: <query>",
        "<query> Respond with the answer and the interval where it is visible.",
    ),
    "plain_qa": (
        "Answer the question briefly. Question: <query>",
        "Give a short answer to the following question. <query>",
        "<query> Answer in a few words.",
    ),
}

SUBJECTS = ("a dog", "a man", "a woman", "a cat", "a bird", "a chef",
            "a kid", "a robot")

ACTIONS = ("runs in the yard", "eats an apple", "plays the guitar",
           "jumps over a box", "reads a book", "paints a wall",
           "kicks a ball", "waves at the camera", "climbs the stairs",
           "opens a door", "stirs a pot", "rides a bike")

_WORD_RE = re.compile(r"[a-z0-9']+")


def default_lexicon() -> list[str]:
    """Every word the synthetic tasks can emit, plus sentence punctuation."""
    words: set[str] = set()
    for templates in TEMPLATES.values():
        for t in templates:
            bare = t.replace("<query>", " ").replace("<start>", " ").replace("<end>", " ")
            words.update(_WORD_RE.findall(bare.lower()))
    for phrase in SUBJECTS + ACTIONS + ("from", "to", "what", "is", "doing", "this", "video"):
        words.update(_WORD_RE.findall(phrase.lower()))
    return sorted(words) + [".", ",", "?", "!"]


# --- synthetic videos ---


@dataclass(frozen=True)
class VideoSpec:
    """A synthetic clip: feature seed, duration in seconds, sorted events."""

    seed: int
    duration: float
    events: tuple[GroundedEvent, ...]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "duration": self.duration,
            "events": [{"start": e.start, "end": e.end, "caption": e.caption}
                       for e in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VideoSpec":
        events = tuple(GroundedEvent(e["start"], e["end"], e["caption"])
                       for e in d["events"])
        return cls(seed=int(d["seed"]), duration=float(d["duration"]), events=events)


def make_video_pool(n: int, seed: int = 0, max_events: int = 1,
                    duration_range: tuple[float, float] = (30.0, 300.0)) -> list[VideoSpec]:
    """Generate n videos with non-overlapping events and globally distinct captions.

    Subjects never repeat within one video, so questions about a subject have
    a single answer.
    """
    if n < 1 or max_events < 1:
        raise InvalidInputError(f"need n >= 1 and max_events >= 1, got {n}, {max_events}")
    rng = np.random.default_rng(seed)
    combos = [(s, a) for s in SUBJECTS for a in ACTIONS]
    order = list(rng.permutation(len(combos)))
    if n * max_events > len(combos):
        raise InvalidInputError(
            f"{n} videos x {max_events} events exceed the {len(combos)} distinct captions")
    videos = []
    for _ in range(n):
        k = int(rng.integers(1, max_events + 1))
        duration = float(rng.uniform(*duration_range))
        # alternate gap/event/gap/... fractions, so events are disjoint with
        # strictly positive lengths and margins
        frac = rng.uniform(0.5, 1.5, 2 * k + 1)
        bounds = np.concatenate([[0.0], np.cumsum(frac)]) / frac.sum() * duration
        picked: list[GroundedEvent] = []
        used_subjects: set[str] = set()
        for i in range(k):
            pos = next((p for p, idx in enumerate(order)
                        if combos[idx][0] not in used_subjects), None)
            if pos is None:
                raise InvalidInputError("ran out of distinct subjects for one video")
            subj, act = combos[order.pop(pos)]
            used_subjects.add(subj)
            picked.append(GroundedEvent(float(bounds[2 * i + 1]), float(bounds[2 * i + 2]),
                                        f"{subj} {act}"))
        videos.append(VideoSpec(seed=int(rng.integers(0, 2**31 - 1)), duration=duration,
                                events=tuple(picked)))
    return videos


def memorization_pool(n: int = 16, seed: int = 7, frames: int = 16, chunks: int = 120,
                      duration_range: tuple[float, float] = (30.0, 300.0)) -> list[VideoSpec]:
    """One-event videos with short events anchored on frame midpoints.

    Video k's event brackets the midpoint of frame k mod `frames`, so every
    clip carries a visible feature signature, the anchors tile the whole
    relative timeline, and each event spans only a few time-token widths;
    both boundary tokens of an answer therefore sit close together and every
    region of the token range gets trained.
    """
    if not 1 <= n <= len(SUBJECTS) * len(ACTIONS):
        raise InvalidInputError(f"pool size {n} out of range")
    rng = np.random.default_rng(seed)
    combos = [(s, a) for s in SUBJECTS for a in ACTIONS]
    order = list(rng.permutation(len(combos)))
    videos = []
    for k in range(n):
        duration = float(rng.uniform(*duration_range))
        mid = (k % frames + 0.5) / frames
        length = float(rng.uniform(2.0, 5.0)) / chunks
        a = mid - float(rng.uniform(0.2, 0.8)) * length
        a = min(max(a, 0.0), 1.0 - length)
        subj, act = combos[order.pop(0)]
        event = GroundedEvent(a * duration, (a + length) * duration, f"{subj} {act}")
        videos.append(VideoSpec(seed=int(rng.integers(0, 2**31 - 1)),
                                duration=duration, events=(event,)))
    return videos


# --- task samples ---


@dataclass(frozen=True)
class TaskSample:
    video: VideoSpec
    task: str
    instruction: str
    answer: str


def instruction_template(task: str, rng: np.random.Generator,
                         query: str | None = None, start: str | None = None,
                         end: str | None = None) -> str:
    """Uniformly pick a prompt template for `task` and fill its slots."""
    templates = TEMPLATES.get(task)
    if templates is None:
        raise InvalidInputError(f"unknown task {task!r}")
    text = templates[int(rng.integers(len(templates)))]
    for slot, value in (("<query>", query), ("<start>", start), ("<end>", end)):
        if slot in text:
            if value is None:
                raise InvalidInputError(f"template for {task!r} needs a {slot} value")
            text = text.replace(slot, value)
    return text


def task_rng(video: VideoSpec, task: str, copy: int = 0) -> np.random.Generator:
    """Canonical sample stream: the same (video, task, copy) everywhere."""
    if task not in _TASK_CODES:
        raise InvalidInputError(f"unknown task {task!r}")
    return np.random.default_rng([video.seed, _TASK_CODES[task], copy])


def _subject(caption: str) -> str:
    return " ".join(caption.split()[:2])


def _action(caption: str) -> str:
    return " ".join(caption.split()[2:])


def _question(event: GroundedEvent) -> str:
    return f"what is {_subject(event.caption)} doing in this video?"


def _shift_offset(copy: int) -> int:
    # copies walk outward from the original interval: 0, -1, +1, -2, +2, ...
    if copy == 0:
        return 0
    magnitude = (copy + 1) // 2
    return -magnitude if copy % 2 == 1 else magnitude


def _shifted(event: GroundedEvent, duration: float, chunks: int,
             offset: int) -> GroundedEvent:
    # slide the whole interval by a fixed number of token widths; the time
    # tokens around each boundary all get seen against the same clip
    width = duration / chunks
    delta = offset * width
    delta = min(max(delta, -event.start), duration - event.end)
    return GroundedEvent(event.start + delta, event.end + delta, event.caption)


def make_task_sample(video: VideoSpec, task: str, vocab: TemporalVocab | None = None,
                     copy: int = 0, rng: np.random.Generator | None = None) -> TaskSample:
    """Render one instruction/answer pair for a video.

    Grounded answers use the clause grammar and are checked to survive a
    parse round trip, so training targets always decode back to the same
    token indices.
    """
    if task not in _TASK_CODES:
        raise InvalidInputError(f"unknown task {task!r}")
    if rng is None:
        rng = task_rng(video, task, copy)
    needs_vocab = task in ("grounding", "dense_captioning", "referring", "grounded_qa")
    if needs_vocab and vocab is None:
        raise ConfigError(f"task {task!r} needs a temporal vocabulary")
    events = video.events
    event = events[int(rng.integers(len(events)))]

    if task == "captioning":
        instruction = instruction_template(task, rng)
        answer = " ".join(f"{e.caption}." for e in events)
    elif task == "grounding":
        instruction = instruction_template(task, rng, query=event.caption)
        answer = render_grounded_text([event], video.duration, vocab)
    elif task == "dense_captioning":
        instruction = instruction_template(task, rng)
        answer = render_grounded_text(list(events), video.duration, vocab)
    elif task == "referring":
        # copies beyond the first ask about a slightly shifted interval with
        # the same wording and the same answer: the description of a moment
        # does not change when its boundaries move by a token or two
        if copy > 0:
            rng = task_rng(video, task, 0)
            rng.integers(len(events))  # stay in step with copy 0's event draw
        shown = _shifted(event, video.duration, vocab.chunks, _shift_offset(copy))
        a = timestamp_to_token(shown.start, video.duration, vocab.chunks)
        b = timestamp_to_token(shown.end, video.duration, vocab.chunks)
        instruction = instruction_template(task, rng, start=f"<{a}>", end=f"<{b}>")
        answer = f"{_action(event.caption)}."
    elif task == "grounded_qa":
        instruction = instruction_template(task, rng, query=_question(event))
        answer = render_grounded_text(
            [GroundedEvent(event.start, event.end, _action(event.caption))],
            video.duration, vocab)
    else:  # plain_qa
        instruction = instruction_template(task, rng, query=_question(event))
        answer = f"{_action(event.caption)}."

    if vocab is not None and "<" in answer:
        parsed = parse_grounded_text(answer, video.duration, vocab)
        if parsed.skipped or render_grounded_text(parsed.events, video.duration,
                                                  vocab) != answer:
            raise InvalidInputError(f"answer does not round-trip: {answer!r}")
    return TaskSample(video=video, task=task, instruction=instruction, answer=answer)


def build_example(sample: TaskSample, vocab: TemporalVocab | None,
                  tokenizer: TextTokenizer, enc_cfg: EncoderConfig) -> TrainingExample:
    """Turn a task sample into a model-ready sequence.

    With an extended vocabulary the video rows sit between the open/close
    markers and a grounding marker precedes the instruction whenever the
    answer carries time tokens; before extension those ids do not exist yet
    and the text follows the video rows directly.
    """
    feats = synth_features(sample.video.seed, enc_cfg, list(sample.video.events),
                           sample.video.duration)
    spatial_rows, temporal_rows = stream_rows(feats, enc_cfg)
    answer_ids = tokenizer.encode(sample.answer, vocab) + [tokenizer.eos_id]
    if tokenizer.unk_id in answer_ids:
        raise InvalidInputError(f"answer words outside vocabulary: {sample.answer!r}")
    instruction_ids = tokenizer.encode(sample.instruction, vocab)
    head_ids: list[int] = []
    pre_ids: list[int] = []
    if vocab is not None:
        head_ids.append(vocab.video_open_id)
        pre_ids.append(vocab.video_close_id)
        if any(vocab.is_temporal_id(i) for i in answer_ids):
            pre_ids.append(vocab.grounded_id)
    pre_ids.extend(instruction_ids)
    return TrainingExample(head_ids=head_ids, pre_ids=pre_ids, answer_ids=answer_ids,
                           spatial_rows=spatial_rows, temporal_rows=temporal_rows)


# --- stage plans ---


@dataclass(frozen=True)
class StagePlan:
    """Task mix, step budget and per-group learning rates for one stage.

    lr_decay is an exponential per-step multiplier on every learning rate
    (1.0 keeps them constant).
    """

    stage: int
    weights: dict[str, float]
    steps: int
    learning_rates: dict[str, float]
    seed: int = 0
    lr_decay: float = 1.0

    def __post_init__(self) -> None:
        if self.stage not in STAGE_TASKS:
            raise ConfigError(f"unknown stage {self.stage!r}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if not (math.isfinite(self.lr_decay) and 0 < self.lr_decay <= 1):
            raise ConfigError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        allowed = STAGE_TASKS[self.stage]
        total = 0.0
        for task, w in self.weights.items():
            if task not in _TASK_CODES:
                raise ConfigError(f"unknown task {task!r}")
            if task not in allowed:
                raise ConfigError(f"task {task!r} not available at stage {self.stage}")
            if not (math.isfinite(w) and w >= 0):
                raise ConfigError(f"weight for {task!r} must be >= 0, got {w}")
            total += w
        if total <= 0:
            raise ConfigError("task weights must sum to something positive")
        for group, lr in self.learning_rates.items():
            if not (math.isfinite(lr) and lr >= 0):
                raise ConfigError(f"learning rate for {group!r} must be >= 0, got {lr}")

    def to_dict(self) -> dict:
        return {"stage": self.stage, "weights": dict(self.weights), "steps": self.steps,
                "learning_rates": dict(self.learning_rates), "seed": self.seed,
                "lr_decay": self.lr_decay}

    @classmethod
    def from_dict(cls, d: dict) -> "StagePlan":
        try:
            return cls(stage=int(d["stage"]), weights=dict(d["weights"]),
                       steps=int(d["steps"]), learning_rates=dict(d["learning_rates"]),
                       seed=int(d.get("seed", 0)), lr_decay=float(d.get("lr_decay", 1.0)))
        except KeyError as e:
            raise ConfigError(f"stage plan missing field {e}") from e


def load_plans(path: str | Path) -> list[StagePlan]:
    """Read stage plans from a JSON file holding a list or {"plans": [...]}."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read stage plans from {path}: {e}") from e
    if isinstance(data, dict):
        data = data.get("plans")
    if not isinstance(data, list) or not data:
        raise ConfigError(f"{path}: expected a non-empty list of stage plans")
    return [StagePlan.from_dict(d) for d in data]


def save_plans(plans: list[StagePlan], path: str | Path) -> None:
    Path(path).write_text(json.dumps({"plans": [p.to_dict() for p in plans]}, indent=2) + "\n")


# --- training ---


def _copies(weight: float, rng: np.random.Generator) -> int:
    whole = int(math.floor(weight))
    frac = weight - whole
    return whole + (1 if frac > 0 and rng.random() < frac else 0)


def stage_batch(plan: StagePlan, pool: list[VideoSpec],
                vocab: TemporalVocab | None) -> list[TaskSample]:
    """The deterministic full batch a stage trains on."""
    rng = np.random.default_rng([plan.seed, plan.stage])
    samples = []
    for video in pool:
        for task in TASKS:
            weight = plan.weights.get(task, 0.0)
            if weight <= 0:
                continue
            for copy in range(_copies(weight, rng)):
                samples.append(make_task_sample(video, task, vocab, copy=copy))
    if not samples:
        raise EmptyInputError("stage batch is empty")
    return samples


def run_stage(model: StagedModel, plan: StagePlan, pool: list[VideoSpec],
              tokenizer: TextTokenizer, enc_cfg: EncoderConfig,
              notes: dict | None = None) -> list[dict]:
    """Full-batch gradient descent for one stage; the model mutates in place.

    Only parameter groups inside the stage mask are touched, so frozen
    tensors stay bitwise identical. Returns the log records.
    """
    if plan.stage >= 2 and model.vocab is None:
        raise ConfigError(f"stage {plan.stage} needs an extended vocabulary")
    if plan.stage == 3 and not model.has_adapters:
        raise ConfigError("stage 3 needs adapters attached")
    samples = stage_batch(plan, pool, model.vocab)
    examples = [build_example(s, model.vocab, tokenizer, enc_cfg) for s in samples]
    allowed = trainable_mask(plan.stage)
    adapter_params = model.parameter_count("adapters") if model.has_adapters else 0
    records: list[dict] = [{
        "event": "stage_start",
        "stage": plan.stage,
        "examples": len(examples),
        "steps": plan.steps,
        "trainable": sorted(allowed),
        "adapter_params": adapter_params,
        **(notes or {}),
    }]
    lr_of = {name: plan.learning_rates.get(parameter_group(name),
                                           plan.learning_rates.get("default", 0.0))
             for name in model.params}
    live = [name for name in sorted(model.params)
            if parameter_group(name) in allowed and lr_of[name] > 0]
    for step in range(plan.steps):
        acc = {name: np.zeros_like(model.params[name]) for name in live}
        total = 0.0
        for ex in examples:
            value, grads = gradients(model, ex, stage=plan.stage, reduction="mean")
            total += value
            for name in live:
                acc[name] += grads[name]
        mean_loss = total / len(examples)
        records.append({"event": "step", "stage": plan.stage, "step": step,
                        "loss": mean_loss})
        scale = (plan.lr_decay ** step) / len(examples)
        for name in live:
            model.params[name] -= (lr_of[name] * scale) * acc[name]
    model.stage = plan.stage
    return records


def run_curriculum(model: StagedModel, plans: list[StagePlan], pool: list[VideoSpec],
                   tokenizer: TextTokenizer, enc_cfg: EncoderConfig,
                   vocab: TemporalVocab, out_dir: str | Path | None = None,
                   adapter_rank: int = 4, adapter_alpha: float = 8.0,
                   seed: int = 0) -> list[dict]:
    """Run stages in ascending order, growing the model at stage boundaries.

    The vocabulary extends exactly once, entering the first stage >= 2; if
    that first grounded stage is stage 3 the alignment stage was skipped and
    the log says so. Adapters attach entering stage 3. Writes stage{n}.ckpt
    after each stage when out_dir is given.
    """
    if not plans:
        raise ConfigError("no stage plans given")
    stages = [p.stage for p in plans]
    if stages != sorted(stages) or len(set(stages)) != len(stages):
        raise ConfigError(f"stages must be strictly ascending, got {stages}")
    if vocab.base_size != model.cfg.base_vocab:
        raise ConfigError(f"vocab base {vocab.base_size} != model base "
                          f"{model.cfg.base_vocab}")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    records: list[dict] = []
    for plan in plans:
        notes: dict = {}
        if plan.stage >= 2 and model.vocab is None:
            extend_model_vocab(model, vocab, seed=seed)
            notes["vocab_extended_to"] = vocab.total_size
            if plan.stage > 2:
                notes["alignment_skipped"] = True
        if plan.stage == 3 and not model.has_adapters:
            notes["adapter_params_added"] = add_adapters(model, adapter_rank,
                                                         adapter_alpha, seed=seed)
        records.extend(run_stage(model, plan, pool, tokenizer, enc_cfg, notes=notes))
        if out is not None:
            save_checkpoint(model, out / f"stage{plan.stage}.ckpt")
    return records


def write_log(records: list[dict], path: str | Path) -> None:
    Path(path).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def grounding_exact_match(model: StagedModel, pool: list[VideoSpec],
                          tokenizer: TextTokenizer, enc_cfg: EncoderConfig,
                          max_new: int = 24) -> float:
    """Fraction of canonical grounding prompts whose generated time tokens
    equal the target's, in order."""
    if model.vocab is None:
        raise ConfigError("model has no temporal vocabulary to ground with")
    if not pool:
        raise EmptyInputError("empty video pool")
    vocab = model.vocab
    hits = 0
    for video in pool:
        sample = make_task_sample(video, "grounding", vocab, copy=0)
        ex = build_example(sample, vocab, tokenizer, enc_cfg)
        gold = [i for i in ex.answer_ids if vocab.is_temporal_id(i)]
        got = [i for i in generate(model, ex, max_new=max_new)
               if vocab.is_temporal_id(i)]
        hits += got == gold
    return hits / len(pool)


# --- desk-scale defaults shared by the command line and the test gate ---


def toy_encoder_config(embed_dim: int = 32) -> EncoderConfig:
    return EncoderConfig(frames=16, segments=4,
                         spatial_height=2, spatial_width=2, spatial_channels=6,
                         spatial_pool=2,
                         temporal_height=2, temporal_width=2, temporal_channels=4,
                         temporal_pool=2,
                         embed_dim=embed_dim)


def toy_model_config(tokenizer: TextTokenizer, max_len: int = 96) -> ModelConfig:
    return ModelConfig(d_model=48, n_heads=4, n_blocks=2, d_ff=96, max_len=max_len,
                       base_vocab=tokenizer.size, spatial_channels=6,
                       temporal_channels=4, eos_id=tokenizer.eos_id)


def default_plans(seed: int = 0, stages: tuple[int, ...] = (1, 2, 3)) -> list[StagePlan]:
    # Steps and rates sized for the 16-video toy pool: the alignment stage
    # leans hard on the referring copies (weight 7) because their shifted
    # intervals are what spreads training signal across neighbouring
    # temporal tokens.
    all_plans = {
        1: StagePlan(stage=1, weights={"captioning": 1.0}, steps=30,
                     learning_rates={"projectors": 0.05}, seed=seed),
        2: StagePlan(stage=2,
                     weights={"grounding": 2.0, "dense_captioning": 1.0, "referring": 7.0},
                     steps=480,
                     learning_rates={"projectors": 0.1, "embed": 1.0, "head": 1.0},
                     seed=seed),
        3: StagePlan(stage=3,
                     weights={"captioning": 1.0, "grounding": 2.0, "dense_captioning": 1.0,
                              "referring": 2.0, "grounded_qa": 1.0, "plain_qa": 1.0},
                     steps=240,
                     learning_rates={"projectors": 0.05, "embed": 0.3, "head": 0.3,
                                     "adapters": 0.1},
                     seed=seed),
    }
    unknown = [s for s in stages if s not in all_plans]
    if unknown:
        raise ConfigError(f"unknown stages {unknown}")
    return [all_plans[s] for s in stages]
