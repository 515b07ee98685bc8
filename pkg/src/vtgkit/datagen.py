"""Grounded VideoQA generation over segment annotations.

A chat backend picks one described segment per video and writes a
question-answer pair for it. Distractors come from the answers of
similar prior questions, filtered to a cosine band so they are related
but not paraphrases. Each surviving QA becomes a two-round record:
multiple choice first, then a timestamp request answered with time
tokens.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Protocol

import numpy as np

from .codec import timestamp_to_token
from .errors import (
    ClientError,
    ConfigError,
    EmptyInputError,
    GenerationFormatError,
    InsufficientDistractorsError,
    InvalidInputError,
    SchemaError,
)

OPTION_LETTERS = ("A", "B", "C", "D", "E")

TIMESTAMP_REQUEST = "Provide the timestamps that correspond to your answer."

SYSTEM_PROMPT = (
    "You are a good question generator. I need your help in generating "
    "question-answer pairs pertaining to the visual event descriptions. I "
    "have a video and I will provide you with descriptions of certain "
    "segments and their corresponding timestamps within this video. You need "
    "to consider these segments comprehensively based on the given "
    "description and timestamps and select one segment which you think can "
    "provide a HIGH-QUALITY QUESTION. Based on the description of that "
    "segment, ask a question related to that segment, as well as one correct "
    "answer. Both the proposed answer and question should be consistent with "
    "the content of the give description. BE CAREFUL! Your proposed "
    "questions and answers should follow these rules:\n"
    "(0) Avoid choosing the segment spanning across the whole video.\n"
    "(1) The question you raised should include causal and temporal "
    "relationships as much as possible. Question types should be diverse "
    "including WHY, HOW, WHAT, WHERE, etc.\n"
    "(2) NEVER involve anything that is not covered in the given "
    "descriptions.\n"
    "(3) The answer should NEVER appear in your question.\n"
    "(4) Your answer should be a phrase no more than 7 words. Keep your "
    "answers concise and accurate."
)

DEMO_USER = (
    "video duration: 82.73 seconds\n"
    "segment-1: [0.83, 19.86] A young woman is seen standing in a room and "
    "leads into her dancing.\n"
    "segment-2: [17.37, 60.81] The girl dances around the room while the "
    "camera captures her movements.\n"
    "segment-3: [56.26, 79.42] She continues dancing around the room and "
    "ends by laying on the floor."
)

DEMO_RESPONSE = (
    "chosen segment: segment-3\n"
    "segment timestamps: [56.26, 79.42]\n"
    "question: What did the girl do after she ended dancing?\n"
    "answer: lay on the floor"
)


# --- domain types ---


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    description: str


@dataclass(frozen=True)
class SegmentAnnotation:
    """One video's described segments; intervals must sit inside [0, duration]."""

    video_id: str
    duration: float
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise InvalidInputError(f"duration must be positive, got {self.duration}")
        for s in self.segments:
            if not (0.0 <= s.start <= s.end <= self.duration):
                raise InvalidInputError(
                    f"segment [{s.start}, {s.end}] outside [0, {self.duration}]")
            if not s.description.strip():
                raise InvalidInputError("segment has an empty description")


def _normalize(text: str) -> str:
    return " ".join(text.lower().split()).rstrip(".!? ").strip()


@dataclass(frozen=True)
class GeneratedQa:
    """A parsed generation, later completed with its sampled distractors."""

    segment_index: int  # 1-based, as written in the response
    start: float
    end: float
    question: str
    answer: str
    distractors: tuple[str, ...] = ()
    model_id: str = ""
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.question.strip() or not self.answer.strip():
            raise InvalidInputError("question and answer must be non-empty")
        if self.distractors:
            if len(self.distractors) != 4:
                raise InvalidInputError(
                    f"need exactly 4 distractors, got {len(self.distractors)}")
            norm = _normalize(self.answer)
            if any(_normalize(d) == norm for d in self.distractors):
                raise InvalidInputError("a distractor repeats the answer")


# --- clients ---


class ChatClient(Protocol):
    def chat(self, messages: list[dict]) -> str: ...


class EmbeddingClient(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


def _hash_int(text: str) -> int:
    return int.from_bytes(hashlib.md5(text.encode()).digest()[:8], "big")


class StubChatClient:
    """Offline generator for tests and dry runs.

    Picks a segment by hashing the prompt, asks about its opening words
    and answers with its closing words, so output is a pure function of
    the input messages.
    """

    model_id = "stub-chat"

    def chat(self, messages: list[dict]) -> str:
        user = messages[-1]["content"]
        segs = re.findall(r"(?m)^segment-(\d+): \[([0-9.]+), ([0-9.]+)\] (.+)$", user)
        if not segs:
            raise ClientError("prompt has no segment lines")
        idx, a, b, desc = segs[_hash_int(user) % len(segs)]
        words = re.sub(r"[.!?]+$", "", desc).split()
        return (f"chosen segment: segment-{idx}\n"
                f"segment timestamps: [{a}, {b}]\n"
                f"question: What happens after {' '.join(words[:3])}?\n"
                f"answer: {' '.join(words[-7:])}")


class StubEmbeddingClient:
    """Hashed bag-of-words unit vectors; same text always maps to the
    same vector."""

    model_id = "stub-embed"

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ConfigError(f"embedding dim must be >= 2, got {dim}")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim)
        for w in re.findall(r"[a-z0-9']+", text.lower()):
            h = _hash_int(w)
            v[h % self.dim] += 1.0 if (h >> 8) % 2 == 0 else -1.0
        n = float(np.linalg.norm(v))
        if n == 0.0:
            v[0] = 1.0
            n = 1.0
        return v / n


class HttpChatClient:
    """Chat-completions backend; the auth token stays in the environment."""

    def __init__(self, base_url: str, model: str, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.model_id = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def _headers(self) -> dict:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}"}

    def chat(self, messages: list[dict]) -> str:
        headers = self._headers()
        import requests
        try:
            r = requests.post(f"{self.base_url}/chat/completions",
                              json={"model": self.model, "messages": messages},
                              headers=headers, timeout=self.timeout)
            r.raise_for_status()
            return r.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, TypeError,
                ValueError) as e:
            raise ClientError(f"chat backend failed: {e}") from e


class HttpEmbeddingClient:
    def __init__(self, base_url: str, model: str, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.model_id = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def _headers(self) -> dict:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}"}

    def embed(self, text: str) -> np.ndarray:
        headers = self._headers()
        import requests
        try:
            r = requests.post(f"{self.base_url}/embeddings",
                              json={"model": self.model, "input": text},
                              headers=headers, timeout=self.timeout)
            r.raise_for_status()
            v = np.asarray(r.json()["data"][0]["embedding"], dtype=float)
        except (requests.RequestException, KeyError, IndexError, TypeError,
                ValueError) as e:
            raise ClientError(f"embedding backend failed: {e}") from e
        n = float(np.linalg.norm(v))
        if not (np.isfinite(n) and n > 0):
            raise ClientError("embedding backend returned a degenerate vector")
        return v / n


# --- prompt construction and response parsing ---


def build_prompt(ann: SegmentAnnotation) -> list[dict]:
    """Chat messages asking for one QA pair over the annotated segments."""
    if not ann.segments:
        raise EmptyInputError(f"annotation {ann.video_id!r} has no segments")
    lines = [f"video duration: {ann.duration:.2f} seconds"]
    lines += [f"segment-{i + 1}: [{s.start:.2f}, {s.end:.2f}] {s.description}"
              for i, s in enumerate(ann.segments)]
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": DEMO_USER},
        {"role": "assistant", "content": DEMO_RESPONSE},
        {"role": "user", "content": "\n".join(lines)},
    ]


_FIELD_PATTERNS = {
    "chosen segment": re.compile(r"(?im)^\s*chosen segment\s*:\s*segment-(\d+)\s*$"),
    "segment timestamps": re.compile(
        r"(?im)^\s*segment timestamps\s*:\s*\[\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\]\s*$"),
    "question": re.compile(r"(?im)^\s*question\s*:\s*(\S.*?)\s*$"),
    "answer": re.compile(r"(?im)^\s*answer\s*:\s*(\S.*?)\s*$"),
}


def parse_generation(text: str, model_id: str = "", seed: int = 0) -> GeneratedQa:
    """Pull the four labeled lines out of a generation, in any order."""
    found = {}
    for name, pattern in _FIELD_PATTERNS.items():
        m = pattern.search(text)
        if m is None:
            raise GenerationFormatError(f"generation is missing the {name!r} line",
                                        field=name)
        found[name] = m
    try:
        start = float(found["segment timestamps"].group(1))
        end = float(found["segment timestamps"].group(2))
    except ValueError as e:
        raise GenerationFormatError(f"bad segment timestamps: {e}",
                                    field="segment timestamps") from e
    return GeneratedQa(segment_index=int(found["chosen segment"].group(1)),
                       start=start, end=end,
                       question=found["question"].group(1),
                       answer=found["answer"].group(1),
                       model_id=model_id, seed=seed)


# --- distractor retrieval and sampling ---


class Candidate(NamedTuple):
    question: str
    answer: str
    similarity: float


def retrieve_candidates(question: str, pool: list[tuple[str, str]],
                        embed: EmbeddingClient, k: int = 50) -> list[Candidate]:
    """Rank (question, answer) pairs by question cosine, best first."""
    if not pool:
        raise EmptyInputError("empty retrieval pool")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    q = np.asarray(embed.embed(question), dtype=float)
    sims = np.array([float(q @ np.asarray(embed.embed(pq), dtype=float))
                     for pq, _ in pool])
    order = np.argsort(-sims, kind="stable")[:k]
    return [Candidate(pool[i][0], pool[i][1], float(sims[i])) for i in order]


def sample_distractors(answer: str, candidates: list[Candidate],
                       embed: EmbeddingClient,
                       band: tuple[float, float] = (0.2, 0.9), n: int = 4,
                       rng: np.random.Generator | None = None) -> tuple[str, ...]:
    """Draw n distinct candidate answers whose cosine to `answer` lies in
    [band[0], band[1]], both ends inclusive."""
    if rng is None:
        rng = np.random.default_rng(0)
    a_vec = np.asarray(embed.embed(answer), dtype=float)
    norm_answer = _normalize(answer)
    seen: set[str] = set()
    in_band: list[str] = []
    for c in candidates:
        key = _normalize(c.answer)
        if key == norm_answer or key in seen:
            continue
        seen.add(key)
        s = float(a_vec @ np.asarray(embed.embed(c.answer), dtype=float))
        if band[0] <= s <= band[1]:
            in_band.append(c.answer)
    if len(in_band) < n:
        raise InsufficientDistractorsError(
            f"{len(in_band)} in-band candidates, need {n}")
    picked = rng.choice(len(in_band), size=n, replace=False)
    return tuple(in_band[int(i)] for i in picked)


# --- record assembly ---


def assemble_record(qa: GeneratedQa, rng: np.random.Generator, *, video_id: str,
                    duration: float, chunks: int = 120) -> dict:
    """Two-round conversation: shuffled multiple choice, then the fixed
    timestamp request answered with time tokens."""
    if len(qa.distractors) != 4:
        raise InvalidInputError("record assembly needs exactly 4 distractors")
    order = rng.permutation(5)
    pool = [qa.answer, *qa.distractors]
    options = [pool[int(i)] for i in order]
    correct_pos = int(np.nonzero(order == 0)[0][0])
    letter = OPTION_LETTERS[correct_pos]
    options_text = " ".join(f"({OPTION_LETTERS[i]}) {o}" for i, o in enumerate(options))
    a = timestamp_to_token(qa.start, duration, chunks)
    b = timestamp_to_token(qa.end, duration, chunks)
    rounds = [
        {"role": "user", "content": f"{qa.question} Options: {options_text}"},
        {"role": "assistant", "content": f"Answer: ({letter}) {qa.answer}"},
        {"role": "user", "content": TIMESTAMP_REQUEST},
        {"role": "assistant", "content": f"From <{a}> to <{b}>."},
    ]
    return {
        "video_id": video_id,
        "duration": duration,
        "rounds": rounds,
        "gold": {"start": qa.start, "end": qa.end},
        "options": options,
        "correct": letter,
        "provenance": {"model": qa.model_id, "seed": qa.seed},
    }


# --- pipeline ---


@dataclass(frozen=True)
class DatagenConfig:
    seed: int = 0
    chunks: int = 120
    top_k: int = 50
    band: tuple[float, float] = (0.2, 0.9)
    n_distractors: int = 4
    max_retries: int = 2
    backoff: float = 0.5  # seconds; doubles per retry, 0 disables sleeping
    max_answer_words: int = 7

    def __post_init__(self) -> None:
        if self.chunks < 1 or self.top_k < 1 or self.n_distractors < 1:
            raise ConfigError("chunks, top_k and n_distractors must be >= 1")
        lo, hi = self.band
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ConfigError(f"bad similarity band {self.band}")
        if self.max_retries < 0 or self.backoff < 0:
            raise ConfigError("max_retries and backoff must be >= 0")
        if self.max_answer_words < 1:
            raise ConfigError("max_answer_words must be >= 1")


class _CachedEmbedder:
    # one backend call per distinct text, with the pipeline's retry budget
    def __init__(self, inner: EmbeddingClient, cfg: DatagenConfig):
        self.inner = inner
        self.cfg = cfg
        self.cache: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        if text not in self.cache:
            self.cache[text] = _with_retries(lambda: self.inner.embed(text), self.cfg)
        return self.cache[text]


def _with_retries(fn, cfg: DatagenConfig):
    for attempt in range(cfg.max_retries + 1):
        try:
            return fn()
        except ClientError:
            if attempt == cfg.max_retries:
                raise
            if cfg.backoff > 0:
                time.sleep(cfg.backoff * (2 ** attempt))


def run_pipeline(annotations: list[SegmentAnnotation], chat: ChatClient,
                 embed: EmbeddingClient, config: DatagenConfig | None = None,
                 out_path: str | Path | None = None) -> tuple[list[dict], dict]:
    """Generate records for each annotation in order; skips are logged,
    never fatal. Returns (records, stats)."""
    cfg = config or DatagenConfig()
    cached = _CachedEmbedder(embed, cfg)
    model_id = getattr(chat, "model_id", "")
    # (question, answer, video_id); answers of earlier QAs become later
    # videos' distractor candidates
    qa_pool: list[tuple[str, str, str]] = []
    records: list[dict] = []
    skips: list[dict] = []

    def skip(idx: int, video_id: str, reason: str, detail: str) -> None:
        skips.append({"index": idx, "video_id": video_id, "reason": reason,
                      "detail": detail})

    for idx, ann in enumerate(annotations):
        rng = np.random.default_rng([cfg.seed, idx])
        try:
            messages = build_prompt(ann)
            text = _with_retries(lambda m=messages: chat.chat(m), cfg)
            qa = parse_generation(text, model_id=model_id, seed=cfg.seed)
        except ClientError as e:
            skip(idx, ann.video_id, "client_error", str(e))
            continue
        except GenerationFormatError as e:
            skip(idx, ann.video_id, "format_error", str(e))
            continue
        if not 1 <= qa.segment_index <= len(ann.segments):
            skip(idx, ann.video_id, "format_error",
                 f"segment index {qa.segment_index} out of range")
            continue
        if not 0.0 <= qa.start < qa.end <= ann.duration:
            skip(idx, ann.video_id, "interval_out_of_range",
                 f"[{qa.start}, {qa.end}] not inside [0, {ann.duration}]")
            continue
        if len(qa.answer.split()) > cfg.max_answer_words:
            skip(idx, ann.video_id, "answer_too_long", qa.answer)
            continue
        others = [(q, a) for q, a, vid in qa_pool if vid != ann.video_id]
        qa_pool.append((qa.question, qa.answer, ann.video_id))
        try:
            if not others:
                raise InsufficientDistractorsError("retrieval pool is empty")
            candidates = retrieve_candidates(qa.question, others, cached, k=cfg.top_k)
            distractors = sample_distractors(qa.answer, candidates, cached,
                                             band=cfg.band, n=cfg.n_distractors,
                                             rng=rng)
        except InsufficientDistractorsError as e:
            skip(idx, ann.video_id, "insufficient_distractors", str(e))
            continue
        except ClientError as e:
            skip(idx, ann.video_id, "client_error", str(e))
            continue
        qa = replace(qa, distractors=distractors)
        records.append(assemble_record(qa, rng, video_id=ann.video_id,
                                       duration=ann.duration, chunks=cfg.chunks))

    reasons: dict[str, int] = {}
    for s in skips:
        reasons[s["reason"]] = reasons.get(s["reason"], 0) + 1
    stats = {"total": len(annotations), "generated": len(records),
             "skipped": len(skips), "skip_reasons": dict(sorted(reasons.items())),
             "skips": skips}
    if out_path is not None:
        write_records(records, out_path)
    return records, stats


# --- annotation and record files ---


def read_annotations(path: str | Path) -> list[SegmentAnnotation]:
    anns = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}:{ln}: bad JSON: {e}") from e
        try:
            segments = tuple(Segment(float(s["start"]), float(s["end"]),
                                     str(s["description"]))
                             for s in d["segments"])
            anns.append(SegmentAnnotation(video_id=str(d["video_id"]),
                                          duration=float(d["duration"]),
                                          segments=segments))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}:{ln}: bad annotation: {e}") from e
    if not anns:
        raise EmptyInputError(f"{path}: no annotations")
    return anns


def write_annotations(anns: list[SegmentAnnotation], path: str | Path) -> None:
    lines = []
    for ann in anns:
        lines.append(json.dumps({
            "video_id": ann.video_id,
            "duration": ann.duration,
            "segments": [{"start": s.start, "end": s.end,
                          "description": s.description} for s in ann.segments],
        }, sort_keys=True))
    Path(path).write_text("".join(l + "\n" for l in lines))


def write_records(records: list[dict], path: str | Path) -> None:
    Path(path).write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
