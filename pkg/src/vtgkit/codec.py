"""Discrete time tokens and the grounded text format.

A video of duration L seconds is divided into M chunks, giving M+1 anchor
points. A timestamp tau maps to the nearest anchor index t = round(M*tau/L)
and is serialized as the literal token "<t>". Grounded text interleaves such
tokens with captions using a fixed clause grammar:

    From <a> to <b>, some caption text.

Clauses are joined by single spaces. A full grounded sequence wraps video
features and text between marker tokens, e.g.
"<video> ... </video> <grounded> From <4> to <17>, a baby is crying."
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    EmptyInputError,
    InvalidInputError,
    OrderingError,
    ParseFailureError,
    SchemaError,
)

VIDEO_OPEN = "<video>"
VIDEO_CLOSE = "</video>"
GROUNDED_MARKER = "<grounded>"

_CLAUSE_RE = re.compile(r"From\s+<(\d+)>\s+to\s+<(\d+)>\s*,?", re.IGNORECASE)
_TIME_TOKEN_RE = re.compile(r"<(\d+)>")


def _check_duration_chunks(duration: float, chunks: int) -> None:
    if not isinstance(chunks, int) or isinstance(chunks, bool) or chunks < 1:
        raise InvalidInputError(f"chunks must be a positive integer, got {chunks!r}")
    if not (isinstance(duration, (int, float)) and math.isfinite(duration)):
        raise InvalidInputError(f"duration must be finite, got {duration!r}")
    if duration <= 0:
        raise InvalidInputError(f"duration must be positive, got {duration}")


def timestamp_to_token(tau: float, duration: float, chunks: int) -> int:
    """Map a timestamp in seconds to its time-token index in [0, chunks].

    Rounds half away from zero; timestamps beyond the duration clamp to the
    last anchor so slightly overlong annotations stay usable.
    """
    _check_duration_chunks(duration, chunks)
    if not (isinstance(tau, (int, float)) and math.isfinite(tau)):
        raise InvalidInputError(f"timestamp must be finite, got {tau!r}")
    if tau < 0:
        raise InvalidInputError(f"timestamp must be non-negative, got {tau}")
    t = math.floor(chunks * tau / duration + 0.5)
    return min(t, chunks)


def token_to_timestamp(t: int, duration: float, chunks: int) -> float:
    """Invert a time-token index back to seconds (the anchor position)."""
    _check_duration_chunks(duration, chunks)
    if not isinstance(t, int) or isinstance(t, bool) or not 0 <= t <= chunks:
        raise InvalidInputError(f"token index must be an int in [0, {chunks}], got {t!r}")
    return duration * t / chunks


@dataclass(frozen=True)
class TemporalVocab:
    """Id layout for a base text vocabulary extended with time + marker tokens.

    Ids [base_size, base_size+chunks] hold "<0>".."<chunks>", followed by
    "<video>", "</video>", "<grounded>".
    """

    base_size: int
    chunks: int

    def __post_init__(self) -> None:
        if self.base_size < 1:
            raise InvalidInputError(f"base_size must be >= 1, got {self.base_size}")
        if self.chunks < 1:
            raise InvalidInputError(f"chunks must be >= 1, got {self.chunks}")

    @property
    def total_size(self) -> int:
        return self.base_size + self.chunks + 4

    @property
    def video_open_id(self) -> int:
        return self.base_size + self.chunks + 1

    @property
    def video_close_id(self) -> int:
        return self.base_size + self.chunks + 2

    @property
    def grounded_id(self) -> int:
        return self.base_size + self.chunks + 3

    def temporal_id(self, t: int) -> int:
        if not 0 <= t <= self.chunks:
            raise InvalidInputError(f"time token {t} outside [0, {self.chunks}]")
        return self.base_size + t

    def is_temporal_id(self, token_id: int) -> bool:
        return self.base_size <= token_id <= self.base_size + self.chunks

    def temporal_index(self, token_id: int) -> int:
        if not self.is_temporal_id(token_id):
            raise InvalidInputError(f"id {token_id} is not a time token")
        return token_id - self.base_size

    def token_string(self, token_id: int) -> str:
        """String form of any non-text id this vocab owns."""
        if self.is_temporal_id(token_id):
            return f"<{token_id - self.base_size}>"
        if token_id == self.video_open_id:
            return VIDEO_OPEN
        if token_id == self.video_close_id:
            return VIDEO_CLOSE
        if token_id == self.grounded_id:
            return GROUNDED_MARKER
        raise InvalidInputError(f"id {token_id} is not owned by the extended vocab")

    def string_to_id(self, token: str) -> int | None:
        """Id for "<N>" / marker strings, None for ordinary text."""
        if token == VIDEO_OPEN:
            return self.video_open_id
        if token == VIDEO_CLOSE:
            return self.video_close_id
        if token == GROUNDED_MARKER:
            return self.grounded_id
        m = _TIME_TOKEN_RE.fullmatch(token)
        if m:
            return self.temporal_id(int(m.group(1)))
        return None

    def to_dict(self) -> dict:
        return {"base_size": self.base_size, "chunks": self.chunks}

    @classmethod
    def from_dict(cls, d: dict) -> "TemporalVocab":
        return cls(base_size=int(d["base_size"]), chunks=int(d["chunks"]))


def vocab_layout(base_size: int, chunks: int) -> TemporalVocab:
    return TemporalVocab(base_size=base_size, chunks=chunks)


@dataclass(frozen=True)
class GroundedEvent:
    """One captioned interval, in seconds. Caption carries no trailing period."""

    start: float
    end: float
    caption: str

    def validate(self, duration: float | None = None) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise InvalidInputError(f"event bounds must be finite: {self}")
        if self.start > self.end:
            raise OrderingError(f"event start {self.start} > end {self.end}")
        if self.start < 0:
            raise InvalidInputError(f"event start {self.start} < 0")
        if duration is not None and self.end > duration:
            raise InvalidInputError(f"event end {self.end} > duration {duration}")
        if not self.caption.strip():
            raise InvalidInputError("event caption is empty")


def render_grounded_text(events: list[GroundedEvent], duration: float, vocab: TemporalVocab) -> str:
    """Serialize sorted events as 'From <a> to <b>, caption.' clauses."""
    if not events:
        raise EmptyInputError("no events to render")
    prev_start = None
    clauses = []
    for ev in events:
        ev.validate(duration)
        if prev_start is not None and ev.start < prev_start:
            raise OrderingError("events must be sorted by start time")
        prev_start = ev.start
        a = timestamp_to_token(ev.start, duration, vocab.chunks)
        b = timestamp_to_token(ev.end, duration, vocab.chunks)
        clauses.append(f"From <{a}> to <{b}>, {ev.caption.strip()}.")
    return " ".join(clauses)


@dataclass
class ParsedText:
    """Events recovered from a grounded string plus skip reports."""

    events: list[GroundedEvent]
    skipped: list[str] = field(default_factory=list)


def parse_grounded_text(text: str, duration: float, vocab: TemporalVocab) -> ParsedText:
    """Recover events from a grounded string.

    Malformed clauses (token out of range, reversed interval, empty caption)
    are skipped and reported in the result; if nothing parses at all, raises
    ParseFailureError carrying the raw text.
    """
    _check_duration_chunks(duration, vocab.chunks)
    matches = list(_CLAUSE_RE.finditer(text))
    if not matches:
        raise ParseFailureError("no grounded clause found", text=text)
    events: list[GroundedEvent] = []
    skipped: list[str] = []
    for i, m in enumerate(matches):
        stop = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        caption = text[m.end():stop].strip()
        if caption.endswith("."):
            caption = caption[:-1].rstrip()
        a, b = int(m.group(1)), int(m.group(2))
        if a > vocab.chunks or b > vocab.chunks:
            skipped.append(f"clause {i}: token out of range: <{a}>, <{b}>")
            continue
        if a > b:
            skipped.append(f"clause {i}: reversed interval <{a}> to <{b}>")
            continue
        if not caption:
            skipped.append(f"clause {i}: empty caption")
            continue
        events.append(
            GroundedEvent(
                start=token_to_timestamp(a, duration, vocab.chunks),
                end=token_to_timestamp(b, duration, vocab.chunks),
                caption=caption,
            )
        )
    if not events:
        raise ParseFailureError("all clauses malformed", text=text)
    return ParsedText(events=events, skipped=skipped)


@dataclass
class GroundedSequence:
    """Token ids mixing text, time tokens and markers, plus a grounded flag."""

    ids: list[int]
    grounded: bool

    def validate(self, vocab: TemporalVocab) -> None:
        for i in self.ids:
            if not 0 <= i < vocab.total_size:
                raise InvalidInputError(f"id {i} outside vocab of size {vocab.total_size}")


def read_events_jsonl(path: str | Path) -> list[GroundedEvent]:
    """Load events from JSONL records {start, end, caption}."""
    events = []
    raw = Path(path).read_text()
    for ln, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}:{ln}: invalid JSON: {e}") from e
        try:
            events.append(
                GroundedEvent(
                    start=float(rec["start"]), end=float(rec["end"]), caption=str(rec["caption"])
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}:{ln}: expected {{start, end, caption}}: {e}") from e
    if not events:
        raise EmptyInputError(f"{path}: no event records")
    return events


def write_events_jsonl(events: list[GroundedEvent], path: str | Path) -> None:
    lines = [
        json.dumps({"start": ev.start, "end": ev.end, "caption": ev.caption}) for ev in events
    ]
    Path(path).write_text("\n".join(lines) + "\n")
