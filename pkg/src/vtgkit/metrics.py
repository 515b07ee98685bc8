"""Temporal grounding metric suite.

Intervals are (start, end) pairs in seconds. Rates are reported in [0, 1];
reference tables elsewhere print them x100. Zero-length intervals are
treated as points so every metric is total.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .codec import GroundedEvent
from .errors import EmptyInputError, InvalidInputError, OrderingError, SchemaError

GROUNDING_KEYS = ("R@0.3", "R@0.5", "R@0.7", "mIoU")
GQA_KEYS = ("Acc@GQA", "mIoP", "IoP@0.5", "mIoU", "IoU@0.5")
DENSE_KEYS = ("SODA_c", "METEOR")

_WORD_RE = re.compile(r"[a-z0-9']+")


def _check_interval(iv) -> tuple[float, float]:
    try:
        s, e = float(iv[0]), float(iv[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise InvalidInputError(f"not an interval: {iv!r}") from exc
    if not (math.isfinite(s) and math.isfinite(e)):
        raise InvalidInputError(f"interval must be finite: {iv!r}")
    if s > e:
        raise OrderingError(f"interval start {s} > end {e}")
    return s, e


def interval_iou(a, b) -> float:
    """Intersection over union; identical points are 1, otherwise 0-union is 0."""
    s1, e1 = _check_interval(a)
    s2, e2 = _check_interval(b)
    inter = max(0.0, min(e1, e2) - max(s1, s2))
    union = max(e1, e2) - min(s1, s2)
    if union == 0.0:
        return 1.0  # all four endpoints coincide
    return inter / union


def interval_iop(pred, gt) -> float:
    """Intersection over prediction length; a point prediction counts as
    inside (1) or outside (0) the ground truth."""
    s1, e1 = _check_interval(pred)
    s2, e2 = _check_interval(gt)
    inter = max(0.0, min(e1, e2) - max(s1, s2))
    length = e1 - s1
    if length == 0.0:
        return 1.0 if s2 <= s1 <= e2 else 0.0
    return inter / length


def recall_suite(pairs, thresholds=(0.3, 0.5, 0.7)) -> dict[str, float]:
    """R@threshold plus mean IoU over (pred, gt) interval pairs."""
    if not pairs:
        raise EmptyInputError("no interval pairs")
    ious = [interval_iou(p, g) for p, g in pairs]
    out = {f"R@{t:g}": sum(i >= t for i in ious) / len(ious) for t in thresholds}
    out["mIoU"] = sum(ious) / len(ious)
    return out


@dataclass
class GqaRecord:
    record_id: str
    pred_option: str
    gold_option: str
    pred_interval: tuple[float, float]
    gold_intervals: list[tuple[float, float]]

    @property
    def correct(self) -> bool:
        return self.pred_option == self.gold_option

    @property
    def iop(self) -> float:
        return max(interval_iop(self.pred_interval, g) for g in self.gold_intervals)

    @property
    def iou(self) -> float:
        return max(interval_iou(self.pred_interval, g) for g in self.gold_intervals)


def acc_at_gqa(records: list[GqaRecord]) -> float:
    """Fraction answered correctly AND grounded with IoP >= 0.5."""
    if not records:
        raise EmptyInputError("no GQA records")
    return sum(r.correct and r.iop >= 0.5 for r in records) / len(records)


# --- caption similarity ---


def _tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def caption_sim(candidate: str, reference: str) -> float:
    """Unigram harmonic mean (recall-weighted 9:1) times a fragmentation
    penalty of 1 - 0.5*(chunks/matches)^3. Exact lowercase token matching."""
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        return 0.0
    used: set[int] = set()
    pairs: list[tuple[int, int]] = []
    for ci, tok in enumerate(cand):
        for ri, rtok in enumerate(ref):
            if ri not in used and rtok == tok:
                pairs.append((ci, ri))
                used.add(ri)
                break
    m = len(pairs)
    if m == 0:
        return 0.0
    chunks = 1
    for (c0, r0), (c1, r1) in zip(pairs, pairs[1:]):
        if c1 != c0 + 1 or r1 != r0 + 1:
            chunks += 1
    precision = m / len(cand)
    recall = m / len(ref)
    f_mean = precision * recall / (0.9 * precision + 0.1 * recall)
    penalty = 0.5 * (chunks / m) ** 3
    return f_mean * (1.0 - penalty)


def _check_events(events: list[GroundedEvent], require_sorted: bool) -> None:
    prev = None
    for ev in events:
        _check_interval((ev.start, ev.end))
        if require_sorted and prev is not None and ev.start < prev:
            raise OrderingError("events must be sorted by start time")
        prev = ev.start


def meteor_at_tiou(preds: list[GroundedEvent], gts: list[GroundedEvent],
                   thresholds=(0.3, 0.5, 0.7, 0.9), scorer=caption_sim) -> float:
    """Mean over thresholds of the mean caption score over pairs matched
    greedily by descending IoU (one-to-one, IoU >= threshold)."""
    _check_events(preds, require_sorted=False)
    _check_events(gts, require_sorted=False)
    candidates = []
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            iou = interval_iou((p.start, p.end), (g.start, g.end))
            if iou > 0.0:
                candidates.append((-iou, i, j))
    candidates.sort()
    per_threshold = []
    for t in thresholds:
        used_p: set[int] = set()
        used_g: set[int] = set()
        scores = []
        for neg_iou, i, j in candidates:
            if -neg_iou < t:
                break
            if i in used_p or j in used_g:
                continue
            used_p.add(i)
            used_g.add(j)
            scores.append(scorer(preds[i].caption, gts[j].caption))
        per_threshold.append(sum(scores) / len(scores) if scores else 0.0)
    return sum(per_threshold) / len(per_threshold)


def soda_c(preds: list[GroundedEvent], gts: list[GroundedEvent], scorer=caption_sim) -> float:
    """Story-oriented F-score over the best order-preserving one-to-one
    matching, with per-pair score IoU * caption score."""
    _check_events(preds, require_sorted=True)
    _check_events(gts, require_sorted=True)
    np_, ng = len(preds), len(gts)
    if np_ == 0 or ng == 0:
        return 0.0
    score = [[interval_iou((p.start, p.end), (g.start, g.end)) * scorer(p.caption, g.caption)
              for g in gts] for p in preds]
    dp = [[0.0] * (ng + 1) for _ in range(np_ + 1)]
    for i in range(1, np_ + 1):
        for j in range(1, ng + 1):
            dp[i][j] = max(dp[i - 1][j], dp[i][j - 1], dp[i - 1][j - 1] + score[i - 1][j - 1])
    total = dp[np_][ng]
    precision = total / np_
    recall = total / ng
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# --- dataset-level evaluation ---


@dataclass
class MetricReport:
    task: str
    metrics: dict[str, float]
    num_samples: int
    per_sample: list[dict] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"task": self.task, "metrics": self.metrics,
                "num_samples": self.num_samples, "per_sample": self.per_sample,
                "notes": self.notes}


def _read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    raw = Path(path).read_text()
    for ln, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}:{ln}: invalid JSON: {e}") from e
        if not isinstance(rec, dict):
            raise SchemaError(f"{path}:{ln}: expected an object")
        rows.append(rec)
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return rows


def _by_id(rows: list[dict], path) -> dict:
    out = {}
    for rec in rows:
        if "id" not in rec:
            raise SchemaError(f"{path}: record missing 'id': {rec}")
        rid = str(rec["id"])
        if rid in out:
            raise SchemaError(f"{path}: duplicate id {rid!r}")
        out[rid] = rec
    return out


def _need(rec: dict, key: str, path) -> object:
    if key not in rec:
        raise SchemaError(f"{path}: record {rec.get('id')!r} missing {key!r}")
    return rec[key]


def _num(rec: dict, key: str, path) -> float:
    v = _need(rec, key, path)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise SchemaError(f"{path}: record {rec.get('id')!r}: {key} must be a number")
    return float(v)


def _gold_intervals(rec: dict, path) -> list[tuple[float, float]]:
    if "intervals" in rec:
        ivs = rec["intervals"]
        if not isinstance(ivs, list) or not ivs:
            raise SchemaError(f"{path}: record {rec.get('id')!r}: bad intervals list")
        return [(float(iv[0]), float(iv[1])) for iv in ivs]
    return [(_num(rec, "start", path), _num(rec, "end", path))]


def _events_from(rec: dict, path) -> list[GroundedEvent]:
    evs = _need(rec, "events", path)
    if not isinstance(evs, list):
        raise SchemaError(f"{path}: record {rec.get('id')!r}: events must be a list")
    out = []
    for ev in evs:
        try:
            out.append(GroundedEvent(start=float(ev["start"]), end=float(ev["end"]),
                                     caption=str(ev["caption"])))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}: record {rec.get('id')!r}: bad event: {e}") from e
    return sorted(out, key=lambda e: (e.start, e.end))


def evaluate_dataset(task: str, pred_path: str | Path, gt_path: str | Path) -> MetricReport:
    """Score a prediction file against a ground-truth file for one task.

    Tasks: grounding (one span per id), dense (event lists), gqa (option +
    span; multi-gold handled max-over-gold and flagged in notes).
    """
    preds = _by_id(_read_jsonl(pred_path), pred_path)
    gts = _by_id(_read_jsonl(gt_path), gt_path)
    if set(preds) != set(gts):
        missing = sorted(set(gts) - set(preds))[:3]
        extra = sorted(set(preds) - set(gts))[:3]
        raise SchemaError(
            f"prediction/gt ids do not align (missing {missing}, unexpected {extra})")
    ids = sorted(preds)
    per_sample: list[dict] = []
    notes: dict = {}
    if task == "grounding":
        pairs = []
        for rid in ids:
            p = (_num(preds[rid], "start", pred_path), _num(preds[rid], "end", pred_path))
            g = (_num(gts[rid], "start", gt_path), _num(gts[rid], "end", gt_path))
            pairs.append((p, g))
            per_sample.append({"id": rid, "iou": interval_iou(p, g)})
        metrics = recall_suite(pairs)
    elif task == "dense":
        sodas, meteors = [], []
        for rid in ids:
            pe = _events_from(preds[rid], pred_path)
            ge = _events_from(gts[rid], gt_path)
            s = soda_c(pe, ge)
            m = meteor_at_tiou(pe, ge)
            sodas.append(s)
            meteors.append(m)
            per_sample.append({"id": rid, "soda_c": s, "meteor": m})
        metrics = {"SODA_c": sum(sodas) / len(sodas), "METEOR": sum(meteors) / len(meteors)}
    elif task == "gqa":
        records = []
        multi = False
        for rid in ids:
            gold_ivs = _gold_intervals(gts[rid], gt_path)
            multi = multi or len(gold_ivs) > 1
            rec = GqaRecord(
                record_id=rid,
                pred_option=str(_need(preds[rid], "answer", pred_path)),
                gold_option=str(_need(gts[rid], "answer", gt_path)),
                pred_interval=(_num(preds[rid], "start", pred_path),
                               _num(preds[rid], "end", pred_path)),
                gold_intervals=gold_ivs,
            )
            records.append(rec)
            per_sample.append({"id": rid, "correct": rec.correct,
                               "iop": rec.iop, "iou": rec.iou})
        n = len(records)
        metrics = {
            "Acc@GQA": acc_at_gqa(records),
            "mIoP": sum(r.iop for r in records) / n,
            "IoP@0.5": sum(r.iop >= 0.5 for r in records) / n,
            "mIoU": sum(r.iou for r in records) / n,
            "IoU@0.5": sum(r.iou >= 0.5 for r in records) / n,
        }
        notes["multi_gold"] = "max-over-gold" if multi else "single"
    else:
        raise InvalidInputError(f"unknown task {task!r}")
    return MetricReport(task=task, metrics=metrics, num_samples=len(ids),
                        per_sample=per_sample, notes=notes)
