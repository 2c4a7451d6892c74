"""Similarity-labeled candidate pairs for embedding distillation.

Every unordered pair of a sample's scored candidates becomes one training
example whose target label follows from the two judge scores: both correct
-> 1.0, exactly one correct -> 0.8, neither -> 0.1. Identical-text pairs
keep their rule-derived label; the labeling function is defined on scores
only.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DuplicateIndexError,
    SchemaViolationError,
    ScoreOutOfRangeError,
    TooFewCandidatesError,
)
from .judge import is_correct

PAIR_LABELS = (1.0, 0.8, 0.1)

GREEDY_INDEX = -1  # candidate_index convention: -1 greedy, 0..N-1 sampled


@dataclass(frozen=True)
class ScoredCandidate:
    sample_id: str
    candidate_index: int
    text: str
    judge_score: float

    def __post_init__(self):
        if not 0.0 <= self.judge_score <= 1.0:
            raise ScoreOutOfRangeError(f"judge_score {self.judge_score} outside [0, 1]")


@dataclass(frozen=True)
class PairExample:
    """One unordered pair, canonically ordered: lower candidate_index first."""

    sample_id: str
    text_a: str
    text_b: str
    label: float
    score_a: float
    score_b: float


def assign_pair_label(score_a: float, score_b: float) -> float:
    """Label from the two scores; symmetric in its arguments."""
    if not 0.0 <= score_a <= 1.0:
        raise ScoreOutOfRangeError(f"score_a {score_a} outside [0, 1]")
    if not 0.0 <= score_b <= 1.0:
        raise ScoreOutOfRangeError(f"score_b {score_b} outside [0, 1]")
    a_ok = is_correct(score_a)
    b_ok = is_correct(score_b)
    if a_ok and b_ok:
        return 1.0
    if a_ok or b_ok:
        return 0.8
    return 0.1


def build_pairs(candidates: list[ScoredCandidate]) -> list[PairExample]:
    """All C(n, 2) pairs of one sample, in lexicographic index order."""
    if len(candidates) < 2:
        raise TooFewCandidatesError(f"need at least 2 candidates, got {len(candidates)}")
    sample_ids = {c.sample_id for c in candidates}
    if len(sample_ids) != 1:
        raise ValueError(f"candidates span multiple samples: {sorted(sample_ids)}")
    indices = [c.candidate_index for c in candidates]
    if len(set(indices)) != len(indices):
        dupes = sorted({i for i in indices if indices.count(i) > 1})
        raise DuplicateIndexError(f"duplicate candidate indices {dupes}")
    ordered = sorted(candidates, key=lambda c: c.candidate_index)
    return [
        PairExample(
            sample_id=a.sample_id,
            text_a=a.text,
            text_b=b.text,
            label=assign_pair_label(a.judge_score, b.judge_score),
            score_a=a.judge_score,
            score_b=b.judge_score,
        )
        for a, b in itertools.combinations(ordered, 2)
    ]


_PAIR_FIELDS = ("sample_id", "text_a", "text_b", "label", "score_a", "score_b")


def write_pairset(pairs: list[PairExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            record = {field: getattr(pair, field) for field in _PAIR_FIELDS}
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_pairset(path: str | Path) -> list[PairExample]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolationError(f"invalid JSON: {exc.msg}", lineno) from exc
            pairs.append(_pair_from_record(record, lineno))
    return pairs


def _pair_from_record(record: dict, line: int) -> PairExample:
    if not isinstance(record, dict):
        raise SchemaViolationError("pair record is not an object", line)
    for field in _PAIR_FIELDS:
        if field not in record:
            raise SchemaViolationError(f"missing field {field!r}", line)
    for field in ("sample_id", "text_a", "text_b"):
        if not isinstance(record[field], str):
            raise SchemaViolationError(f"{field} must be a string", line)
    for field in ("label", "score_a", "score_b"):
        value = record[field]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolationError(f"{field} must be a number", line)
    label = float(record["label"])
    if label not in PAIR_LABELS:
        raise SchemaViolationError(f"label {label} not one of {PAIR_LABELS}", line)
    score_a = float(record["score_a"])
    score_b = float(record["score_b"])
    try:
        expected = assign_pair_label(score_a, score_b)
    except ScoreOutOfRangeError as exc:
        raise SchemaViolationError(str(exc), line) from exc
    if label != expected:
        raise SchemaViolationError(
            f"label {label} inconsistent with scores ({score_a}, {score_b})", line
        )
    return PairExample(
        sample_id=record["sample_id"],
        text_a=record["text_a"],
        text_b=record["text_b"],
        label=label,
        score_a=score_a,
        score_b=score_b,
    )
