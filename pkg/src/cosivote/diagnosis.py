"""Domain types for diagnoses and candidate pools, plus the semicolon format.

A diagnosis is one model output split into up to four clinical steps
(assessment, analysis, treatment, prevention), separated by semicolons.
The format is positional and semicolons inside a step are not escapable;
overflow segments beyond the fourth fold into the fourth step.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import (
    EmptyDiagnosisError,
    EmptyInputError,
    SchemaViolationError,
    StepAbsentError,
)

STEP_SEPARATOR = "; "


class StepScope(Enum):
    """Which part of a diagnosis an operation targets."""

    ASSESSMENT = "assessment"
    ANALYSIS = "analysis"
    TREATMENT = "treatment"
    PREVENTION = "prevention"
    WHOLE_OUTPUT = "whole"

    @classmethod
    def parse(cls, token: str) -> "StepScope":
        """Accept canonical names plus the step1..step4 CLI aliases."""
        normalized = token.strip().lower().replace("-", "_")
        aliases = {
            "step1": cls.ASSESSMENT,
            "step2": cls.ANALYSIS,
            "step3": cls.TREATMENT,
            "step4": cls.PREVENTION,
            "whole_output": cls.WHOLE_OUTPUT,
        }
        if normalized in aliases:
            return aliases[normalized]
        for scope in cls:
            if scope.value == normalized:
                return scope
        raise ValueError(f"unknown scope {token!r}")


# Steps 1-3 carry accuracy tables; prevention is parsed but never scored.
EVAL_SCOPES = (StepScope.ASSESSMENT, StepScope.ANALYSIS, StepScope.TREATMENT)

_STEP_FIELDS = ("assessment", "analysis", "treatment", "prevention")


@dataclass(frozen=True)
class Diagnosis:
    """One model output, split into its clinical steps.

    Pure value type; safe to share between threads.
    """

    raw_text: str
    assessment: str | None = None
    analysis: str | None = None
    treatment: str | None = None
    prevention: str | None = None

    def steps(self) -> tuple[str | None, str | None, str | None, str | None]:
        return (self.assessment, self.analysis, self.treatment, self.prevention)


def parse_diagnosis(text: str) -> Diagnosis:
    """Split raw model output on semicolons into up to four trimmed steps.

    Extra segments beyond four fold into the fourth step; fewer segments
    leave trailing steps absent. Blank segments leave their positional
    slot absent. Raises EmptyInputError when no step content survives.
    """
    if not text.strip():
        raise EmptyInputError("diagnosis text is blank")
    parts = [p.strip() for p in text.split(";")]
    if len(parts) > 4:
        overflow = [p for p in parts[3:] if p]
        parts = parts[:3] + [STEP_SEPARATOR.join(overflow)]
    parts += [""] * (4 - len(parts))
    steps = tuple(p if p else None for p in parts[:4])
    if all(s is None for s in steps):
        raise EmptyInputError("diagnosis text has no step content")
    return Diagnosis(text, *steps)


def render_diagnosis(d: Diagnosis) -> str:
    """Join the present steps with '; ' in canonical order."""
    present = [s for s in d.steps() if s is not None]
    if not present:
        raise EmptyDiagnosisError("diagnosis has no steps")
    return STEP_SEPARATOR.join(present)


def step_text(d: Diagnosis, scope: StepScope) -> str:
    """The named step's text, or the whole rendered output."""
    if scope is StepScope.WHOLE_OUTPUT:
        return render_diagnosis(d)
    value = getattr(d, scope.value)
    if value is None:
        raise StepAbsentError(scope)
    return value


def has_step(d: Diagnosis, scope: StepScope) -> bool:
    if scope is StepScope.WHOLE_OUTPUT:
        return any(s is not None for s in d.steps())
    return getattr(d, scope.value) is not None


@dataclass(frozen=True)
class CandidateSet:
    """Per-sample voting pool: greedy decode plus temperature samples.

    The greedy output always occupies pool index 0; sampled order is
    stable so generation-count sweeps can take prefixes.
    """

    sample_id: str
    ground_truth: Diagnosis
    greedy: Diagnosis
    sampled: tuple[Diagnosis, ...]
    image_ref: str | None = None
    temperature: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sampled", tuple(self.sampled))

    @property
    def pool_size(self) -> int:
        return len(self.sampled) + 1

    def pool(self) -> tuple[Diagnosis, ...]:
        return (self.greedy,) + self.sampled


# Candidate-set file contract: one JSON record per line with exactly these
# field names. ground_truth/greedy/sampled hold raw diagnosis strings.
CANDIDATE_FIELDS = ("sample_id", "image_ref", "ground_truth", "greedy", "sampled", "temperature")


def candidate_set_to_record(cs: CandidateSet) -> dict:
    return {
        "sample_id": cs.sample_id,
        "image_ref": cs.image_ref,
        "ground_truth": cs.ground_truth.raw_text,
        "greedy": cs.greedy.raw_text,
        "sampled": [d.raw_text for d in cs.sampled],
        "temperature": cs.temperature,
    }


def candidate_set_from_record(record: dict, line: int | None = None) -> CandidateSet:
    if not isinstance(record, dict):
        raise SchemaViolationError("candidate record is not an object", line)
    for field in ("sample_id", "ground_truth", "greedy", "sampled"):
        if field not in record:
            raise SchemaViolationError(f"missing field {field!r}", line)
    sample_id = record["sample_id"]
    if not isinstance(sample_id, str) or not sample_id:
        raise SchemaViolationError("sample_id must be a non-empty string", line)
    for field in ("ground_truth", "greedy"):
        if not isinstance(record[field], str):
            raise SchemaViolationError(f"{field} must be a string", line)
    sampled = record["sampled"]
    if not isinstance(sampled, list) or not all(isinstance(s, str) for s in sampled):
        raise SchemaViolationError("sampled must be an array of strings", line)
    image_ref = record.get("image_ref")
    if image_ref is not None and not isinstance(image_ref, str):
        raise SchemaViolationError("image_ref must be a string or null", line)
    temperature = record.get("temperature", 1.0)
    if isinstance(temperature, bool) or not isinstance(temperature, (int, float)):
        raise SchemaViolationError("temperature must be a number", line)
    try:
        return CandidateSet(
            sample_id=sample_id,
            ground_truth=parse_diagnosis(record["ground_truth"]),
            greedy=parse_diagnosis(record["greedy"]),
            sampled=tuple(parse_diagnosis(s) for s in sampled),
            image_ref=image_ref,
            temperature=float(temperature),
        )
    except EmptyInputError as exc:
        raise SchemaViolationError(str(exc), line) from exc


def read_candidate_sets(path: str | Path) -> list[CandidateSet]:
    sets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolationError(f"invalid JSON: {exc.msg}", lineno) from exc
            sets.append(candidate_set_from_record(record, lineno))
    return sets


def write_candidate_sets(sets: list[CandidateSet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cs in sets:
            fh.write(json.dumps(candidate_set_to_record(cs), sort_keys=True) + "\n")


def truncate_sampled(cs: CandidateSet, k: int) -> CandidateSet:
    """Keep only the first k sampled candidates (greedy is always retained)."""
    return dataclasses.replace(cs, sampled=cs.sampled[:k])
