from __future__ import annotations

import dataclasses
import random
import threading

import pytest

from cosivote import (
    CandidateSet,
    EmbeddingVector,
    PipelineConfig,
    default_config,
    parse_diagnosis,
    register_backend,
    unregister_backend,
    write_candidate_sets,
)

# Four-step diagnoses in the Assessment; Analysis; Treatment; Prevention shape.
DISEASES = {
    "blight": (
        "The leaf shows northern corn leaf blight",
        "Long gray-green cigar-shaped lesions run along the veins",
        "Apply a foliar fungicide such as azoxystrobin at first sign",
        "Rotate away from maize and plow under crop residue",
    ),
    "gls": (
        "The leaf shows gray leaf spot",
        "Narrow rectangular tan lesions bounded by the veins",
        "Spray a strobilurin fungicide before tasseling",
        "Plant resistant hybrids and avoid dense canopies",
    ),
    "rust": (
        "The leaf shows common rust",
        "Small cinnamon-brown pustules scattered on both surfaces",
        "Use a triazole fungicide if pustules keep spreading",
        "Plant early and scout weekly in cool wet weather",
    ),
    "healthy": (
        "The leaf is healthy",
        "No lesions pustules or discoloration are visible",
        "No treatment is needed",
        "Keep scouting on a weekly schedule",
    ),
}

DISEASE_KEYS = tuple(DISEASES)


def disease_text(key: str) -> str:
    return "; ".join(DISEASES[key])


def diag(key: str):
    return parse_diagnosis(disease_text(key))


def make_candidate_set(sample_id: str, truth: str, greedy: str, sampled: list[str], **kw) -> CandidateSet:
    return CandidateSet(
        sample_id=sample_id,
        ground_truth=diag(truth),
        greedy=diag(greedy),
        sampled=tuple(diag(k) for k in sampled),
        **kw,
    )


def small_corpus(n_samples: int = 5, n_sampled: int = 6, seed: int = 7) -> list[CandidateSet]:
    """Deterministic candidate sets: mostly on-truth pools with some strays."""
    rng = random.Random(seed)
    sets = []
    for i in range(n_samples):
        truth = DISEASE_KEYS[i % len(DISEASE_KEYS)]
        sampled = [
            truth if rng.random() < 0.6 else rng.choice(DISEASE_KEYS)
            for _ in range(n_sampled)
        ]
        greedy = truth if rng.random() < 0.8 else DISEASE_KEYS[(i + 1) % len(DISEASE_KEYS)]
        sets.append(
            make_candidate_set(
                f"img-{i:03d}", truth, greedy, sampled, image_ref=f"images/{i:03d}.jpg"
            )
        )
    return sets


@pytest.fixture
def candidate_sets() -> list[CandidateSet]:
    return small_corpus()


@pytest.fixture
def candidates_file(tmp_path, candidate_sets):
    path = tmp_path / "candidates.jsonl"
    write_candidate_sets(candidate_sets, path)
    return path


@pytest.fixture
def pipeline_config(tmp_path, candidates_file) -> PipelineConfig:
    """Offline config: hash-test embedders, overlap judge, small gens sweep."""
    return dataclasses.replace(
        default_config(tmp_path),
        candidates_path=candidates_file,
        gens=(1, 3, 6),
    )


class ScriptedChatClient:
    """Replays canned replies in order and records every prompt it saw."""

    def __init__(self, replies: list[str], model_id: str = "scripted-judge"):
        self.replies = list(replies)
        self.model_id = model_id
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    def complete(self, messages):
        with self._lock:
            self.prompts.append(messages[-1]["content"])
            if not self.replies:
                raise AssertionError("scripted client ran out of replies")
            return self.replies.pop(0)

    @property
    def calls(self) -> int:
        return len(self.prompts)


@pytest.fixture
def scripted_client():
    return ScriptedChatClient


def _vector_literal_backend(texts, spec):
    """Test backend: each text is its own vector, comma-separated floats."""
    return [
        EmbeddingVector(tuple(float(part) for part in text.split(",")))
        for text in texts
    ]


@pytest.fixture
def vector_literal_backend():
    register_backend("vector-literal", _vector_literal_backend)
    yield "vector-literal"
    unregister_backend("vector-literal")


# --- acceptance reporting ---------------------------------------------------
# test_acceptance.py records one outcome per criterion; the summary hook
# prints them after the run so the lines survive output capturing.

_acceptance_outcomes: dict[int, tuple[str, bool]] = {}


def record_criterion(number: int, description: str, passed: bool) -> None:
    _acceptance_outcomes[number] = (description, passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance_outcomes):
        description, passed = _acceptance_outcomes[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {description}")
