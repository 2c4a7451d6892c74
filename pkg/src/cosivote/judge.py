"""Prompt-based expert-judge protocol: prompts, verdicts, banding, caching.

The judge is any chat-completion endpoint configured as an expert plant
pathologist; it returns a similarity score in [0, 1] plus reasoning for a
reference/candidate pair. Scores are parsed at full precision but band
boundaries are evaluated after rounding to two decimals, the resolution
the rubric is stated at, so 0.7999999 cannot misband.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Protocol

import requests

from .diagnosis import StepScope
from .errors import (
    BackendUnavailableError,
    EmptyTextError,
    MalformedVerdictError,
    ScoreOutOfRangeError,
)

JUDGE_API_KEY_ENV = "CONSENSUS_JUDGE_API_KEY"

PROMPT_VERSION = "rubric-v1"

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.5
REQUEST_TIMEOUT = 120.0

_TEXT_OPEN = "<<<"
_TEXT_CLOSE = ">>>"

JUDGE_PROMPT_TEMPLATE = """\
You are an expert plant pathologist specializing in maize diseases. Compare the
reference diagnosis with the candidate diagnosis and decide how closely they
agree in clinical terms.

Work through these steps:
1. Extract the key characteristics of each description: disease identification,
   progression, symptoms, and treatment implications.
2. Compare the characteristics point by point, noting similarities and differences.
3. Treat synonymous terminology (for example "spots" versus "lesions") as
   equivalent, so wording differences do not mask clinical agreement.
4. Assess overall disease impact and severity, and determine whether the
   fundamental disease presentation and the required treatment are equivalent.
5. Return a dictionary with a score and your reasoning.

Score on this scale:
- 0.00-0.50: different diseases, or diseases requiring different treatments
- 0.51-0.79: same disease, but treatment adjustments may be necessary
- 0.80-1.00: essentially the same disease and treatment approach

Reference diagnosis:
<<<
{ground_truth}
>>>

Candidate diagnosis:
<<<
{generated}
>>>

Reply with a single JSON object {{"score": <number in [0, 1]>, "reasoning": "<brief explanation>"}}.
"""

REPAIR_SUFFIX = (
    '\n\nYour previous reply could not be parsed. Reply with only the record: '
    'one JSON object with keys "score" and "reasoning", nothing else.'
)


class RubricBand(Enum):
    """The three score bands of the judging rubric."""

    DIFFERENT_TREATMENT = "different_treatment"  # 0.00-0.50
    SAME_DISEASE_ADJUST = "same_disease_adjust"  # 0.51-0.79
    EQUIVALENT = "equivalent"  # 0.80-1.00


_BAND_LOW = Decimal("0.50")
_BAND_HIGH = Decimal("0.80")
_CENT = Decimal("0.01")

#: A candidate counts as correct when its judged score reaches this value.
CORRECT_THRESHOLD = 0.8


def _check_range(score: float) -> None:
    if not 0.0 <= score <= 1.0:
        raise ScoreOutOfRangeError(f"score {score} outside [0, 1]")


def _round2(score: float) -> Decimal:
    # Half-up on the decimal repr, so 0.505 lands on 0.51 rather than
    # wherever binary floating point happens to put it.
    return Decimal(repr(score)).quantize(_CENT, rounding=ROUND_HALF_UP)


def classify_band(score: float) -> RubricBand:
    _check_range(score)
    rounded = _round2(score)
    if rounded <= _BAND_LOW:
        return RubricBand.DIFFERENT_TREATMENT
    if rounded < _BAND_HIGH:
        return RubricBand.SAME_DISEASE_ADJUST
    return RubricBand.EQUIVALENT


def is_correct(score: float) -> bool:
    """Correctness threshold: score >= 0.8 at two-decimal resolution."""
    _check_range(score)
    return _round2(score) >= _BAND_HIGH


@dataclass(frozen=True)
class JudgeRequest:
    """One reference/candidate comparison to score."""

    ground_truth: str
    generated: str
    scope: StepScope
    sample_id: str

    def __post_init__(self):
        if not self.ground_truth.strip():
            raise EmptyTextError("ground_truth is empty")
        if not self.generated.strip():
            raise EmptyTextError("generated text is empty")


@dataclass(frozen=True)
class JudgeVerdict:
    score: float
    reasoning: str
    band: RubricBand
    prompt_version: str
    model_id: str


def build_judge_prompt(req: JudgeRequest) -> str:
    """Pure function of the two texts and the template version."""
    return JUDGE_PROMPT_TEMPLATE.format(ground_truth=req.ground_truth, generated=req.generated)


def _candidate_records(raw: str):
    decoder = json.JSONDecoder()
    for start in range(len(raw)):
        if raw[start] != "{":
            continue
        try:
            value, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            yield value


def parse_verdict(raw: str, prompt_version: str, model_id: str) -> JudgeVerdict:
    """Extract the first record holding a numeric score and textual reasoning.

    Tolerates surrounding prose and code fences; the record just has to be
    a well-formed JSON object somewhere in the reply.
    """
    if not raw or not raw.strip():
        raise MalformedVerdictError("empty judge reply")
    for record in _candidate_records(raw):
        score = record.get("score")
        reasoning = record.get("reasoning")
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            continue
        if not isinstance(reasoning, str):
            continue
        score = float(score)
        _check_range(score)
        return JudgeVerdict(
            score=score,
            reasoning=reasoning,
            band=classify_band(score),
            prompt_version=prompt_version,
            model_id=model_id,
        )
    raise MalformedVerdictError("no score/reasoning record found in judge reply")


# --- clients -----------------------------------------------------------------


class ChatCompletionClient(Protocol):
    """Anything that can turn chat messages into a reply string."""

    model_id: str

    def complete(self, messages: list[dict[str, str]]) -> str: ...


class RemoteChatClient:
    """Chat-completion HTTP client with bounded retries.

    Wire contract: request {"model": ..., "messages": [{"role", "content"}]},
    reply carrying the text at choices[0].message.content. The API key comes
    from the CONSENSUS_JUDGE_API_KEY environment variable.
    """

    def __init__(self, endpoint: str, model_id: str, timeout: float = REQUEST_TIMEOUT):
        self.endpoint = endpoint
        self.model_id = model_id
        self.timeout = timeout

    def complete(self, messages: list[dict[str, str]]) -> str:
        payload = {"model": self.model_id, "messages": messages}
        headers = {}
        api_key = os.environ.get(JUDGE_API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(RETRY_ATTEMPTS):
            if attempt:
                time.sleep(RETRY_BASE_DELAY * (2 ** (attempt - 1)))
            try:
                response = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                data = response.json()
                return data["choices"][0]["message"]["content"]
            except (requests.RequestException, ValueError, KeyError, IndexError) as exc:
                last_error = exc
        raise BackendUnavailableError(
            f"judge backend unreachable after {RETRY_ATTEMPTS} attempts: {last_error}"
        )


_DELIMITED_RE = re.compile(
    re.escape(_TEXT_OPEN) + r"\n(.*?)\n" + re.escape(_TEXT_CLOSE), re.DOTALL
)


class OverlapJudgeClient:
    """Deterministic offline judge for dry runs and tests.

    Scores by token-set overlap (Jaccard) between the two delimited texts
    in the prompt and replies in the standard record shape, so the full
    parse path is exercised without any network access.
    """

    def __init__(self, model_id: str = "overlap-judge"):
        self.model_id = model_id

    def complete(self, messages: list[dict[str, str]]) -> str:
        from .embedding import tokenize

        prompt = messages[-1]["content"]
        sections = _DELIMITED_RE.findall(prompt)
        if len(sections) < 2:
            raise ValueError("prompt does not carry two delimited texts")
        left = set(tokenize(sections[0]))
        right = set(tokenize(sections[1]))
        union = left | right
        score = len(left & right) / len(union) if union else 0.0
        score = float(_round2(score))
        reply = {"score": score, "reasoning": f"token overlap {score:.2f}"}
        return json.dumps(reply, sort_keys=True)


# --- cache -------------------------------------------------------------------


def cache_key(
    prompt_version: str, model_id: str, ground_truth: str, generated: str, scope: StepScope
) -> str:
    payload = json.dumps(
        [prompt_version, model_id, ground_truth, generated, scope.value],
        ensure_ascii=True,
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class JudgeCache:
    """Append-only verdict cache keyed by request digest.

    Judge calls are the expensive, nondeterministic resource; a cache hit
    must cost nothing and reruns must be reproducible. Writes are
    serialized, and per-key locks let judge() deduplicate concurrent
    identical misses (single-flight).
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, JudgeVerdict] = {}
        self._io_lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                self._entries[record["key"]] = JudgeVerdict(
                    score=record["score"],
                    reasoning=record["reasoning"],
                    band=classify_band(record["score"]),
                    prompt_version=record["prompt_version"],
                    model_id=record["model_id"],
                )

    def get(self, key: str) -> JudgeVerdict | None:
        with self._io_lock:
            return self._entries.get(key)

    def put(self, key: str, verdict: JudgeVerdict) -> None:
        record = {
            "key": key,
            "score": verdict.score,
            "reasoning": verdict.reasoning,
            "band": verdict.band.value,
            "prompt_version": verdict.prompt_version,
            "model_id": verdict.model_id,
        }
        with self._io_lock:
            self._entries[key] = verdict
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")

    def key_lock(self, key: str) -> threading.Lock:
        with self._io_lock:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self._key_locks[key] = lock
            return lock

    def __len__(self) -> int:
        with self._io_lock:
            return len(self._entries)


def judge(req: JudgeRequest, client: ChatCompletionClient, cache: JudgeCache) -> JudgeVerdict:
    """Score one request, hitting the backend at most once per cache key.

    A MalformedVerdict from the backend earns exactly one repair retry with
    a reply-with-only-the-record suffix; a second malformed reply
    propagates.
    """
    key = cache_key(
        PROMPT_VERSION, client.model_id, req.ground_truth, req.generated, req.scope
    )
    hit = cache.get(key)
    if hit is not None:
        return hit
    with cache.key_lock(key):
        hit = cache.get(key)
        if hit is not None:
            return hit
        prompt = build_judge_prompt(req)
        raw = client.complete([{"role": "user", "content": prompt}])
        try:
            verdict = parse_verdict(raw, PROMPT_VERSION, client.model_id)
        except MalformedVerdictError:
            raw = client.complete([{"role": "user", "content": prompt + REPAIR_SUFFIX}])
            verdict = parse_verdict(raw, PROMPT_VERSION, client.model_id)
        cache.put(key, verdict)
        return verdict
