"""Pipeline configuration, input validation, and the staged run loop.

Stage artifacts are plain files (candidates in, votes/verdicts/report
out), inspectable and diffable at desk scale. Each stage records a
content hash of its inputs; a rerun skips any stage whose recorded
inputs and existing output are both unchanged, so repeat runs cost no
backend calls and deleting one artifact regenerates just that artifact.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .consensus import consensus_scores, leading_submatrix, select_winner, similarity_matrix
from .diagnosis import (
    EVAL_SCOPES,
    CandidateSet,
    StepScope,
    candidate_set_from_record,
    has_step,
    read_candidate_sets,
    step_text,
)
from .embedding import EmbedderSpec, embed_batch
from .errors import (
    CosivoteError,
    GensOutOfRangeError,
    MissingVerdictError,
    MissingWinnerError,
    SchemaViolationError,
)
from .evalharness import DEFAULT_GENS_SWEEP, RunRecord, ScopeOutcome, build_report, render_report
from .judge import (
    JudgeCache,
    JudgeRequest,
    OverlapJudgeClient,
    RemoteChatClient,
    RubricBand,
    classify_band,
    is_correct,
    judge,
)
from .pairset import PairExample, ScoredCandidate, build_pairs, _pair_from_record

VOTE_MODE_WHOLE = "whole"
VOTE_MODE_PER_STEP = "per-step"

# Harness policy for pool members missing a judged step: a deterministic
# zero-score verdict instead of discarding the sample.
ABSENT_STEP_SCORE = 0.0
ABSENT_STEP_REASON = "harness: step absent from output, scored 0.0 without judging"


@dataclass
class PipelineConfig:
    candidates_path: Path
    verdicts_path: Path
    votes_path: Path
    pairs_path: Path
    report_path: Path
    cache_dir: Path
    nft: EmbedderSpec
    ft: EmbedderSpec
    judge_backend: str = "overlap"
    judge_model: str = "overlap-judge"
    judge_endpoint: str | None = None
    gens: tuple[int, ...] = DEFAULT_GENS_SWEEP
    scopes: tuple[StepScope, ...] = EVAL_SCOPES
    vote_mode: str = VOTE_MODE_WHOLE
    concurrency: int = 4
    seed: int = 0  # reserved for future resampling support

    def __post_init__(self):
        self.gens = tuple(self.gens)
        self.scopes = tuple(self.scopes)
        if not self.gens or any(g < 1 for g in self.gens):
            raise ValueError(f"gens values must be positive, got {self.gens}")
        if not self.scopes:
            raise ValueError("at least one evaluation scope is required")
        artifact_paths = [
            self.candidates_path,
            self.verdicts_path,
            self.votes_path,
            self.pairs_path,
            self.report_path,
        ]
        if len({str(p) for p in artifact_paths}) != len(artifact_paths):
            raise ValueError("artifact paths must be distinct")
        if self.vote_mode not in (VOTE_MODE_WHOLE, VOTE_MODE_PER_STEP):
            raise ValueError(f"vote_mode must be 'whole' or 'per-step', got {self.vote_mode!r}")
        if self.concurrency < 1:
            raise ValueError("concurrency must be at least 1")
        if self.nft.model_id == self.ft.model_id and self.nft != self.ft:
            raise ValueError("nft and ft embedders share a model_id but differ otherwise")

    def vote_scopes(self) -> tuple[StepScope, ...]:
        if self.vote_mode == VOTE_MODE_WHOLE:
            return (StepScope.WHOLE_OUTPUT,)
        return self.scopes

    def winner_scope(self, eval_scope: StepScope) -> StepScope:
        return StepScope.WHOLE_OUTPUT if self.vote_mode == VOTE_MODE_WHOLE else eval_scope


def default_config(workdir: str | Path = ".") -> PipelineConfig:
    base = Path(workdir)
    return PipelineConfig(
        candidates_path=base / "candidates.jsonl",
        verdicts_path=base / "verdicts.jsonl",
        votes_path=base / "votes.jsonl",
        pairs_path=base / "pairs.jsonl",
        report_path=base / "report.json",
        cache_dir=base / ".cosivote-cache",
        nft=EmbedderSpec("hash-test", "base-encoder", 384),
        ft=EmbedderSpec("hash-test", "tuned-encoder", 384),
    )


def load_config(path: str | Path) -> PipelineConfig:
    """Read a TOML config; relative paths resolve against the file's directory."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python 3.10
        import tomli as tomllib

    config_path = Path(path)
    with open(config_path, "rb") as fh:
        data = tomllib.load(fh)
    base = config_path.parent

    def _path(section: dict, key: str, default: str) -> Path:
        value = section.get(key, default)
        p = Path(value)
        return p if p.is_absolute() else base / p

    paths = data.get("paths", {})
    embedders = data.get("embedders", {})
    judge_cfg = data.get("judge", {})
    run_cfg = data.get("run", {})

    def _spec(role: str, default_model: str) -> EmbedderSpec:
        section = embedders.get(role, {})
        return EmbedderSpec(
            backend_id=section.get("backend", "hash-test"),
            model_id=section.get("model", default_model),
            dim=int(section.get("dim", 384)),
            endpoint=section.get("endpoint") or None,
        )

    return PipelineConfig(
        candidates_path=_path(paths, "candidates", "candidates.jsonl"),
        verdicts_path=_path(paths, "verdicts", "verdicts.jsonl"),
        votes_path=_path(paths, "votes", "votes.jsonl"),
        pairs_path=_path(paths, "pairs", "pairs.jsonl"),
        report_path=_path(paths, "report", "report.json"),
        cache_dir=_path(paths, "cache_dir", ".cosivote-cache"),
        nft=_spec("nft", "base-encoder"),
        ft=_spec("ft", "tuned-encoder"),
        judge_backend=judge_cfg.get("backend", "overlap"),
        judge_model=judge_cfg.get("model", "overlap-judge"),
        judge_endpoint=judge_cfg.get("endpoint") or None,
        gens=tuple(run_cfg.get("gens", DEFAULT_GENS_SWEEP)),
        scopes=tuple(StepScope.parse(s) for s in run_cfg.get("scopes", ["step1", "step2", "step3"])),
        vote_mode=run_cfg.get("vote_mode", VOTE_MODE_WHOLE),
        concurrency=int(run_cfg.get("concurrency", 4)),
        seed=int(run_cfg.get("seed", 0)),
    )


def make_judge_client(config: PipelineConfig):
    if config.judge_backend == "overlap":
        return OverlapJudgeClient(model_id=config.judge_model)
    if config.judge_backend == "remote":
        if not config.judge_endpoint:
            raise ValueError("remote judge backend needs an endpoint")
        return RemoteChatClient(config.judge_endpoint, config.judge_model)
    raise ValueError(f"unknown judge backend {config.judge_backend!r}")


# --- input validation --------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}: {self.message}"


def _iter_json_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line), None
            except json.JSONDecodeError as exc:
                yield lineno, None, f"invalid JSON: {exc.msg}"


def _check_candidate_record(record: dict, lineno: int) -> str | None:
    try:
        candidate_set_from_record(record, lineno)
    except SchemaViolationError as exc:
        return str(exc)
    return None


_VERDICT_FIELDS = ("sample_id", "candidate_index", "scope", "score", "band", "reasoning")


def _check_verdict_record(record: dict, lineno: int) -> str | None:
    for name in _VERDICT_FIELDS:
        if name not in record:
            return f"line {lineno}: missing field {name!r}"
    if not isinstance(record["sample_id"], str):
        return f"line {lineno}: sample_id must be a string"
    index = record["candidate_index"]
    if isinstance(index, bool) or not isinstance(index, int) or index < -1:
        return f"line {lineno}: candidate_index must be an integer >= -1"
    try:
        StepScope.parse(record["scope"])
    except (ValueError, AttributeError):
        return f"line {lineno}: unknown scope {record['scope']!r}"
    score = record["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0 <= score <= 1:
        return f"line {lineno}: score must be a number in [0, 1]"
    try:
        expected_band = classify_band(float(score)).value
    except CosivoteError as exc:
        return f"line {lineno}: {exc}"
    if record["band"] != expected_band:
        return f"line {lineno}: band {record['band']!r} does not match score {score}"
    if not isinstance(record["reasoning"], str):
        return f"line {lineno}: reasoning must be a string"
    return None


_VOTE_FIELDS = ("sample_id", "winner_index", "scores", "margin", "model_id", "scope")


def _check_vote_record(record: dict, lineno: int) -> str | None:
    for name in _VOTE_FIELDS:
        if name not in record:
            return f"line {lineno}: missing field {name!r}"
    if not isinstance(record["sample_id"], str):
        return f"line {lineno}: sample_id must be a string"
    scores = record["scores"]
    if not isinstance(scores, list) or not all(
        isinstance(s, (int, float)) and not isinstance(s, bool) for s in scores
    ):
        return f"line {lineno}: scores must be an array of numbers"
    winner = record["winner_index"]
    if isinstance(winner, bool) or not isinstance(winner, int) or not 0 <= winner < len(scores):
        return f"line {lineno}: winner_index must index into scores"
    margin = record["margin"]
    if isinstance(margin, bool) or not isinstance(margin, (int, float)) or margin < 0:
        return f"line {lineno}: margin must be a non-negative number"
    if not isinstance(record["model_id"], str):
        return f"line {lineno}: model_id must be a string"
    try:
        StepScope.parse(record["scope"])
    except (ValueError, AttributeError):
        return f"line {lineno}: unknown scope {record['scope']!r}"
    return None


def _check_pair_record(record: dict, lineno: int) -> str | None:
    try:
        _pair_from_record(record, lineno)
    except SchemaViolationError as exc:
        return str(exc)
    return None


_CHECKERS = {
    "candidates": _check_candidate_record,
    "verdicts": _check_verdict_record,
    "votes": _check_vote_record,
    "pairs": _check_pair_record,
}


def validate_inputs(
    candidates: str | Path | None = None,
    verdicts: str | Path | None = None,
    votes: str | Path | None = None,
    pairs: str | Path | None = None,
) -> list[Diagnostic]:
    """Per-line schema checks. An empty list means every given file is valid."""
    diagnostics = []
    for kind, path in (
        ("candidates", candidates),
        ("verdicts", verdicts),
        ("votes", votes),
        ("pairs", pairs),
    ):
        if path is None:
            continue
        checker = _CHECKERS[kind]
        for lineno, record, parse_error in _iter_json_lines(Path(path)):
            if parse_error is not None:
                diagnostics.append(Diagnostic(str(path), lineno, parse_error))
                continue
            if not isinstance(record, dict):
                diagnostics.append(Diagnostic(str(path), lineno, "record is not an object"))
                continue
            message = checker(record, lineno)
            if message is not None:
                # checkers already embed the line number in their message
                plain = message.split(": ", 1)[1] if message.startswith("line ") else message
                diagnostics.append(Diagnostic(str(path), lineno, plain))
    return diagnostics


# --- stage ledger ------------------------------------------------------------


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path: Path) -> str:
    return _sha256_bytes(path.read_bytes())


class StageLedger:
    """Input/output content hashes per stage, persisted in the cache dir."""

    def __init__(self, cache_dir: Path):
        self.path = cache_dir / "stage-manifest.json"
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            self._entries = json.loads(self.path.read_text(encoding="utf-8"))

    def should_skip(self, stage: str, inputs_digest: str, output: Path) -> bool:
        entry = self._entries.get(stage)
        return (
            entry is not None
            and entry.get("inputs") == inputs_digest
            and output.exists()
            and _sha256_file(output) == entry.get("output")
        )

    def record(self, stage: str, inputs_digest: str, output: Path) -> None:
        self._entries[stage] = {"inputs": inputs_digest, "output": _sha256_file(output)}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps(self._entries, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def _inputs_digest(files: list[Path], config_token: object) -> str:
    h = hashlib.sha256()
    for f in files:
        h.update(_sha256_file(f).encode("ascii"))
    h.update(json.dumps(config_token, sort_keys=True, default=str).encode("utf-8"))
    return h.hexdigest()


def _write_jsonl(records: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


# --- stages ------------------------------------------------------------------


def _check_gens_fit(config: PipelineConfig, sets: list[CandidateSet]) -> None:
    available = min(len(cs.sampled) for cs in sets)
    too_big = [g for g in config.gens if g > available]
    if too_big:
        raise GensOutOfRangeError(
            f"gens {too_big} exceed the smallest sampled pool ({available})"
        )


def _unique_specs(config: PipelineConfig) -> list[EmbedderSpec]:
    specs = [config.nft]
    if config.ft != config.nft:
        specs.append(config.ft)
    return specs


def stage_vote(config: PipelineConfig, sets: list[CandidateSet]) -> list[dict]:
    """Consensus winners per sample, embedder, vote scope, and gens value.

    The full pool is embedded once per (sample, embedder, scope); gens
    prefixes reuse the one similarity matrix, which is exactly equivalent
    to voting on each truncated pool.
    """
    _check_gens_fit(config, sets)
    specs = _unique_specs(config)
    scopes = config.vote_scopes()

    def vote_sample(cs: CandidateSet) -> list[dict]:
        records = []
        for spec in specs:
            for scope in scopes:
                texts = [step_text(d, scope) for d in cs.pool()]
                matrix = similarity_matrix(embed_batch(texts, spec))
                for gens in config.gens:
                    sub = leading_submatrix(matrix, gens + 1)
                    result = select_winner(consensus_scores(sub))
                    records.append(
                        {
                            "sample_id": cs.sample_id,
                            "winner_index": result.winner_index,
                            "scores": list(result.scores),
                            "margin": result.margin,
                            "model_id": spec.model_id,
                            "scope": scope.value,
                            "gens": gens,
                        }
                    )
        return records

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        per_sample = list(pool.map(vote_sample, sets))
    return [record for records in per_sample for record in records]


def stage_judge(config: PipelineConfig, sets: list[CandidateSet]) -> list[dict]:
    """Rubric verdicts for every pool member against the ground truth.

    Pool members (or references) missing the judged step get the
    deterministic zero-score verdict rather than being dropped.
    """
    client = make_judge_client(config)
    cache = JudgeCache(config.cache_dir / "judge-cache.jsonl")
    tasks = [(cs, scope) for cs in sets for scope in config.scopes]

    def judge_task(task: tuple[CandidateSet, StepScope]) -> list[dict]:
        cs, scope = task
        records = []
        reference_ok = has_step(cs.ground_truth, scope)
        for pool_index, diagnosis in enumerate(cs.pool()):
            base = {
                "sample_id": cs.sample_id,
                "candidate_index": pool_index - 1,
                "scope": scope.value,
            }
            if not reference_ok or not has_step(diagnosis, scope):
                base.update(
                    score=ABSENT_STEP_SCORE,
                    band=RubricBand.DIFFERENT_TREATMENT.value,
                    reasoning=ABSENT_STEP_REASON,
                )
            else:
                request = JudgeRequest(
                    ground_truth=step_text(cs.ground_truth, scope),
                    generated=step_text(diagnosis, scope),
                    scope=scope,
                    sample_id=cs.sample_id,
                )
                verdict = judge(request, client, cache)
                base.update(
                    score=verdict.score,
                    band=verdict.band.value,
                    reasoning=verdict.reasoning,
                )
            records.append(base)
        return records

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        per_task = list(pool.map(judge_task, tasks))
    return [record for records in per_task for record in records]


def _verdict_lookup(verdict_records: list[dict]) -> dict:
    lookup: dict[tuple[str, str], dict[int, float]] = {}
    for record in verdict_records:
        key = (record["sample_id"], record["scope"])
        lookup.setdefault(key, {})[record["candidate_index"]] = float(record["score"])
    return lookup


def _vote_lookup(vote_records: list[dict]) -> dict:
    lookup: dict[tuple[str, str, str, int], int] = {}
    for record in vote_records:
        key = (record["sample_id"], record["model_id"], record["scope"], int(record["gens"]))
        lookup[key] = int(record["winner_index"])
    return lookup


def build_run_records(
    config: PipelineConfig,
    sets: list[CandidateSet],
    verdict_records: list[dict],
    vote_records: list[dict],
) -> list[RunRecord]:
    verdicts = _verdict_lookup(verdict_records)
    votes = _vote_lookup(vote_records)
    roles = {"nft": config.nft.model_id, "ft": config.ft.model_id}
    records = []
    for cs in sets:
        record = RunRecord(cs.sample_id)
        for scope in config.scopes:
            scores = verdicts.get((cs.sample_id, scope.value))
            if scores is None:
                raise MissingVerdictError(
                    f"no verdicts for sample {cs.sample_id!r} scope {scope.value!r}"
                )
            correct = []
            for pool_index in range(cs.pool_size):
                candidate_index = pool_index - 1
                if candidate_index not in scores:
                    raise MissingVerdictError(
                        f"sample {cs.sample_id!r} scope {scope.value!r}: "
                        f"no verdict for candidate {candidate_index}"
                    )
                correct.append(is_correct(scores[candidate_index]))
            winner_scope = config.winner_scope(scope)
            winners: dict[str, dict[int, int]] = {}
            for role, model_id in roles.items():
                per_gens = {}
                for gens in config.gens:
                    key = (cs.sample_id, model_id, winner_scope.value, gens)
                    if key not in votes:
                        raise MissingWinnerError(
                            f"no {role} vote for sample {cs.sample_id!r} at gens={gens}"
                        )
                    per_gens[gens] = votes[key]
                winners[role] = per_gens
            record.outcomes[scope] = ScopeOutcome(
                greedy_correct=correct[0],
                candidate_correct=tuple(correct),
                winners=winners,
            )
        records.append(record)
    return records


def stage_eval(
    config: PipelineConfig,
    sets: list[CandidateSet],
    verdict_records: list[dict],
    vote_records: list[dict],
) -> dict:
    records = build_run_records(config, sets, verdict_records, vote_records)
    report = build_report(records, list(config.scopes), list(config.gens))
    return {"counts": report.to_counts_dict(), "table": render_report(report)}


def build_pairset_records(
    sets: list[CandidateSet], verdict_records: list[dict], scope: StepScope
) -> list[PairExample]:
    """Scored candidates -> all unordered pairs, in sample order."""
    verdicts = _verdict_lookup(verdict_records)
    pairs: list[PairExample] = []
    for cs in sets:
        scores = verdicts.get((cs.sample_id, scope.value))
        if scores is None:
            raise MissingVerdictError(
                f"no verdicts for sample {cs.sample_id!r} scope {scope.value!r}"
            )
        scored = []
        for pool_index, diagnosis in enumerate(cs.pool()):
            candidate_index = pool_index - 1
            if candidate_index not in scores:
                raise MissingVerdictError(
                    f"sample {cs.sample_id!r} scope {scope.value!r}: "
                    f"no verdict for candidate {candidate_index}"
                )
            text = step_text(diagnosis, scope) if has_step(diagnosis, scope) else ""
            scored.append(
                ScoredCandidate(
                    sample_id=cs.sample_id,
                    candidate_index=candidate_index,
                    text=text,
                    judge_score=scores[candidate_index],
                )
            )
        pairs.extend(build_pairs(scored))
    return pairs


# --- the run loop ------------------------------------------------------------


def _spec_token(spec: EmbedderSpec) -> dict:
    return dataclasses.asdict(spec)


def run_pipeline(config: PipelineConfig, stream=None) -> int:
    """Execute vote, judge, and eval with content-hash stage skipping."""
    out = stream or sys.stderr
    if not config.candidates_path.exists():
        print(f"candidate file not found: {config.candidates_path}", file=out)
        return 2
    try:
        sets = read_candidate_sets(config.candidates_path)
        if not sets:
            print(f"candidate file is empty: {config.candidates_path}", file=out)
            return 2
        config.cache_dir.mkdir(parents=True, exist_ok=True)
        ledger = StageLedger(config.cache_dir)

        vote_digest = _inputs_digest(
            [config.candidates_path],
            {
                "stage": "vote",
                "specs": [_spec_token(s) for s in _unique_specs(config)],
                "gens": config.gens,
                "scopes": [s.value for s in config.vote_scopes()],
            },
        )
        if ledger.should_skip("vote", vote_digest, config.votes_path):
            print(f"vote: up to date ({config.votes_path})", file=out)
        else:
            _write_jsonl(stage_vote(config, sets), config.votes_path)
            ledger.record("vote", vote_digest, config.votes_path)
            print(f"vote: wrote {config.votes_path}", file=out)

        judge_digest = _inputs_digest(
            [config.candidates_path],
            {
                "stage": "judge",
                "backend": config.judge_backend,
                "model": config.judge_model,
                "scopes": [s.value for s in config.scopes],
            },
        )
        if ledger.should_skip("judge", judge_digest, config.verdicts_path):
            print(f"judge: up to date ({config.verdicts_path})", file=out)
        else:
            _write_jsonl(stage_judge(config, sets), config.verdicts_path)
            ledger.record("judge", judge_digest, config.verdicts_path)
            print(f"judge: wrote {config.verdicts_path}", file=out)

        eval_digest = _inputs_digest(
            [config.candidates_path, config.votes_path, config.verdicts_path],
            {
                "stage": "eval",
                "gens": config.gens,
                "scopes": [s.value for s in config.scopes],
                "vote_mode": config.vote_mode,
                "roles": {"nft": config.nft.model_id, "ft": config.ft.model_id},
            },
        )
        if ledger.should_skip("eval", eval_digest, config.report_path):
            print(f"eval: up to date ({config.report_path})", file=out)
        else:
            payload = stage_eval(
                config,
                sets,
                _read_jsonl(config.verdicts_path),
                _read_jsonl(config.votes_path),
            )
            config.report_path.parent.mkdir(parents=True, exist_ok=True)
            config.report_path.write_text(
                json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
            ledger.record("eval", eval_digest, config.report_path)
            print(f"eval: wrote {config.report_path}", file=out)
    except FileNotFoundError as exc:
        print(f"missing file: {exc.filename}", file=out)
        return 2
    except CosivoteError as exc:
        print(f"{type(exc).__name__}: {exc}", file=out)
        return 1
    return 0
