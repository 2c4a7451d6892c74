"""Cosine-consistency voting and rubric-based evaluation for staged diagnoses.

The library takes candidate pools (one greedy decode plus temperature
samples per image), picks the most self-consistent candidate by mean
pairwise embedding cosine, scores candidates against references with a
three-band treatment rubric, turns judged pools into similarity training
pairs, and aggregates everything into per-step accuracy tables.
"""
from .consensus import (
    ConsensusResult,
    SimilarityMatrix,
    consensus_scores,
    leading_submatrix,
    select_winner,
    similarity_matrix,
    vote,
)
from .diagnosis import (
    EVAL_SCOPES,
    STEP_SEPARATOR,
    CandidateSet,
    Diagnosis,
    StepScope,
    parse_diagnosis,
    read_candidate_sets,
    render_diagnosis,
    step_text,
    truncate_sampled,
    write_candidate_sets,
)
from .embedding import (
    EmbedderSpec,
    EmbeddingVector,
    cosine,
    embed_batch,
    hash_test_embedder,
    register_backend,
    registered_backends,
    unregister_backend,
)
from .errors import (
    BackendUnavailableError,
    CosivoteError,
    MalformedVerdictError,
    PoolTooSmallError,
    SchemaViolationError,
    StepAbsentError,
)
from .evalharness import (
    DEFAULT_GENS_SWEEP,
    EvaluationReport,
    ReportCell,
    RunRecord,
    ScopeOutcome,
    build_report,
    format_pct,
    render_report,
    strategy_accuracy,
    truncate_pool,
    winners_pct,
)
from .judge import (
    CORRECT_THRESHOLD,
    PROMPT_VERSION,
    JudgeCache,
    JudgeRequest,
    JudgeVerdict,
    OverlapJudgeClient,
    RemoteChatClient,
    RubricBand,
    build_judge_prompt,
    classify_band,
    is_correct,
    judge,
    parse_verdict,
)
from .pairset import (
    GREEDY_INDEX,
    PAIR_LABELS,
    PairExample,
    ScoredCandidate,
    assign_pair_label,
    build_pairs,
    read_pairset,
    write_pairset,
)
from .pipeline import (
    Diagnostic,
    PipelineConfig,
    build_pairset_records,
    build_run_records,
    default_config,
    load_config,
    run_pipeline,
    stage_eval,
    stage_judge,
    stage_vote,
    validate_inputs,
)

__version__ = "0.1.0"

__all__ = [
    "BackendUnavailableError",
    "CandidateSet",
    "ConsensusResult",
    "CORRECT_THRESHOLD",
    "CosivoteError",
    "DEFAULT_GENS_SWEEP",
    "Diagnosis",
    "Diagnostic",
    "EmbedderSpec",
    "EmbeddingVector",
    "EvaluationReport",
    "EVAL_SCOPES",
    "GREEDY_INDEX",
    "JudgeCache",
    "JudgeRequest",
    "JudgeVerdict",
    "MalformedVerdictError",
    "OverlapJudgeClient",
    "PAIR_LABELS",
    "PairExample",
    "PipelineConfig",
    "PoolTooSmallError",
    "PROMPT_VERSION",
    "RemoteChatClient",
    "ReportCell",
    "RubricBand",
    "RunRecord",
    "SchemaViolationError",
    "ScopeOutcome",
    "ScoredCandidate",
    "SimilarityMatrix",
    "STEP_SEPARATOR",
    "StepAbsentError",
    "StepScope",
    "assign_pair_label",
    "build_judge_prompt",
    "build_pairs",
    "build_pairset_records",
    "build_report",
    "build_run_records",
    "classify_band",
    "consensus_scores",
    "cosine",
    "default_config",
    "embed_batch",
    "format_pct",
    "hash_test_embedder",
    "is_correct",
    "judge",
    "leading_submatrix",
    "load_config",
    "parse_diagnosis",
    "parse_verdict",
    "read_candidate_sets",
    "read_pairset",
    "register_backend",
    "registered_backends",
    "render_diagnosis",
    "render_report",
    "run_pipeline",
    "select_winner",
    "similarity_matrix",
    "stage_eval",
    "stage_judge",
    "stage_vote",
    "step_text",
    "strategy_accuracy",
    "truncate_pool",
    "truncate_sampled",
    "unregister_backend",
    "validate_inputs",
    "vote",
    "winners_pct",
    "write_candidate_sets",
    "write_pairset",
]
