"""Pairwise similarity matrices and cosine-consistency winner selection.

The winner of a candidate pool is the member with the highest mean cosine
similarity to all other members. Self-similarity is excluded from the
mean; including it cannot change the argmax (the inclusive mean is a
strictly increasing function of the exclusive one), and exclusion keeps
scores readable as agreement-with-others.
"""
from __future__ import annotations

from dataclasses import dataclass

from .diagnosis import CandidateSet, StepScope, step_text
from .embedding import EmbedderSpec, EmbeddingVector, cosine, embed_batch
from .errors import EmptyScoresError, PoolTooSmallError, StepAbsentError


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric n x n cosine matrix with an exact unit diagonal."""

    entries: tuple[tuple[float, ...], ...]

    @property
    def n(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ConsensusResult:
    """Winner of one vote: argmax of mean off-diagonal similarity.

    Ties break toward the smallest index, so a perfect tie falls back to
    the greedy decode at pool index 0. margin is winner minus runner-up.
    """

    winner_index: int
    scores: tuple[float, ...]
    margin: float


def similarity_matrix(vectors: list[EmbeddingVector]) -> SimilarityMatrix:
    """Cosine of every unordered pair, computed once and mirrored."""
    n = len(vectors)
    if n < 2:
        raise PoolTooSmallError(f"need at least 2 vectors, got {n}")
    rows = [[1.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            s = cosine(vectors[i], vectors[j])
            rows[i][j] = s
            rows[j][i] = s
    return SimilarityMatrix(tuple(tuple(row) for row in rows))


def leading_submatrix(m: SimilarityMatrix, k: int) -> SimilarityMatrix:
    """Top-left k x k block; pool prefixes reuse one full matrix."""
    if not 2 <= k <= m.n:
        raise PoolTooSmallError(f"submatrix size {k} out of range for n={m.n}")
    return SimilarityMatrix(tuple(row[:k] for row in m.entries[:k]))


def consensus_scores(m: SimilarityMatrix) -> list[float]:
    """Per-candidate mean similarity to the other candidates (self excluded)."""
    n = m.n
    if n < 2:
        raise PoolTooSmallError(f"need at least 2 candidates, got {n}")
    return [
        sum(m.entries[i][j] for j in range(n) if j != i) / (n - 1)
        for i in range(n)
    ]


def select_winner(scores: list[float]) -> ConsensusResult:
    """Smallest index attaining the maximum score."""
    if not scores:
        raise EmptyScoresError("no scores to select from")
    winner = max(range(len(scores)), key=lambda i: (scores[i], -i))
    if len(scores) == 1:
        margin = 0.0
    else:
        runner_up = max(s for i, s in enumerate(scores) if i != winner)
        margin = scores[winner] - runner_up
    return ConsensusResult(winner, tuple(scores), margin)


def vote(candidates: CandidateSet, spec: EmbedderSpec, scope: StepScope) -> ConsensusResult:
    """Embed the pool (greedy at index 0), then pick the consensus winner."""
    pool = candidates.pool()
    if len(pool) < 2:
        raise PoolTooSmallError(f"pool of {len(pool)} for sample {candidates.sample_id!r}")
    texts = []
    for index, diagnosis in enumerate(pool):
        try:
            texts.append(step_text(diagnosis, scope))
        except StepAbsentError as exc:
            raise StepAbsentError(exc.scope, candidate_index=index) from exc
    vectors = embed_batch(texts, spec)
    return select_winner(consensus_scores(similarity_matrix(vectors)))
