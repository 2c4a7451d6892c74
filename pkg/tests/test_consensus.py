from __future__ import annotations

import random

import pytest

from cosivote import (
    EmbedderSpec,
    EmbeddingVector,
    PoolTooSmallError,
    StepAbsentError,
    StepScope,
    consensus_scores,
    cosine,
    leading_submatrix,
    select_winner,
    similarity_matrix,
    vote,
)
from cosivote.consensus import ConsensusResult, SimilarityMatrix
from cosivote.errors import EmptyScoresError

from conftest import make_candidate_set


def random_vectors(rng, n, dim):
    vectors = []
    while len(vectors) < n:
        values = tuple(rng.uniform(-2, 2) for _ in range(dim))
        if any(values):
            vectors.append(EmbeddingVector(values))
    return vectors


def brute_force_winner(vectors):
    """Independent recomputation: full double loop, no shared helpers."""
    n = len(vectors)
    means = []
    for i in range(n):
        total = 0.0
        for j in range(n):
            if i != j:
                total += cosine(vectors[i], vectors[j])
        means.append(total / (n - 1))
    best = 0
    for i in range(1, n):
        if means[i] > means[best]:
            best = i
    return best, means


def test_similarity_matrix_shape_and_symmetry():
    rng = random.Random(99)
    vectors = random_vectors(rng, 5, 4)
    m = similarity_matrix(vectors)
    assert m.n == 5
    for i in range(5):
        assert m.entries[i][i] == 1.0
        for j in range(5):
            assert m.entries[i][j] == m.entries[j][i]
            assert m.entries[i][j] == pytest.approx(cosine(vectors[i], vectors[j]))


def test_similarity_matrix_needs_two():
    with pytest.raises(PoolTooSmallError):
        similarity_matrix([EmbeddingVector((1.0, 0.0))])


def test_leading_submatrix_equals_truncated_recompute():
    rng = random.Random(5)
    vectors = random_vectors(rng, 7, 6)
    full = similarity_matrix(vectors)
    for k in range(2, 8):
        assert leading_submatrix(full, k) == similarity_matrix(vectors[:k])


def test_consensus_scores_brute_force_oracle():
    rng = random.Random(2718)
    for _ in range(100):
        n = rng.randint(2, 8)
        vectors = random_vectors(rng, n, rng.randint(2, 6))
        scores = consensus_scores(similarity_matrix(vectors))
        winner = select_winner(scores).winner_index
        expected_winner, expected_means = brute_force_winner(vectors)
        assert scores == pytest.approx(expected_means)
        assert winner == expected_winner


def test_select_winner_tie_breaks_to_smallest_index():
    result = select_winner([0.4, 0.9, 0.9, 0.1])
    assert result.winner_index == 1
    assert result.margin == 0.0


def test_select_winner_margin():
    result = select_winner([0.2, 0.8, 0.5])
    assert result.winner_index == 1
    assert result.margin == pytest.approx(0.3)
    assert result.scores == (0.2, 0.8, 0.5)


def test_select_winner_rejects_empty():
    with pytest.raises(EmptyScoresError):
        select_winner([])


def test_winner_tracks_permutation():
    rng = random.Random(31)
    vectors = random_vectors(rng, 6, 5)
    base = select_winner(consensus_scores(similarity_matrix(vectors)))
    for _ in range(20):
        order = list(range(6))
        rng.shuffle(order)
        shuffled = [vectors[i] for i in order]
        result = select_winner(consensus_scores(similarity_matrix(shuffled)))
        # scores are permutation-equivariant; the winning vector may differ
        # only when the permutation moves a tied score to a smaller index
        assert result.scores[result.winner_index] == pytest.approx(
            base.scores[base.winner_index]
        )


def test_vote_prefers_the_agreeing_cluster():
    cs = make_candidate_set("s1", "rust", "blight", ["rust", "rust"])
    spec = EmbedderSpec("hash-test", "m", 64)
    result = vote(cs, spec, StepScope.WHOLE_OUTPUT)
    # pool = [blight, rust, rust]; the two rust members agree, and the
    # earlier of the tied pair wins
    assert result.winner_index == 1


def test_vote_twenty_one_candidate_pool():
    cs = make_candidate_set("s2", "gls", "gls", ["gls"] * 14 + ["rust"] * 6)
    result = vote(cs, EmbedderSpec("hash-test", "m", 64), StepScope.WHOLE_OUTPUT)
    assert len(result.scores) == 21
    assert result.winner_index == 0


def test_vote_scope_selects_step_text():
    # Pool splits 1-vs-2 on every step; the duplicated pair's first
    # member (pool index 1) wins at either scope.
    cs = make_candidate_set("s3", "rust", "rust", ["blight", "blight"])
    spec = EmbedderSpec("hash-test", "m", 128)
    whole = vote(cs, spec, StepScope.WHOLE_OUTPUT)
    by_assessment = vote(cs, spec, StepScope.ASSESSMENT)
    assert by_assessment.winner_index == 1
    assert whole.winner_index == 1


def test_vote_rejects_single_candidate():
    cs = make_candidate_set("s4", "rust", "rust", [])
    with pytest.raises(PoolTooSmallError):
        vote(cs, EmbedderSpec("hash-test", "m", 16), StepScope.WHOLE_OUTPUT)


def test_vote_missing_step_names_candidate():
    from cosivote import CandidateSet, parse_diagnosis

    from conftest import diag

    cs = CandidateSet(
        sample_id="s5",
        ground_truth=diag("rust"),
        greedy=diag("rust"),
        sampled=(diag("gls"), parse_diagnosis("rust seen; brown pustules; spray")),
    )
    with pytest.raises(StepAbsentError) as exc:
        vote(cs, EmbedderSpec("hash-test", "m", 16), StepScope.PREVENTION)
    assert exc.value.candidate_index == 2
    assert exc.value.scope is StepScope.PREVENTION


def test_matrix_and_result_are_value_objects():
    m = SimilarityMatrix(((1.0, 0.5), (0.5, 1.0)))
    assert m == SimilarityMatrix(((1.0, 0.5), (0.5, 1.0)))
    r = ConsensusResult(0, (0.5, 0.4), 0.1)
    assert r.winner_index == 0
