import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semloop.assignment import Matching, ScoreMatrix, max_weight_matching


def brute_force_best(scores):
    """Independent oracle: enumerate every injective assignment of the
    smaller side, summing in a fixed left-fold order via fsum."""
    rows, cols = scores.shape
    best = 0.0
    if rows <= cols:
        for perm in itertools.permutations(range(cols), rows):
            best = max(best, math.fsum(scores[i, perm[i]] for i in range(rows)))
    else:
        for perm in itertools.permutations(range(rows), cols):
            best = max(best, math.fsum(scores[perm[j], j] for j in range(cols)))
    return best


small_matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 6), st.integers(1, 6)),
    elements=st.floats(0.0, 1.0, allow_nan=False),
)


class TestExamples:
    def test_single_entry(self):
        m = max_weight_matching(ScoreMatrix(np.array([[0.5]])))
        assert m.pairs == ((0, 0),)
        assert m.total_score == pytest.approx(0.5)

    def test_cross_assignment_beats_diagonal(self):
        # scaled-down version of the classic 2x2 swap case
        m = max_weight_matching(ScoreMatrix(np.array([[0.2, 0.3], [0.3, 0.2]])))
        assert m.pairs == ((0, 1), (1, 0))
        assert m.total_score == pytest.approx(0.6)

    def test_rectangular_leaves_worst_row_unmatched(self):
        m = max_weight_matching(ScoreMatrix(np.array([[0.1, 0.4], [0.2, 0.8], [0.3, 0.6]])))
        assert m.pairs == ((1, 1), (2, 0))
        assert m.total_score == pytest.approx(1.1)

    def test_lexicographic_tie_break(self):
        m = max_weight_matching(ScoreMatrix(np.array([[0.5, 0.5], [0.5, 0.5]])))
        assert m.pairs == ((0, 0), (1, 1))

    def test_zero_matrix_gives_empty_matching(self):
        m = max_weight_matching(ScoreMatrix(np.zeros((3, 3))))
        assert m.pairs == ()
        assert m.total_score == 0.0

    def test_zero_pair_kept_when_lexicographically_smaller(self):
        m = max_weight_matching(ScoreMatrix(np.array([[0.0, 0.0], [0.0, 1.0]])))
        assert m.pairs == ((0, 0), (1, 1))

    def test_sum_tie_prefers_lexicographic_pairs(self):
        # 0.3+0.2 == 0.4+0.1: two optimal matchings, take the lex-smaller set
        m = max_weight_matching(ScoreMatrix(np.array([[0.3, 0.1], [0.4, 0.2]])))
        assert m.total_score == pytest.approx(0.5)
        assert m.pairs == ((0, 0), (1, 1))


class TestOptimality:
    def test_matches_brute_force_on_random_instances(self, rng):
        for _ in range(300):
            r, c = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            scores = rng.uniform(0.0, 1.0, (r, c))
            got = max_weight_matching(ScoreMatrix(scores))
            assert got.total_score == brute_force_best(scores)

    @settings(max_examples=80, deadline=None)
    @given(small_matrices)
    def test_constraints_hold(self, scores):
        m = max_weight_matching(ScoreMatrix(scores))
        rows = [i for i, _ in m.pairs]
        cols = [j for _, j in m.pairs]
        assert len(rows) == len(set(rows))
        assert len(cols) == len(set(cols))
        assert m.total_score == pytest.approx(math.fsum(scores[i, j] for i, j in m.pairs))

    @settings(max_examples=60, deadline=None)
    @given(small_matrices)
    def test_transpose_preserves_total(self, scores):
        a = max_weight_matching(ScoreMatrix(scores))
        b = max_weight_matching(ScoreMatrix(scores.T))
        assert a.total_score == pytest.approx(b.total_score, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(small_matrices)
    def test_optimal_against_oracle(self, scores):
        got = max_weight_matching(ScoreMatrix(scores))
        assert got.total_score == pytest.approx(brute_force_best(scores), abs=1e-12)


class TestValidation:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ScoreMatrix(np.array([[1.5]]))
        with pytest.raises(ValueError):
            ScoreMatrix(np.array([[-0.1]]))
        with pytest.raises(ValueError):
            ScoreMatrix(np.array([[np.nan]]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ScoreMatrix(np.zeros((0, 3)))

    def test_row_map(self):
        m = Matching(pairs=((0, 1), (2, 0)), total_score=1.0)
        assert m.row_map() == {0: 1, 2: 0}
