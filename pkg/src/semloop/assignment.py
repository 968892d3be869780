"""Exact maximum weighted bipartite matching between subgraph vertex sets."""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import solve_assignment

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class ScoreMatrix:
    """Dense pairwise similarity scores, rows = query vertices, cols = candidate."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError(f"score matrix must be 2-d and non-empty, got {s.shape}")
        if not np.isfinite(s).all() or (s < 0).any() or (s > 1).any():
            raise ValueError("scores must be finite and within [0, 1]")
        object.__setattr__(self, "scores", s)

    @property
    def rows(self):
        return self.scores.shape[0]

    @property
    def cols(self):
        return self.scores.shape[1]


@dataclass(frozen=True)
class Matching:
    """One-to-one row/col pairing with its total score."""

    pairs: tuple
    total_score: float

    def row_map(self):
        return {i: j for i, j in self.pairs}


def _pairs_total(scores, pairs):
    return math.fsum(scores[i, j] for i, j in pairs)


def _solve_pairs(scores):
    row_to_col = solve_assignment(scores)
    return [(i, int(j)) for i, j in enumerate(row_to_col) if j >= 0]


def _best_total_with(scores, fixed_pairs, row_start):
    """Optimal total over matchings containing ``fixed_pairs`` and using only
    rows >= row_start for the remaining assignments."""
    used_cols = {j for _, j in fixed_pairs}
    free_rows = [i for i in range(row_start, scores.shape[0])]
    free_cols = [j for j in range(scores.shape[1]) if j not in used_cols]
    base = _pairs_total(scores, fixed_pairs)
    if not free_rows or not free_cols:
        return base
    sub = scores[np.ix_(free_rows, free_cols)]
    sub_pairs = _solve_pairs(sub)
    return base + _pairs_total(sub, sub_pairs)


def max_weight_matching(matrix):
    """Optimal matching maximizing the total score.

    Among equally optimal matchings (within a 1e-9 tie tolerance) the lowest
    lexicographic (row, col) pair set is returned, which also drops pairs
    that contribute nothing: rows are fixed greedily in order and the search
    stops as soon as the fixed pairs already reach the optimum.  A row-maxima
    upper bound prunes columns that cannot possibly complete to the optimum
    before paying for an exact completion solve.
    """
    scores = matrix.scores if isinstance(matrix, ScoreMatrix) else ScoreMatrix(matrix).scores
    rows, cols = scores.shape
    best_total = _pairs_total(scores, _solve_pairs(scores))

    fixed = []
    for i in range(rows):
        fixed_sum = math.fsum(scores[a, b] for a, b in fixed)
        if fixed_sum >= best_total - _TIE_TOL:
            break
        used_cols = {j for _, j in fixed}
        free_mask = np.ones(cols, dtype=bool)
        for j in used_cols:
            free_mask[j] = False
        # over-estimate of what rows below i can still add (ignores column
        # exclusivity, so it never under-counts)
        suffix = float(scores[i + 1 :, free_mask].max(axis=1).sum()) if i + 1 < rows and free_mask.any() else 0.0
        for j in range(cols):
            if j in used_cols:
                continue
            if fixed_sum + scores[i, j] + suffix < best_total - _TIE_TOL:
                continue
            attempt = _best_total_with(scores, fixed + [(i, j)], i + 1)
            if attempt >= best_total - _TIE_TOL:
                fixed.append((i, j))
                break
    pairs = tuple(fixed)
    return Matching(pairs=pairs, total_score=_pairs_total(scores, pairs))
