"""Appearance (bag-of-words) and semantic (class distribution) descriptors
and their similarity scores."""

import numpy as np

from ._backend import l1_score
from .errors import ClassSetMismatch, EmptyDescriptorSet, ZeroNormDescriptor


class BowVector:
    """Sparse non-negative histogram over an opaque integer word vocabulary.

    Stored as parallel arrays of sorted unique word ids and weights so the
    scoring kernels can run merge walks directly.
    """

    __slots__ = ("ids", "weights")

    def __init__(self, ids, weights):
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if ids.shape != weights.shape:
            raise ValueError("ids and weights must have equal length")
        if weights.size and (not np.isfinite(weights).all() or (weights < 0).any()):
            raise ValueError("weights must be finite and non-negative")
        order = np.argsort(ids, kind="stable")
        ids = ids[order]
        weights = weights[order]
        if ids.size > 1 and (np.diff(ids) == 0).any():
            uniq, inverse = np.unique(ids, return_inverse=True)
            weights = np.bincount(inverse, weights=weights)
            ids = uniq
        self.ids = ids
        self.weights = weights

    @classmethod
    def from_dict(cls, entries):
        items = sorted(entries.items())
        return cls([k for k, _ in items], [v for _, v in items])

    def norm(self):
        return float(self.weights.sum())

    def as_pairs(self):
        return [[int(i), float(w)] for i, w in zip(self.ids, self.weights)]

    def __len__(self):
        return int(self.ids.size)

    def __eq__(self, other):
        return (
            isinstance(other, BowVector)
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self):
        return f"BowVector({len(self)} words, norm={self.norm():.3g})"


class ClassDistribution:
    """Probability distribution over a fixed class set."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64).reshape(-1)
        if p.size == 0 or (p < 0).any() or not np.isfinite(p).all():
            raise ValueError("probabilities must be non-negative and finite")
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        self.probs = p

    @classmethod
    def from_scores(cls, scores):
        """Normalize a non-negative score vector into a distribution."""
        s = np.asarray(scores, dtype=np.float64).reshape(-1)
        total = s.sum()
        if total <= 0:
            raise ValueError("scores must have positive mass")
        return cls(s / total)

    def argmax(self):
        return int(np.argmax(self.probs))

    def fuse(self, scores):
        """Multiplicative fusion with a fresh detection's class scores."""
        s = np.asarray(scores, dtype=np.float64).reshape(-1)
        if s.shape != self.probs.shape:
            raise ClassSetMismatch(f"{s.size} classes vs {self.probs.size}")
        merged = self.probs * s
        total = merged.sum()
        if total <= 0:
            # contradictory evidence; keep the previous belief
            return ClassDistribution(self.probs.copy())
        return ClassDistribution(merged / total)

    def __len__(self):
        return int(self.probs.size)

    def __repr__(self):
        return f"ClassDistribution(argmax={self.argmax()}, n={len(self)})"


def l1_similarity(a, b):
    """Score in [0, 1]: ``1 - 0.5 * || a/|a| - b/|b| ||_1``."""
    if a.norm() <= 0.0 or b.norm() <= 0.0:
        raise ZeroNormDescriptor("cannot normalize a zero-norm descriptor")
    return float(l1_score(a.ids, a.weights, b.ids, b.weights))


def bhattacharyya(p, q):
    """Bhattacharyya coefficient ``sum_z sqrt(p(z) q(z))`` in [0, 1]."""
    if len(p) != len(q):
        raise ClassSetMismatch(f"{len(p)} classes vs {len(q)}")
    return float(np.minimum(np.sqrt(p.probs * q.probs).sum(), 1.0))


def pair_similarity(s_a, s_c):
    """Combined vertex similarity: the product of appearance and class scores."""
    return s_a * s_c


def best_appearance_score(set_i, set_j):
    """Max pairwise L1 similarity between two descriptor sets."""
    set_i = list(set_i)
    set_j = list(set_j)
    if not set_i or not set_j:
        raise EmptyDescriptorSet("appearance comparison needs non-empty sets")
    return max(l1_similarity(a, b) for a in set_i for b in set_j)
