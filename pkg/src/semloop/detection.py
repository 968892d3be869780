"""Hierarchical semantic loop detection: BoW candidate proposal, vertex
matching, coarse RANSAC similarity estimation over object centers, adjacency
correlation of the matched subgraphs, point-level refinement, and drift
correction of the trajectory."""

import dataclasses
import itertools
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ._backend import l1_scores_many
from .assignment import ScoreMatrix, max_weight_matching
from .covis import CovisibilityGraph, adjacency_matrix
from .descriptors import l1_similarity
from .errors import KeyframeNotInTrajectory, UnknownKeyframe, ZeroNormDescriptor
from .geometry import (
    Pose,
    Sim3Transform,
    horn_sim3,
    project_points,
    sim3_interp,
)
from .errors import DegenerateConfiguration


@dataclass(frozen=True)
class DetectionParams:
    """Thresholds and knobs of the detection pipeline.

    The six similarity/consensus thresholds default to the reference
    operating point; every field can be overridden by a ``SEMLOOP_<NAME>``
    environment variable or a JSON params file.
    """

    tau_as: float = 0.3
    tau_n: float = 0.008
    tau_s: float = 0.5
    m_inl: int = 3
    tau_eps: float = 0.59
    tau_e: float = 0.5
    max_ransac_iters: int = 100
    max_reproj_error_px: float = 10.0
    refine_min_inliers: int = 12
    refine_search_radius_px: float = 8.0
    temporal_consistency_len: int = 3
    min_kf_gap: int = 50
    smin_floor: float = 0.05
    strict_inlier_counts: bool = True
    reproj_check: str = "both"  # "both" or "either" image direction must pass
    edge_autopass_both_empty: bool = True

    def __post_init__(self):
        if self.m_inl < 3:
            raise ValueError("m_inl must be at least 3")
        if self.reproj_check not in ("both", "either"):
            raise ValueError(f"reproj_check must be 'both' or 'either', got {self.reproj_check!r}")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_env_overrides(self, env=None):
        """Apply ``SEMLOOP_<FIELD>`` environment overrides, e.g. SEMLOOP_TAU_AS."""
        env = os.environ if env is None else env
        kw = {}
        for f in dataclasses.fields(self):
            raw = env.get("SEMLOOP_" + f.name.upper())
            if raw is None:
                continue
            if f.type == "bool" or isinstance(getattr(self, f.name), bool):
                kw[f.name] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(getattr(self, f.name), int):
                kw[f.name] = int(raw)
            elif isinstance(getattr(self, f.name), float):
                kw[f.name] = float(raw)
            else:
                kw[f.name] = raw
        return self.replace(**kw) if kw else self


@dataclass(frozen=True)
class Rejection:
    """Structured per-stage rejection: which stage said no and why."""

    stage: str
    reason: str
    details: dict = field(default_factory=dict)

    def __bool__(self):  # rejections are falsy so `if result:` reads naturally
        return False


@dataclass
class VertexMatchSet:
    """Accepted vertex correspondences after the similarity filter.

    ``matches`` holds (landmark_query, landmark_candidate, score) triples;
    ``raw_*`` are the pre-filter matching statistics used by the average
    similarity gate.
    """

    matches: list
    n: int
    total_score: float
    avg_score: float
    raw_pair_count: int
    raw_total_score: float
    raw_avg_score: float


@dataclass
class CoarseSim3Result:
    """Accepted coarse similarity transform with its consensus support."""

    sim3: Sim3Transform
    inlier_mask: np.ndarray
    num_inliers: int
    inlier_ratio: float
    iterations: int


@dataclass
class LoopClosureReport:
    """An accepted loop closure and all stage scores that admitted it."""

    current_kf: int
    loop_kf: int
    match_set: VertexMatchSet
    coarse: CoarseSim3Result
    edge_score: float
    fine_sim3: Sim3Transform
    refine_inliers: int
    bow_score: float


class MapDatabase:
    """Keyframe store + covisibility graph + frame-BoW index.

    Single writer: call :meth:`add_keyframe` in id order, then query.  The
    temporal-consistency state advances once per ``candidate_keyframes``
    call, so run one detection query per integrated keyframe.
    """

    def __init__(self, edge_threshold=3, assoc_radius=0.5):
        self.graph = CovisibilityGraph(edge_threshold=edge_threshold, assoc_radius=assoc_radius)
        self.records = {}
        self.order = []
        self._bow_ids = []
        self._bow_weights = []
        self._bow_cache = None
        self._score_cache = None
        self._consistency_groups = []

    def add_keyframe(self, record):
        self.graph.integrate_keyframe(record)
        self.records[record.id] = record
        self.order.append(record.id)
        self._bow_ids.append(record.frame_bow.ids)
        self._bow_weights.append(record.frame_bow.weights)
        self._bow_cache = None

    def record(self, kf_id):
        if kf_id not in self.records:
            raise UnknownKeyframe(f"keyframe {kf_id} not in database")
        return self.records[kf_id]

    def _bow_arrays(self):
        if self._bow_cache is None:
            lens = [len(a) for a in self._bow_ids]
            offsets = np.zeros(len(lens) + 1, dtype=np.int64)
            np.cumsum(lens, out=offsets[1:])
            ids_cat = (
                np.concatenate(self._bow_ids) if self._bow_ids else np.empty(0, np.int64)
            )
            w_cat = (
                np.concatenate(self._bow_weights) if self._bow_weights else np.empty(0, np.float64)
            )
            self._bow_cache = (ids_cat, w_cat, offsets)
        return self._bow_cache

    def frame_scores(self, kf_id):
        """L1 similarity of ``kf_id``'s frame BoW against every stored keyframe,
        aligned with ``self.order``.  Cached per (query, database size): the
        same query repeats across the proposal and detection stages."""
        key = (kf_id, len(self.order))
        if self._score_cache is not None and self._score_cache[0] == key:
            return self._score_cache[1]
        rec = self.record(kf_id)
        ids_cat, w_cat, offsets = self._bow_arrays()
        scores = l1_scores_many(rec.frame_bow.ids, rec.frame_bow.weights, ids_cat, w_cat, offsets)
        self._score_cache = (key, scores)
        return scores


def min_score_threshold(db, kc, params=None):
    """Minimum frame-BoW similarity between ``kc`` and its covisible
    keyframes; the configured floor when it has none."""
    params = params or DetectionParams()
    neighbors = db.graph.covisible_keyframes(kc)
    if not neighbors:
        return params.smin_floor
    scores = db.frame_scores(kc)
    index = {k: i for i, k in enumerate(db.order)}
    return float(min(scores[index[n]] for n in neighbors))


def candidate_keyframes(db, kc, params):
    """Loop-candidate keyframes for query ``kc``: sufficiently old, not
    covisible, frame-BoW score above the adaptive minimum, and temporally
    consistent over consecutive queries.  Ordered by descending BoW score.

    Advances the temporal-consistency state; call once per query keyframe.
    """
    scores = db.frame_scores(kc)
    s_min = min_score_threshold(db, kc, params)
    covis = db.graph.covisible_keyframes(kc)
    raw = []
    for idx, kl in enumerate(db.order):
        if kl == kc or kc - kl < params.min_kf_gap or kl in covis:
            continue
        if scores[idx] >= s_min:
            raw.append((float(scores[idx]), kl))
    raw.sort(key=lambda t: (-t[0], t[1]))

    prev_groups = db._consistency_groups
    new_groups = []
    emitted = []
    for score, kl in raw:
        group = db.graph.covisible_keyframes(kl)
        group.add(kl)
        count = 1
        for prev_set, prev_count in prev_groups:
            if prev_count + 1 > count and not prev_set.isdisjoint(group):
                count = prev_count + 1
        new_groups.append((group, count))
        if count >= params.temporal_consistency_len:
            emitted.append((score, kl))
    db._consistency_groups = new_groups
    return [kl for _, kl in emitted]


def _patch_set(landmark, kf_id):
    d = landmark.patch_descriptors.get(kf_id)
    if d is not None:
        return [d]
    # patch-level provenance missing: fall back to every stored descriptor
    return [landmark.patch_descriptors[k] for k in sorted(landmark.patch_descriptors)]


def score_matrix(gc, gl):
    """Pairwise vertex similarity: appearance L1 times class Bhattacharyya."""
    rows = len(gc.landmarks)
    cols = len(gl.landmarks)
    descs_c = [_patch_set(lm, gc.kf_id) for lm in gc.landmarks]
    descs_l = [_patch_set(lm, gl.kf_id) for lm in gl.landmarks]

    if all(len(d) == 1 for d in descs_c) and all(len(d) == 1 for d in descs_l):
        # common case: one patch descriptor per side, batch the L1 scoring
        col_vecs = [d[0] for d in descs_l]
        lens = [len(v.ids) for v in col_vecs]
        offsets = np.zeros(cols + 1, dtype=np.int64)
        np.cumsum(lens, out=offsets[1:])
        ids_cat = np.concatenate([v.ids for v in col_vecs])
        w_cat = np.concatenate([v.weights for v in col_vecs])
        s_a = np.empty((rows, cols), dtype=np.float64)
        for i, dset in enumerate(descs_c):
            if dset[0].norm() <= 0.0:
                raise ZeroNormDescriptor("patch descriptor has zero norm")
            s_a[i] = l1_scores_many(dset[0].ids, dset[0].weights, ids_cat, w_cat, offsets)
    else:
        s_a = np.zeros((rows, cols), dtype=np.float64)
        for i in range(rows):
            for j in range(cols):
                s_a[i, j] = max(
                    l1_similarity(a, b) for a in descs_c[i] for b in descs_l[j]
                )

    sqrt_c = np.sqrt(np.stack([lm.class_dist.probs for lm in gc.landmarks]))
    sqrt_l = np.sqrt(np.stack([lm.class_dist.probs for lm in gl.landmarks]))
    s_c = np.minimum(sqrt_c @ sqrt_l.T, 1.0)
    return s_a * s_c


def _match_internal(gc, gl, params):
    """Score, solve the bipartite matching, gate on the average similarity,
    and filter weak pairs.  Returns (rejection|None, VertexMatchSet|None)."""
    if len(gc) == 0 or len(gl) == 0:
        return Rejection("vertex", "empty_match", {"n_c": len(gc), "n_l": len(gl)}), None
    m = score_matrix(gc, gl)
    matching = max_weight_matching(ScoreMatrix(m))
    if not matching.pairs:
        return Rejection("vertex", "empty_match", {"pairs": 0}), None
    raw_n = len(matching.pairs)
    raw_ts = matching.total_score
    raw_as = raw_ts / raw_n
    retained = [
        (gc.landmarks[i], gl.landmarks[j], float(m[i, j]))
        for i, j in matching.pairs
        if m[i, j] >= params.tau_n
    ]
    retained.sort(key=lambda t: (t[0].id, t[1].id))
    ts = math.fsum(s for _, _, s in retained)
    n = len(retained)
    match_set = VertexMatchSet(
        matches=retained,
        n=n,
        total_score=ts,
        avg_score=ts / n if n else 0.0,
        raw_pair_count=raw_n,
        raw_total_score=raw_ts,
        raw_avg_score=raw_as,
    )
    if raw_as < params.tau_as:
        return Rejection("vertex", "low_average_similarity", {"avg_score": raw_as}), match_set
    return None, match_set


def match_vertices(gc, gl, params):
    """Vertex mapping between two covisibility subgraphs.

    Returns a VertexMatchSet, or a Rejection when the matching is empty or
    the average similarity falls below the gate.
    """
    rejection, match_set = _match_internal(gc, gl, params)
    if rejection is not None:
        return rejection
    return match_set


def coarse_sim3(match_set, kc_rec, kl_rec, params, rng=None):
    """RANSAC similarity estimation over matched object centers.

    Samples 3 matched pairs, solves the closed-form alignment, and counts
    inliers by center reprojection error in both images and by major-axis
    scale consistency in the common frame.  Accepts on the first sample
    whose consensus clears the thresholds.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n = match_set.n
    if n < 3:
        return Rejection("vertex", "too_few_matches", {"n": n})
    src = np.array([m[0].center for m in match_set.matches])
    dst = np.array([m[1].center for m in match_set.matches])
    la_c = np.array([m[0].major_axis() for m in match_set.matches])
    la_l = np.array([m[1].major_axis() for m in match_set.matches])

    # the candidate-independent projections of both center sets
    uv_b, vb = project_points(kl_rec.camera, kl_rec.est_pose, dst)
    uv_d, vd = project_points(kc_rec.camera, kc_rec.est_pose, src)
    static = (uv_b, vb, uv_d, vd)

    need = params.m_inl if params.strict_inlier_counts else params.m_inl - 1
    samples = _sample_triples(n, params.max_ransac_iters, rng)
    for it, idx in enumerate(samples):
        try:
            cand = horn_sim3(src[idx], dst[idx])
        except DegenerateConfiguration:
            continue
        inl = _coarse_inliers(cand, src, dst, la_c, la_l, kc_rec, kl_rec, params, static)
        num = int(inl.sum())
        eps = num / n
        if num > need and eps > params.tau_eps:
            return CoarseSim3Result(
                sim3=cand, inlier_mask=inl, num_inliers=num, inlier_ratio=eps, iterations=it + 1
            )
    return Rejection("vertex", "no_consensus", {"n": n, "iters": params.max_ransac_iters})


def _sample_triples(n, max_iters, rng):
    """Random 3-subsets without repetition; exhausts every combination when
    there are fewer than the iteration budget."""
    if n == 3:
        return [np.arange(3)]
    n_combos = n * (n - 1) * (n - 2) // 6
    if n_combos <= 2 * max_iters:
        combos = list(itertools.combinations(range(n), 3))
        order = rng.permutation(n_combos)[:max_iters]
        return [np.array(combos[k]) for k in order]
    return [rng.choice(n, size=3, replace=False) for _ in range(max_iters)]


def _coarse_inliers(sim3, src, dst, la_c, la_l, kc_rec, kl_rec, params, static):
    uv_b, vb, uv_d, vd = static
    fwd = sim3.apply(src)
    uv_a, va = project_points(kl_rec.camera, kl_rec.est_pose, fwd)
    err_l = np.linalg.norm(uv_a - uv_b, axis=1)
    ok_l = va & vb & (err_l < params.max_reproj_error_px)

    back = sim3.inverse().apply(dst)
    uv_c, vc = project_points(kc_rec.camera, kc_rec.est_pose, back)
    err_c = np.linalg.norm(uv_c - uv_d, axis=1)
    ok_c = vc & vd & (err_c < params.max_reproj_error_px)

    reproj_ok = ok_l & ok_c if params.reproj_check == "both" else ok_l | ok_c

    la_scaled = sim3.scale * la_c
    gap = np.abs(la_scaled - la_l) / np.maximum(la_scaled, la_l)
    return reproj_ok & (gap < params.tau_s)


def edge_similarity(gc, gl, match_set):
    """Normalized cross-correlation of the adjacency matrices over the
    matched vertices (rows/cols aligned by the matching); 0 when either
    matrix is all-zero."""
    if match_set.n == 0:
        return 0.0
    ids_c = [m[0].id for m in match_set.matches]
    ids_l = [m[1].id for m in match_set.matches]
    a_c = adjacency_matrix(gc, ids_c)
    a_l = adjacency_matrix(gl, ids_l)
    num = float((a_l * a_c).sum())
    den = math.sqrt(float((a_l * a_l).sum()) * float((a_c * a_c).sum()))
    if den == 0.0:
        return 0.0
    return num / den


def _edge_pass(gc, gl, match_set, params):
    s_e = edge_similarity(gc, gl, match_set)
    if s_e > params.tau_e:
        return s_e, True
    if params.edge_autopass_both_empty and match_set.n >= 3:
        ids_c = [m[0].id for m in match_set.matches]
        ids_l = [m[1].id for m in match_set.matches]
        if adjacency_matrix(gc, ids_c).sum() == 0 and adjacency_matrix(gl, ids_l).sum() == 0:
            # two isolated-but-matched object sets carry no contradicting structure
            return s_e, True
    return s_e, False


def _point_arrays(rec):
    words = np.array([p.word_id for p in rec.point_obs], dtype=np.int64)
    world = (
        np.array([p.world for p in rec.point_obs], dtype=np.float64)
        if rec.point_obs
        else np.zeros((0, 3))
    )
    pixel = (
        np.array([p.pixel for p in rec.point_obs], dtype=np.float64)
        if rec.point_obs
        else np.zeros((0, 2))
    )
    return words, world, pixel


def _unique_word_matches(words_c, words_l):
    """Index pairs of words appearing exactly once on each side."""
    uc, ic, cc = np.unique(words_c, return_index=True, return_counts=True)
    ul, il, cl = np.unique(words_l, return_index=True, return_counts=True)
    uc, ic = uc[cc == 1], ic[cc == 1]
    ul, il = ul[cl == 1], il[cl == 1]
    common, ia, ib = np.intersect1d(uc, ul, assume_unique=True, return_indices=True)
    return list(zip(ic[ia].tolist(), il[ib].tolist()))


def _guided_matches(sim3, kc_rec, kl_rec, words_c, world_c, pixel_c, words_l, world_l, params,
                    used_c, used_l):
    """Grow the matched point set by reprojecting each side's points into the
    other image through the coarse transform and taking the nearest unused
    same-word observation within the search radius."""
    pairs = []
    radius = params.refine_search_radius_px

    by_word_c = {}
    for i, w in enumerate(words_c.tolist()):
        by_word_c.setdefault(w, []).append(i)

    if len(words_l):
        proj, valid = project_points(kc_rec.camera, kc_rec.est_pose, sim3.inverse().apply(world_l))
        for j in range(len(words_l)):
            if j in used_l or not valid[j]:
                continue
            best, best_d = -1, radius
            for i in by_word_c.get(int(words_l[j]), ()):
                if i in used_c:
                    continue
                d = float(np.linalg.norm(proj[j] - pixel_c[i]))
                if d <= best_d:
                    best, best_d = i, d
            if best >= 0:
                pairs.append((best, j))
                used_c.add(best)
                used_l.add(j)
    return pairs


def refine_sim3(db, kc, kl, coarse, params, rng=None):
    """Point-level similarity refinement.

    Matches map points of the two keyframes by word id, grows the set with a
    guided search through the coarse transform, then RANSACs a refined
    transform over the matched 3D points.  Returns ``(sim3, num_inliers)``
    or a Rejection when consensus support is too small.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    kc_rec, kl_rec = db.record(kc), db.record(kl)
    words_c, world_c, pixel_c = _point_arrays(kc_rec)
    words_l, world_l, pixel_l = _point_arrays(kl_rec)

    pairs = _unique_word_matches(words_c, words_l)
    used_c = {i for i, _ in pairs}
    used_l = {j for _, j in pairs}
    pairs += _guided_matches(
        coarse, kc_rec, kl_rec, words_c, world_c, pixel_c, words_l, world_l, params,
        used_c, used_l,
    )
    # reverse guided direction: project query points into the loop image
    if len(words_c):
        proj, valid = project_points(kl_rec.camera, kl_rec.est_pose, coarse.apply(world_c))
        by_word_l = {}
        for j, w in enumerate(words_l.tolist()):
            by_word_l.setdefault(w, []).append(j)
        for i in range(len(words_c)):
            if i in used_c or not valid[i]:
                continue
            best, best_d = -1, params.refine_search_radius_px
            for j in by_word_l.get(int(words_c[i]), ()):
                if j in used_l:
                    continue
                d = float(np.linalg.norm(proj[i] - pixel_l[j]))
                if d <= best_d:
                    best, best_d = j, d
            if best >= 0:
                pairs.append((i, best))
                used_c.add(i)
                used_l.add(best)

    if len(pairs) < max(3, params.refine_min_inliers):
        return Rejection("refine", "insufficient_point_inliers", {"pairs": len(pairs)})

    pairs.sort()
    pc = world_c[[i for i, _ in pairs]]
    pl = world_l[[j for _, j in pairs]]
    qc = pixel_c[[i for i, _ in pairs]]
    ql = pixel_l[[j for _, j in pairs]]
    n_pairs = len(pairs)
    radius = params.refine_search_radius_px

    best_count, best_mask, best_sim3 = -1, None, None
    for idx in _sample_triples(n_pairs, params.max_ransac_iters, rng):
        try:
            cand = horn_sim3(pc[idx], pl[idx])
        except DegenerateConfiguration:
            continue
        uv_l, val_l = project_points(kl_rec.camera, kl_rec.est_pose, cand.apply(pc))
        err_l = np.linalg.norm(uv_l - ql, axis=1)
        uv_c, val_c = project_points(kc_rec.camera, kc_rec.est_pose, cand.inverse().apply(pl))
        err_c = np.linalg.norm(uv_c - qc, axis=1)
        inl = val_l & val_c & (err_l < radius) & (err_c < radius)
        count = int(inl.sum())
        if count > best_count:
            best_count, best_mask, best_sim3 = count, inl, cand
            if count >= max(params.refine_min_inliers, int(0.9 * n_pairs)):
                break

    if best_count < params.refine_min_inliers:
        return Rejection(
            "refine", "insufficient_point_inliers", {"pairs": n_pairs, "inliers": best_count}
        )
    try:
        fine = horn_sim3(pc[best_mask], pl[best_mask])
    except DegenerateConfiguration:
        fine = best_sim3
    return fine, best_count


@dataclass
class CandidateEvaluation:
    """All stage outcomes for one (query, candidate) pair.

    ``flags`` reflect the cumulative check chain used by the ablation runner;
    geometry is only evaluated once the earlier checks pass.
    """

    current_kf: int
    loop_kf: int
    bow_score: float
    match_set: VertexMatchSet | None = None
    edge_score: float | None = None
    coarse: CoarseSim3Result | None = None
    fine_sim3: Sim3Transform | None = None
    refine_inliers: int = 0
    flags: dict = field(default_factory=dict)
    rejection: Rejection | None = None

    @property
    def accepted(self):
        return self.rejection is None


def evaluate_candidate(db, gc, kc, kl, params, seed=0, bow_score=0.0):
    """Run every pipeline stage on one candidate pair and record the outcome.

    Stage order for rejection attribution follows the pipeline: vertex
    matching, vertex (object) comparison, edge comparison, refinement.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, kc, kl]))
    gl = db.graph.subgraph_for(kl)
    ev = CandidateEvaluation(current_kf=kc, loop_kf=kl, bow_score=bow_score)

    rejection, match_set = _match_internal(gc, gl, params)
    ev.match_set = match_set
    tn_ok = match_set is not None and match_set.n >= 1
    tas_ok = rejection is None or rejection.reason != "low_average_similarity"
    if match_set is None:
        ev.flags = {"candidate": True, "tn": False, "tas": False, "te": False, "geom": False}
        ev.rejection = rejection
        return ev

    s_e, te_ok = _edge_pass(gc, gl, match_set, params) if tn_ok else (0.0, False)
    ev.edge_score = s_e

    coarse = None
    fine = None
    geom_ok = False
    if tn_ok and tas_ok:
        coarse = coarse_sim3(match_set, db.record(kc), db.record(kl), params, rng)
        if isinstance(coarse, CoarseSim3Result):
            ev.coarse = coarse
            if te_ok:
                fine = refine_sim3(db, kc, kl, coarse.sim3, params, rng)
                if not isinstance(fine, Rejection):
                    ev.fine_sim3, ev.refine_inliers = fine
                    geom_ok = True

    ev.flags = {"candidate": True, "tn": tn_ok, "tas": tas_ok, "te": te_ok, "geom": geom_ok}

    if not tas_ok:
        ev.rejection = rejection
    elif not tn_ok:
        ev.rejection = Rejection("vertex", "empty_match", {"pairs": 0})
    elif isinstance(coarse, Rejection):
        ev.rejection = coarse
    elif not te_ok:
        ev.rejection = Rejection("edge", "low_edge_similarity", {"edge_score": s_e})
    elif isinstance(fine, Rejection):
        ev.rejection = fine
    return ev


def _check_report(report, params):
    ms = report.match_set
    assert ms.raw_avg_score >= params.tau_as and ms.avg_score >= params.tau_as
    assert all(s >= params.tau_n for _, _, s in ms.matches)
    need = params.m_inl if params.strict_inlier_counts else params.m_inl - 1
    assert report.coarse.num_inliers > need
    assert report.coarse.inlier_ratio > params.tau_eps
    assert report.refine_inliers >= params.refine_min_inliers


def detect_loop(db, kc, params, seed=0, events=None, candidates=None):
    """Full per-keyframe loop query.

    Evaluates candidates in descending BoW-score order and returns a report
    for the first one passing every stage, or None.  Rejections are appended
    to ``events`` when given.  ``candidates`` short-circuits the proposal
    stage when the caller already ran :func:`candidate_keyframes` for this
    query keyframe (the temporal-consistency state advances per call).
    """
    scores = db.frame_scores(kc)
    index = {k: i for i, k in enumerate(db.order)}
    if candidates is None:
        candidates = candidate_keyframes(db, kc, params)
    if not candidates:
        return None
    gc = db.graph.subgraph_for(kc)
    for kl in candidates:
        ev = evaluate_candidate(db, gc, kc, kl, params, seed, float(scores[index[kl]]))
        if ev.accepted:
            report = LoopClosureReport(
                current_kf=kc,
                loop_kf=kl,
                match_set=ev.match_set,
                coarse=ev.coarse,
                edge_score=ev.edge_score,
                fine_sim3=ev.fine_sim3,
                refine_inliers=ev.refine_inliers,
                bow_score=ev.bow_score,
            )
            _check_report(report, params)
            return report
        if events is not None:
            events.append(
                {
                    "current_kf": kc,
                    "loop_kf": kl,
                    "stage": ev.rejection.stage,
                    "reason": ev.rejection.reason,
                    **{k: v for k, v in ev.rejection.details.items()},
                }
            )
    return None


def apply_correction(trajectory, loop):
    """Distribute the loop's fine transform over the trajectory.

    Identity at the loop keyframe, the full correction at the current
    keyframe (and beyond), geodesic interpolation on scale/rotation and
    linear interpolation on translation in between.  Poses before the loop
    keyframe are untouched.
    """
    n = len(trajectory)
    l, c = loop.loop_kf, loop.current_kf
    if not (0 <= l < n and 0 <= c < n):
        raise KeyframeNotInTrajectory(f"loop ({l}, {c}) outside trajectory of length {n}")
    if l >= c:
        raise KeyframeNotInTrajectory(f"loop keyframe {l} must precede current {c}")
    out = list(trajectory)
    for k in range(l + 1, n):
        alpha = min((k - l) / (c - l), 1.0)
        corr = sim3_interp(loop.fine_sim3, alpha)
        pose = trajectory[k]
        out[k] = Pose(corr.rotation @ pose.rotation, corr.apply(pose.translation))
    return out
