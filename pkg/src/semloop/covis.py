"""Object covisibility graph: map objects as vertices, co-observation edges,
incremental maintenance per keyframe, per-keyframe subgraph extraction."""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .descriptors import BowVector, ClassDistribution
from .errors import DuplicateKeyframe, UnknownKeyframe, UnknownVertex

EDGE_COOBS_THRESHOLD = 3
ASSOC_RADIUS_M = 0.5


@dataclass
class ObjectObservation:
    """One detected object on a keyframe, as emitted by the front end.

    ``track_id`` is the front end's object track handle (None for logs
    without tracking); the world-frame center/axes estimates are expressed
    in the drift-bearing estimated frame.  ``gt_object_id`` is carried for
    evaluation only and never used by the pipeline.
    """

    track_id: int | None
    center_px: np.ndarray
    center_world: np.ndarray
    axes: np.ndarray
    class_scores: np.ndarray
    patch_bow: BowVector
    gt_object_id: int | None = None


@dataclass
class PointObservation:
    """One map-point observation: estimated world position, pixel, word id."""

    point_id: int
    world: np.ndarray
    pixel: np.ndarray
    word_id: int


@dataclass
class KeyframeRecord:
    """One ingested or simulated keyframe."""

    id: int
    est_pose: object
    gt_pose: object
    camera: object
    object_obs: list
    point_obs: list
    frame_bow: BowVector


class ObjectLandmark:
    """A mapped 3D semantic object: enclosing-ellipsoid axes, center, class
    distribution, observing keyframes and per-keyframe patch descriptors."""

    __slots__ = (
        "id",
        "center",
        "axes",
        "class_dist",
        "observing_keyframes",
        "patch_descriptors",
        "n_obs",
    )

    def __init__(self, lm_id, obs, kf_id):
        self.id = lm_id
        self.center = np.array(obs.center_world, dtype=np.float64)
        self.axes = np.sort(np.asarray(obs.axes, dtype=np.float64))[::-1].copy()
        self.class_dist = ClassDistribution.from_scores(obs.class_scores)
        self.observing_keyframes = [kf_id]
        self.patch_descriptors = {kf_id: obs.patch_bow}
        self.n_obs = 1

    def update(self, obs, kf_id):
        """Fold in a re-observation: running-mean center, running-max axes,
        multiplicative class fusion."""
        self.n_obs += 1
        self.center += (np.asarray(obs.center_world, dtype=np.float64) - self.center) / self.n_obs
        self.axes = np.maximum(self.axes, np.sort(np.asarray(obs.axes, dtype=np.float64))[::-1])
        self.class_dist = self.class_dist.fuse(obs.class_scores)
        if kf_id not in self.patch_descriptors:
            self.observing_keyframes.append(kf_id)
        self.patch_descriptors[kf_id] = obs.patch_bow

    def major_axis(self):
        return float(self.axes[0])

    def __repr__(self):
        return f"ObjectLandmark(id={self.id}, class={self.class_dist.argmax()}, n_obs={self.n_obs})"


def _pair_key(a, b):
    return (a, b) if a < b else (b, a)


@dataclass
class CovisibilitySubgraph:
    """Vertex-induced subgraph for one keyframe; edges inherited from the
    parent graph."""

    kf_id: int
    vertex_ids: list
    landmarks: list
    edges: frozenset = field(default_factory=frozenset)

    def has_edge(self, a, b):
        return _pair_key(a, b) in self.edges

    def __len__(self):
        return len(self.vertex_ids)


class CovisibilityGraph:
    """Incrementally maintained object covisibility graph.

    Vertices are landmarks; an edge appears once two landmarks have been
    observed together in at least ``edge_threshold`` keyframes.  Counts are
    kept below the threshold so edges appear retroactively.
    """

    def __init__(self, edge_threshold=EDGE_COOBS_THRESHOLD, assoc_radius=ASSOC_RADIUS_M):
        self.edge_threshold = edge_threshold
        self.assoc_radius = assoc_radius
        self.landmarks = {}
        self.co_obs_counts = {}
        self.edges = set()
        self.kf_landmarks = {}
        self._track_to_lm = {}
        self._next_lm_id = 0
        self._last_kf_id = None

    def _associate(self, obs):
        """Resolve an observation to an existing landmark id or None."""
        if obs.track_id is not None:
            return self._track_to_lm.get(obs.track_id)
        # nearest existing center within the gate whose class argmax agrees
        obs_class = int(np.argmax(obs.class_scores))
        best, best_d = None, self.assoc_radius
        for lm in self.landmarks.values():
            d = float(np.linalg.norm(lm.center - obs.center_world))
            if d <= best_d and lm.class_dist.argmax() == obs_class:
                best, best_d = lm.id, d
        return best

    def integrate_keyframe(self, kf):
        """Insert a keyframe's observations; returns the landmark ids touched."""
        if kf.id in self.kf_landmarks:
            raise DuplicateKeyframe(f"keyframe {kf.id} already integrated")
        if self._last_kf_id is not None and kf.id <= self._last_kf_id:
            raise DuplicateKeyframe(
                f"keyframe ids must be increasing ({kf.id} after {self._last_kf_id})"
            )
        touched = []
        for obs in kf.object_obs:
            lm_id = self._associate(obs)
            if lm_id is None:
                lm_id = self._next_lm_id
                self._next_lm_id += 1
                self.landmarks[lm_id] = ObjectLandmark(lm_id, obs, kf.id)
                if obs.track_id is not None:
                    self._track_to_lm[obs.track_id] = lm_id
            else:
                self.landmarks[lm_id].update(obs, kf.id)
            touched.append(lm_id)
        seen = sorted(set(touched))
        for a, b in combinations(seen, 2):
            key = (a, b)
            count = self.co_obs_counts.get(key, 0) + 1
            self.co_obs_counts[key] = count
            if count >= self.edge_threshold:
                self.edges.add(key)
        self.kf_landmarks[kf.id] = seen
        self._last_kf_id = kf.id
        return seen

    def has_edge(self, a, b):
        return _pair_key(a, b) in self.edges

    def subgraph_for(self, kf_id):
        if kf_id not in self.kf_landmarks:
            raise UnknownKeyframe(f"keyframe {kf_id} was never integrated")
        ids = self.kf_landmarks[kf_id]
        edges = frozenset(
            (a, b) for a, b in combinations(ids, 2) if (a, b) in self.edges
        )
        return CovisibilitySubgraph(
            kf_id=kf_id,
            vertex_ids=list(ids),
            landmarks=[self.landmarks[i] for i in ids],
            edges=edges,
        )

    def covisible_keyframes(self, kf_id):
        """Keyframes sharing at least one landmark observation with ``kf_id``."""
        if kf_id not in self.kf_landmarks:
            raise UnknownKeyframe(f"keyframe {kf_id} was never integrated")
        out = set()
        for lm_id in self.kf_landmarks[kf_id]:
            out.update(self.landmarks[lm_id].observing_keyframes)
        out.discard(kf_id)
        return out


def adjacency_matrix(sub, order):
    """Symmetric 0/1 matrix over ``order`` (a duplicate-free subset of the
    subgraph's vertices), zero diagonal."""
    id_set = set(sub.vertex_ids)
    if len(set(order)) != len(order):
        raise UnknownVertex("duplicate vertex ids in requested order")
    for v in order:
        if v not in id_set:
            raise UnknownVertex(f"vertex {v} not in subgraph")
    n = len(order)
    m = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            if sub.has_edge(order[i], order[j]):
                m[i, j] = 1
                m[j, i] = 1
    return m


def to_dot(vertices, edges, name="covis", vertex_colors=None, edge_colors=None):
    """Render vertices/edges as a DOT graph.

    ``vertices`` is a list of (id, label); colors are optional maps keyed by
    vertex id / unordered edge pair (callers supply matched/mismatched
    coloring).
    """
    vertex_colors = vertex_colors or {}
    edge_colors = edge_colors or {}
    lines = [f"graph {name} {{"]
    for vid, label in vertices:
        color = vertex_colors.get(vid)
        attr = f' color="{color}"' if color else ""
        lines.append(f'  v{vid} [label="{label}"{attr}];')
    for a, b in sorted(edges):
        color = edge_colors.get(_pair_key(a, b))
        attr = f' [color="{color}"]' if color else ""
        lines.append(f"  v{a} -- v{b}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dot(graph, name="covis", vertex_colors=None, edge_colors=None):
    verts = [
        (lm.id, f"c{lm.class_dist.argmax()}#{lm.id}")
        for lm in sorted(graph.landmarks.values(), key=lambda lm: lm.id)
    ]
    return to_dot(verts, graph.edges, name, vertex_colors, edge_colors)


def subgraph_to_dot(sub, name=None, vertex_colors=None, edge_colors=None):
    verts = [(lm.id, f"c{lm.class_dist.argmax()}#{lm.id}") for lm in sub.landmarks]
    return to_dot(verts, sub.edges, name or f"kf{sub.kf_id}", vertex_colors, edge_colors)
