"""Semantic covisibility-graph loop closure detection.

Object covisibility graphs over mapped 3D semantic landmarks, hierarchical
loop verification (BoW candidates, bipartite vertex matching, RANSAC
similarity estimation, adjacency correlation, point-level refinement), and
coarse-to-fine drift correction, verified against a deterministic synthetic
scene simulator.
"""

from ._backend import BACKEND
from .assignment import Matching, ScoreMatrix, max_weight_matching
from .covis import (
    CovisibilityGraph,
    CovisibilitySubgraph,
    KeyframeRecord,
    ObjectLandmark,
    ObjectObservation,
    PointObservation,
    adjacency_matrix,
)
from .descriptors import (
    BowVector,
    ClassDistribution,
    best_appearance_score,
    bhattacharyya,
    l1_similarity,
    pair_similarity,
)
from .detection import (
    CoarseSim3Result,
    DetectionParams,
    LoopClosureReport,
    MapDatabase,
    Rejection,
    VertexMatchSet,
    apply_correction,
    candidate_keyframes,
    coarse_sim3,
    detect_loop,
    edge_similarity,
    match_vertices,
    min_score_threshold,
    refine_sim3,
)
from .evaluation import (
    EvaluationReport,
    GroundTruthLoopLabel,
    ate_rmse,
    evaluate,
    label_ground_truth_loops,
    run_ablation,
    run_detection,
)
from .geometry import (
    CameraModel,
    Pose,
    Sim3Transform,
    horn_sim3,
    project,
    sim3_apply,
    sim3_compose,
    sim3_inverse,
    unproject,
)
from .simulator import (
    DriftModel,
    ObservationNoise,
    WorldSpec,
    generate_twin_world,
    generate_world,
    loop_trajectory,
    render_sequence,
)

__version__ = "0.1.0"
