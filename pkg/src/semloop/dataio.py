"""Dataset and report serialization.

Datasets are JSON Lines, one keyframe per line with fields in a canonical
order; transforms are stored as scale + unit quaternion (w, x, y, z) +
translation, bags of words as sorted (word, weight) pairs.  Loading keeps
the parsed quaternions on the poses so a load/save round trip is
byte-identical.
"""

import csv
import json

import numpy as np

from .covis import (
    KeyframeRecord,
    ObjectObservation,
    PointObservation,
    graph_to_dot,
    subgraph_to_dot,
    to_dot,
)
from .descriptors import BowVector
from .errors import MalformedRecord
from .geometry import CameraModel, Pose, Sim3Transform, quat_from_rotation, rotation_from_quat


def _floats(a):
    return [float(x) for x in np.asarray(a).ravel()]


def pose_to_dict(pose):
    q = pose.quat_cache if pose.quat_cache is not None else quat_from_rotation(pose.rotation)
    return {"q": _floats(q), "t": _floats(pose.translation)}


def pose_from_dict(d):
    q = np.asarray(d["q"], dtype=np.float64)
    return Pose(rotation_from_quat(q), np.asarray(d["t"], dtype=np.float64), quat_cache=q)


def sim3_to_dict(s):
    return {
        "scale": float(s.scale),
        "q": _floats(quat_from_rotation(s.rotation)),
        "t": _floats(s.translation),
    }


def sim3_from_dict(d):
    return Sim3Transform(
        float(d["scale"]), rotation_from_quat(np.asarray(d["q"])), np.asarray(d["t"])
    )


def camera_to_dict(c):
    return {
        "fx": float(c.fx),
        "fy": float(c.fy),
        "cx": float(c.cx),
        "cy": float(c.cy),
        "width": int(c.width),
        "height": int(c.height),
    }


def camera_from_dict(d):
    return CameraModel(**d)


def record_to_dict(rec):
    return {
        "id": int(rec.id),
        "est_pose": pose_to_dict(rec.est_pose),
        "gt_pose": pose_to_dict(rec.gt_pose),
        "camera": camera_to_dict(rec.camera),
        "objects": [
            {
                "track": None if o.track_id is None else int(o.track_id),
                "obj": None if o.gt_object_id is None else int(o.gt_object_id),
                "px": _floats(o.center_px),
                "center": _floats(o.center_world),
                "axes": _floats(o.axes),
                "classes": _floats(o.class_scores),
                "bow": o.patch_bow.as_pairs(),
            }
            for o in rec.object_obs
        ],
        "points": [
            [int(p.point_id)] + _floats(p.world) + _floats(p.pixel) + [int(p.word_id)]
            for p in rec.point_obs
        ],
        "frame_bow": rec.frame_bow.as_pairs(),
    }


def _bow_from_pairs(pairs):
    return BowVector([p[0] for p in pairs], [p[1] for p in pairs])


def record_from_dict(d):
    objects = [
        ObjectObservation(
            track_id=None if o["track"] is None else int(o["track"]),
            gt_object_id=None if o["obj"] is None else int(o["obj"]),
            center_px=np.asarray(o["px"], dtype=np.float64),
            center_world=np.asarray(o["center"], dtype=np.float64),
            axes=np.asarray(o["axes"], dtype=np.float64),
            class_scores=np.asarray(o["classes"], dtype=np.float64),
            patch_bow=_bow_from_pairs(o["bow"]),
        )
        for o in d["objects"]
    ]
    points = [
        PointObservation(
            point_id=int(p[0]),
            world=np.array(p[1:4], dtype=np.float64),
            pixel=np.array(p[4:6], dtype=np.float64),
            word_id=int(p[6]),
        )
        for p in d["points"]
    ]
    return KeyframeRecord(
        id=int(d["id"]),
        est_pose=pose_from_dict(d["est_pose"]),
        gt_pose=pose_from_dict(d["gt_pose"]),
        camera=camera_from_dict(d["camera"]),
        object_obs=objects,
        point_obs=points,
        frame_bow=_bow_from_pairs(d["frame_bow"]),
    )


def save_dataset(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)))
            fh.write("\n")


def load_dataset(path):
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                records.append(record_from_dict(d))
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise MalformedRecord(lineno, str(exc)) from exc
    return records


# ---------------------------------------------------------------------------
# reports / events / params


def report_to_dict(report):
    ms = report.match_set
    return {
        "current_kf": int(report.current_kf),
        "loop_kf": int(report.loop_kf),
        "bow_score": float(report.bow_score),
        "num_matches": int(ms.n),
        "total_score": float(ms.total_score),
        "avg_score": float(ms.avg_score),
        "raw_pair_count": int(ms.raw_pair_count),
        "raw_avg_score": float(ms.raw_avg_score),
        "matches": [[int(a.id), int(b.id), float(s)] for a, b, s in ms.matches],
        "coarse": {
            **sim3_to_dict(report.coarse.sim3),
            "num_inliers": int(report.coarse.num_inliers),
            "inlier_ratio": float(report.coarse.inlier_ratio),
            "iterations": int(report.coarse.iterations),
        },
        "edge_score": float(report.edge_score),
        "fine": sim3_to_dict(report.fine_sim3),
        "refine_inliers": int(report.refine_inliers),
    }


def save_reports(reports, path):
    with open(path, "w") as fh:
        json.dump([report_to_dict(r) for r in reports], fh, indent=1)
        fh.write("\n")


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# DOT / timeline exports


def export_graph_dot(graph, path):
    with open(path, "w") as fh:
        fh.write(graph_to_dot(graph))


def export_subgraph_dot(sub, path, vertex_colors=None, edge_colors=None):
    with open(path, "w") as fh:
        fh.write(subgraph_to_dot(sub, vertex_colors=vertex_colors, edge_colors=edge_colors))


def match_coloring(sub, matched_ids):
    """Green for matched vertices and edges between them, red otherwise."""
    vcolors = {
        lm.id: ("green" if lm.id in matched_ids else "red") for lm in sub.landmarks
    }
    ecolors = {}
    for a, b in sub.edges:
        ecolors[(a, b)] = "green" if a in matched_ids and b in matched_ids else "red"
    return vcolors, ecolors


def export_match_dot(db, report, path):
    """Two matched subgraphs side by side, colored like the loop figures:
    green = matched objects/edges, red = mismatched."""
    gc = db.graph.subgraph_for(report.current_kf)
    gl = db.graph.subgraph_for(report.loop_kf)
    matched_c = {a.id for a, _, _ in report.match_set.matches}
    matched_l = {b.id for _, b, _ in report.match_set.matches}
    parts = []
    for sub, matched, tag in ((gc, matched_c, "current"), (gl, matched_l, "loop")):
        vcol, ecol = match_coloring(sub, matched)
        verts = [(lm.id, f"c{lm.class_dist.argmax()}#{lm.id}") for lm in sub.landmarks]
        dot = to_dot(verts, sub.edges, f"{tag}_kf{sub.kf_id}", vcol, ecol)
        parts.append(dot)
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def export_timeline(rows, path, fmt="csv"):
    """Per-keyframe error timeline; rows are (kf, before_cm, after_cm)."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["keyframe", "error_before_cm", "error_after_cm"])
            for row in rows:
                w.writerow(list(row))
    elif fmt == "json":
        save_json(
            [
                {"keyframe": int(k), "error_before_cm": float(b), "error_after_cm": None if a is None else float(a)}
                for k, b, a in rows
            ],
            path,
        )
    else:
        raise ValueError(f"unsupported timeline format {fmt!r}")
