import numpy as np
import pytest

from semloop.covis import KeyframeRecord, ObjectLandmark, ObjectObservation, PointObservation
from semloop.descriptors import BowVector
from semloop.geometry import CameraModel, Pose


def make_camera():
    return CameraModel(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)


def make_obs(track_id, center, words=None, class_id=0, n_classes=4, axes=(0.5, 0.4, 0.3), px=(320.0, 240.0)):
    """Build a valid object observation with a simple one-hot-ish class score."""
    scores = np.full(n_classes, 0.1 / n_classes)
    scores[class_id] += 0.9
    if words is None:
        words = {100 + (track_id if track_id is not None else 0): 1.0}
    return ObjectObservation(
        track_id=track_id,
        center_px=np.asarray(px, dtype=float),
        center_world=np.asarray(center, dtype=float),
        axes=np.asarray(axes, dtype=float),
        class_scores=scores,
        patch_bow=BowVector.from_dict(words),
    )


def make_landmark(lm_id, center=(0.0, 0.0, 1.0), axes=(0.5, 0.4, 0.3), class_id=0, words=None, kf_id=0):
    return ObjectLandmark(lm_id, make_obs(lm_id, center, words, class_id, axes=axes), kf_id)


def make_record(kf_id, obs, frame_words=None, pose=None, points=None):
    pose = pose or Pose.identity()
    frame_words = frame_words or {1: 1.0}
    return KeyframeRecord(
        id=kf_id,
        est_pose=pose,
        gt_pose=pose,
        camera=make_camera(),
        object_obs=obs,
        point_obs=points or [],
        frame_bow=BowVector.from_dict(frame_words),
    )


def make_point(pid, world, pixel, word):
    return PointObservation(point_id=pid, world=np.asarray(world, float), pixel=np.asarray(pixel, float), word_id=word)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
