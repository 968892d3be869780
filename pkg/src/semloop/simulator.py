"""Deterministic synthetic-world generator standing in for the camera/detector
front end: object layouts, loop trajectories, twin scenes, observation noise,
and pose drift injection."""

import math
from dataclasses import dataclass, field

import numpy as np

from .covis import KeyframeRecord, ObjectObservation, PointObservation
from .descriptors import BowVector
from .errors import PlacementFailure
from .geometry import CameraModel, Pose, Sim3Transform, in_image, project_points, rotation_exp

# Word-id layout: object words occupy [0, word_vocab_size); point descriptors
# live above them; one sentinel word tops the range for empty frames.
_POINT_VOCAB_FACTOR = 6


@dataclass(frozen=True)
class WorldSpec:
    object_count: int = 16
    class_count: int = 8
    room_extent: tuple = (12.0, 12.0, 3.0)
    axes_range: tuple = (0.2, 0.6)
    word_vocab_size: int = 600
    words_per_object: int = 36
    background_point_count: int = 3500
    seed: int = 0
    # furniture and texture cluster within this radius of the room center
    # (an inspection scene orbited by the camera)
    scene_radius: float = 2.8
    # visual words are viewpoint-sensitive: an object patch word (or point
    # descriptor) is only re-detected within this azimuth half-width of its
    # preferred viewing direction
    word_view_halfwidth_deg: float = 50.0
    point_view_halfwidth_deg: float = 6.0

    def __post_init__(self):
        if self.object_count < 0 or self.class_count <= 0:
            raise ValueError("counts must be positive")
        if self.axes_range[0] <= 0 or self.axes_range[1] < self.axes_range[0]:
            raise ValueError("invalid axes range")


@dataclass(frozen=True)
class DriftModel:
    """Per-keyframe random-walk increments of the estimated frame."""

    translation_rw_sigma: float = 0.0
    rotation_rw_sigma: float = 0.0
    scale_rw_sigma: float = 0.0

    def __post_init__(self):
        if min(self.translation_rw_sigma, self.rotation_rw_sigma, self.scale_rw_sigma) < 0:
            raise ValueError("drift sigmas must be non-negative")


@dataclass(frozen=True)
class ObservationNoise:
    pixel_sigma: float = 0.0
    class_confusion_rate: float = 0.0
    bow_word_dropout: float = 0.0
    detection_dropout: float = 0.0

    def __post_init__(self):
        for r in (self.class_confusion_rate, self.bow_word_dropout, self.detection_dropout):
            if not 0.0 <= r <= 1.0:
                raise ValueError("noise rates must be within [0, 1]")


@dataclass
class SimObject:
    id: int
    center: np.ndarray
    axes: np.ndarray  # sorted descending
    class_id: int
    words: np.ndarray
    word_counts: np.ndarray
    word_azimuths: np.ndarray  # preferred viewing azimuth per word, radians


@dataclass
class World:
    objects: list
    point_pos: np.ndarray
    point_words: np.ndarray
    point_azimuths: np.ndarray
    regions: list  # list of (origin 3-vec, extent 3-vec)
    class_count: int
    word_vocab_size: int
    word_view_halfwidth: float = math.radians(50.0)
    point_view_halfwidth: float = math.radians(13.0)

    @property
    def sentinel_word(self):
        return self.word_vocab_size * (1 + _POINT_VOCAB_FACTOR)


def default_camera(h_fov_deg=72.0):
    """640x480 camera; the default horizontal field of view keeps the
    forward-looking circuit fixtures at roughly 6-10 covisible objects."""
    f = 320.0 / math.tan(math.radians(h_fov_deg / 2.0))
    return CameraModel(fx=f, fy=f, cx=320.0, cy=240.0, width=640, height=480)


def _sample_object(rng, spec, idx, placed):
    extent = np.array(spec.room_extent)
    mid = extent[:2] / 2.0
    r_max = min(spec.scene_radius, mid.min() - spec.axes_range[1])
    axes = np.sort(rng.uniform(spec.axes_range[0], spec.axes_range[1], size=3))[::-1]
    for _ in range(400):
        rad = r_max * math.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * math.pi)
        center = np.array(
            [
                mid[0] + rad * math.cos(phi),
                mid[1] + rad * math.sin(phi),
                rng.uniform(0.5, min(2.2, extent[2] - 0.3)),
            ]
        )
        ok = True
        for other in placed:
            if np.linalg.norm(center - other.center) < 0.5 * (axes[0] + other.axes[0]):
                ok = False
                break
        if ok:
            words = np.sort(rng.choice(spec.word_vocab_size, size=spec.words_per_object, replace=False))
            counts = rng.integers(1, 4, size=spec.words_per_object)
            azimuths = rng.uniform(0.0, 2.0 * math.pi, size=spec.words_per_object)
            return SimObject(
                id=idx,
                center=center,
                axes=axes,
                class_id=int(rng.integers(spec.class_count)),
                words=words.astype(np.int64),
                word_counts=counts.astype(np.int64),
                word_azimuths=azimuths,
            )
    raise PlacementFailure(f"could not place object {idx} after 400 attempts")


def _sample_points(rng, spec):
    extent = np.array(spec.room_extent)
    mid = extent[:2] / 2.0
    n = spec.background_point_count
    rad = spec.scene_radius * np.sqrt(rng.uniform(size=n))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    pos = np.column_stack(
        [
            mid[0] + rad * np.cos(phi),
            mid[1] + rad * np.sin(phi),
            rng.uniform(0.15, extent[2] - 0.15, size=n),
        ]
    )
    words = spec.word_vocab_size + rng.integers(
        0, spec.word_vocab_size * _POINT_VOCAB_FACTOR, size=n
    )
    azimuths = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return pos, words.astype(np.int64), azimuths


def generate_world(spec):
    """Deterministic world draw: non-overlapping ellipsoidal objects with
    per-object word sets, plus background texture points."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    objects = []
    for i in range(spec.object_count):
        objects.append(_sample_object(rng, spec, i, objects))
    pos, words, azimuths = _sample_points(rng, spec)
    return World(
        objects=objects,
        point_pos=pos,
        point_words=words,
        point_azimuths=azimuths,
        regions=[(np.zeros(3), np.array(spec.room_extent))],
        class_count=spec.class_count,
        word_vocab_size=spec.word_vocab_size,
        word_view_halfwidth=math.radians(spec.word_view_halfwidth_deg),
        point_view_halfwidth=math.radians(spec.point_view_halfwidth_deg),
    )


def generate_twin_world(spec, perturbation):
    """A world and its look-alike twin sharing the object layout.

    A ``perturbation`` fraction of twin objects get jittered centers,
    strongly rescaled axes, and a 60% resample of their word sets (classes
    are preserved).  The twin's background texture points are always drawn
    fresh: it is a physically distinct place even when its furniture is an
    exact copy.
    """
    if not 0.0 <= perturbation <= 1.0:
        raise ValueError("perturbation must be within [0, 1]")
    world_a = generate_world(spec)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    extent = np.array(spec.room_extent)

    objects_b = []
    n = len(world_a.objects)
    n_perturb = int(round(perturbation * n))
    chosen = set(rng.choice(n, size=n_perturb, replace=False).tolist()) if n_perturb else set()
    for obj in world_a.objects:
        center = obj.center.copy()
        axes = obj.axes.copy()
        words = obj.words.copy()
        counts = obj.word_counts.copy()
        azimuths = obj.word_azimuths.copy()
        if obj.id in chosen:
            # moved far enough to rewire which neighbours it is co-observed
            # with, not just to fail the reprojection check
            jitter = rng.uniform(-1.5, 1.5, size=3)
            jitter[2] = rng.uniform(-0.3, 0.3)
            center = np.clip(center + jitter, 0.4, extent - 0.4)
            mid = extent[:2] / 2.0
            radial = center[:2] - mid
            r = float(np.linalg.norm(radial))
            r_max = spec.scene_radius - 0.2
            if r > r_max:
                center[:2] = mid + radial * (r_max / r)
            center[2] = float(np.clip(center[2], 0.5, min(2.2, extent[2] - 0.3)))
            factor = rng.uniform(2.1, 2.6)
            if rng.random() < 0.5:
                factor = 1.0 / factor
            axes = axes * factor
            keep = rng.random(len(words)) < 0.4
            kept = words[keep]
            kept_az = azimuths[keep]
            pool = np.setdiff1d(np.arange(spec.word_vocab_size, dtype=np.int64), kept)
            fresh = rng.choice(pool, size=int((~keep).sum()), replace=False)
            fresh_az = rng.uniform(0.0, 2.0 * math.pi, size=len(fresh))
            order = np.argsort(np.concatenate([kept, fresh.astype(np.int64)]))
            words = np.concatenate([kept, fresh.astype(np.int64)])[order]
            azimuths = np.concatenate([kept_az, fresh_az])[order]
            counts = rng.integers(1, 4, size=len(words)).astype(np.int64)
        objects_b.append(
            SimObject(
                id=obj.id,
                center=center,
                axes=axes,
                class_id=obj.class_id,
                words=words,
                word_counts=counts,
                word_azimuths=azimuths,
            )
        )
    pos_b, words_b, az_b = _sample_points(rng, spec)
    world_b = World(
        objects=objects_b,
        point_pos=pos_b,
        point_words=words_b,
        point_azimuths=az_b,
        regions=[(np.zeros(3), extent.copy())],
        class_count=spec.class_count,
        word_vocab_size=spec.word_vocab_size,
        word_view_halfwidth=world_a.word_view_halfwidth,
        point_view_halfwidth=world_a.point_view_halfwidth,
    )
    return world_a, world_b


def combine_worlds(world_a, world_b, offset):
    """Place ``world_b`` at ``offset`` next to ``world_a`` in one world."""
    offset = np.asarray(offset, dtype=np.float64)
    shift = len(world_a.objects)
    objects = [o for o in world_a.objects]
    for o in world_b.objects:
        objects.append(
            SimObject(
                id=o.id + shift,
                center=o.center + offset,
                axes=o.axes.copy(),
                class_id=o.class_id,
                words=o.words.copy(),
                word_counts=o.word_counts.copy(),
                word_azimuths=o.word_azimuths.copy(),
            )
        )
    return World(
        objects=objects,
        point_pos=np.vstack([world_a.point_pos, world_b.point_pos + offset]),
        point_words=np.concatenate([world_a.point_words, world_b.point_words]),
        point_azimuths=np.concatenate([world_a.point_azimuths, world_b.point_azimuths]),
        regions=list(world_a.regions) + [(org + offset, ext.copy()) for org, ext in world_b.regions],
        class_count=world_a.class_count,
        word_vocab_size=world_a.word_vocab_size,
        word_view_halfwidth=world_a.word_view_halfwidth,
        point_view_halfwidth=world_a.point_view_halfwidth,
    )


def level_pose(position, forward):
    """World-from-camera pose at ``position`` looking along the horizontal
    ``forward`` direction (+z optical axis, +y down)."""
    z = np.array([forward[0], forward[1], 0.0])
    z /= np.linalg.norm(z)
    y = np.array([0.0, 0.0, -1.0])
    x = np.cross(y, z)
    rot = np.column_stack([x, y, z])
    return Pose(rot, np.asarray(position, dtype=np.float64))


def _circle_poses(center_xy, radius, thetas, height):
    """Orbit poses looking inward at the scene center."""
    poses = []
    for th in thetas:
        pos = np.array(
            [center_xy[0] + radius * math.cos(th), center_xy[1] + radius * math.sin(th), height]
        )
        fwd = np.array([-math.cos(th), -math.sin(th)])
        poses.append(level_pose(pos, fwd))
    return poses


def loop_trajectory(world, kind, keyframe_count, height=1.4, margin=2.2, overrun_deg=45.0):
    """Ground-truth pose sequences.

    ``single-loop``: one closed circuit of the first region, last pose equal
    to the first.  ``two-floor``: a circuit (with a small overrun past the
    start) of region one, a straight transition, then the same circuit of
    region two; the two regions are never mixed.
    """
    if keyframe_count < 10:
        raise ValueError("keyframe_count must be at least 10")
    if kind == "single-loop":
        org, ext = world.regions[0]
        center = org[:2] + ext[:2] / 2.0
        radius = min(ext[0], ext[1]) / 2.0 - margin
        thetas = np.linspace(0.0, 2.0 * math.pi, keyframe_count)
        return _circle_poses(center, radius, thetas, height)
    if kind == "two-floor":
        if len(world.regions) < 2:
            raise ValueError("two-floor trajectory needs a combined twin world")
        (org_a, ext_a), (org_b, ext_b) = world.regions[0], world.regions[1]
        n_trans = max(6, keyframe_count // 14)
        n_a = (keyframe_count - n_trans) // 2
        n_b = keyframe_count - n_trans - n_a
        sweep = 2.0 * math.pi + math.radians(overrun_deg)
        center_a = org_a[:2] + ext_a[:2] / 2.0
        center_b = org_b[:2] + ext_b[:2] / 2.0
        radius = min(ext_a[0], ext_a[1]) / 2.0 - margin
        poses = _circle_poses(center_a, radius, np.linspace(0.0, sweep, n_a), height)
        start_b = np.array(
            [center_b[0] + radius * math.cos(0.0), center_b[1] + radius * math.sin(0.0), height]
        )
        end_a = poses[-1].translation
        # transit through a corridor far enough from both scenes that nothing
        # is within sensing range: the two floors never blend
        corridor_y = min(center_a[1], center_b[1]) - radius - 6.0
        waypoints = [
            end_a,
            np.array([end_a[0], corridor_y, height]),
            np.array([start_b[0], corridor_y, height]),
            start_b,
        ]
        seg_lens = [
            float(np.linalg.norm(waypoints[i + 1] - waypoints[i])) for i in range(3)
        ]
        total = sum(seg_lens)
        for i in range(1, n_trans + 1):
            dist = total * i / (n_trans + 1.0)
            seg = 0
            while seg < 2 and dist > seg_lens[seg]:
                dist -= seg_lens[seg]
                seg += 1
            direction = waypoints[seg + 1] - waypoints[seg]
            pos = waypoints[seg] + direction * (dist / seg_lens[seg])
            poses.append(level_pose(pos, direction[:2]))
        poses.extend(_circle_poses(center_b, radius, np.linspace(0.0, sweep, n_b), height))
        return poses
    raise ValueError(f"unknown trajectory kind {kind!r}")


def make_step_drift(count, split_index, sim3):
    """Drift schedule: identity before ``split_index``, constant ``sim3`` after."""
    ident = Sim3Transform.identity()
    return [ident] * split_index + [sim3] * (count - split_index)


def _angdiff(a, b):
    """Wrapped angular difference in [-pi, pi]."""
    return (a - b + math.pi) % (2.0 * math.pi) - math.pi


def _one_hot_scores(class_id, class_count):
    scores = np.full(class_count, 0.1 / class_count)
    scores[class_id] += 0.9
    return scores


def _drift_states(drift, count, rng):
    if isinstance(drift, DriftModel):
        states = []
        t = np.zeros(3)
        rot = np.eye(3)
        s = 1.0
        for _ in range(count):
            t = t + rng.normal(0.0, drift.translation_rw_sigma, size=3)
            rot = rot @ rotation_exp(rng.normal(0.0, drift.rotation_rw_sigma, size=3))
            s = s * math.exp(rng.normal(0.0, drift.scale_rw_sigma))
            states.append(Sim3Transform(s, rot, t))
        return states
    states = list(drift)
    if len(states) != count:
        raise ValueError("drift schedule length must match the trajectory")
    return states


def render_sequence(
    world,
    trajectory,
    camera,
    drift,
    noise,
    seed,
    max_range=5.0,
    min_range=0.5,
    reentry_gap=10,
    assoc_halfwidth_deg=75.0,
):
    """Render keyframe records along a ground-truth trajectory.

    Per keyframe, objects and texture points inside the frustum/range are
    emitted with noisy pixels, confused class scores and dropped-out patch
    words; world-frame estimates and the estimated pose are expressed in the
    drifted frame.  Object observations carry track ids that change when the
    object re-enters the view after an absence or when the viewing direction
    drifts past the appearance-association window, mirroring a tracking
    front end that matches patch features and cannot recognize an object it
    lost or never saw from this side.
    """
    if not trajectory:
        raise ValueError("trajectory must be non-empty")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    drift_states = _drift_states(drift, len(trajectory), rng)

    centers = (
        np.array([o.center for o in world.objects]) if world.objects else np.zeros((0, 3))
    )
    assoc_halfwidth = math.radians(assoc_halfwidth_deg)
    records = []
    last_seen = {}
    epoch = {}
    anchor_az = {}
    for k, pose in enumerate(trajectory):
        d = drift_states[k]
        est_pose = Pose(d.rotation @ pose.rotation, d.apply(pose.translation))

        frame_words = {}

        object_obs = []
        if len(world.objects):
            pc = pose.inverse_apply(centers)
            uv, _ = project_points(camera, pose, centers)
            visible = (
                (pc[:, 2] > min_range) & (pc[:, 2] < max_range) & in_image(camera, uv)
            )
            for oi in np.flatnonzero(visible):
                obj = world.objects[oi]
                dropped = rng.random() < noise.detection_dropout
                if dropped:
                    continue
                view_az = math.atan2(
                    obj.center[1] - pose.translation[1], obj.center[0] - pose.translation[0]
                )
                seen = last_seen.get(obj.id)
                if seen is None:
                    epoch[obj.id] = 0
                    anchor_az[obj.id] = view_az
                elif (
                    k - seen > reentry_gap
                    or abs(_angdiff(view_az, anchor_az[obj.id])) > assoc_halfwidth
                ):
                    epoch[obj.id] += 1
                    anchor_az[obj.id] = view_az
                last_seen[obj.id] = k
                track_id = obj.id * 1_000_000 + epoch[obj.id]

                depth = float(pc[oi, 2])
                sigma3d = noise.pixel_sigma * depth / camera.fx
                center_est = d.apply(obj.center + rng.normal(0.0, sigma3d, size=3))
                axes_est = d.scale * obj.axes
                px = uv[oi] + rng.normal(0.0, noise.pixel_sigma, size=2)
                px = np.clip(px, 0.0, [camera.width - 1e-3, camera.height - 1e-3])

                class_id = obj.class_id
                if rng.random() < noise.class_confusion_rate:
                    other = int(rng.integers(world.class_count - 1))
                    class_id = other if other < obj.class_id else other + 1
                scores = _one_hot_scores(class_id, world.class_count)

                in_window = (
                    np.abs(_angdiff(obj.word_azimuths, view_az)) <= world.word_view_halfwidth
                )
                kept = rng.binomial(obj.word_counts, 1.0 - noise.bow_word_dropout)
                kept[~in_window] = 0
                if kept.sum() == 0:
                    # some feature is always extractable; keep the word whose
                    # preferred direction is closest to this view
                    kept[int(np.argmin(np.abs(_angdiff(obj.word_azimuths, view_az))))] = 1
                mask = kept > 0
                patch = BowVector(obj.words[mask], kept[mask].astype(np.float64))
                for w, c in zip(obj.words[mask].tolist(), kept[mask].tolist()):
                    frame_words[w] = frame_words.get(w, 0.0) + float(c)

                object_obs.append(
                    ObjectObservation(
                        track_id=track_id,
                        center_px=px,
                        center_world=center_est,
                        axes=axes_est,
                        class_scores=scores,
                        patch_bow=patch,
                        gt_object_id=obj.id,
                    )
                )

        point_obs = []
        if len(world.point_pos):
            ppc = pose.inverse_apply(world.point_pos)
            puv, _ = project_points(camera, pose, world.point_pos)
            view_az_pts = np.arctan2(
                world.point_pos[:, 1] - pose.translation[1],
                world.point_pos[:, 0] - pose.translation[0],
            )
            az_ok = (
                np.abs(_angdiff(world.point_azimuths, view_az_pts))
                <= world.point_view_halfwidth
            )
            pvis = (
                (ppc[:, 2] > min_range)
                & (ppc[:, 2] < max_range)
                & in_image(camera, puv)
                & az_ok
            )
            for pi in np.flatnonzero(pvis):
                if rng.random() < noise.detection_dropout:
                    continue
                depth = float(ppc[pi, 2])
                sigma3d = noise.pixel_sigma * depth / camera.fx
                world_est = d.apply(world.point_pos[pi] + rng.normal(0.0, sigma3d, size=3))
                px = puv[pi] + rng.normal(0.0, noise.pixel_sigma, size=2)
                px = np.clip(px, 0.0, [camera.width - 1e-3, camera.height - 1e-3])
                word = int(world.point_words[pi])
                point_obs.append(
                    PointObservation(point_id=int(pi), world=world_est, pixel=px, word_id=word)
                )
                frame_words[word] = frame_words.get(word, 0.0) + 1.0

        if not frame_words:
            frame_words[world.sentinel_word] = 1.0
        records.append(
            KeyframeRecord(
                id=k,
                est_pose=est_pose,
                gt_pose=pose,
                camera=camera,
                object_obs=object_obs,
                point_obs=point_obs,
                frame_bow=BowVector.from_dict(frame_words),
            )
        )
    return records


# ---------------------------------------------------------------------------
# ready-made fixtures


def single_loop_fixture(
    seed,
    keyframe_count=260,
    noise=None,
    drift=None,
    object_count=16,
    step_drift_sim3=None,
):
    """One closed circuit with re-observable objects.

    ``step_drift_sim3`` switches the drift to a constant offset injected at
    70% of the run (useful as a noise-free, exactly recoverable drift).
    Returns (records, info).
    """
    spec = WorldSpec(object_count=object_count, seed=seed)
    world = generate_world(spec)
    camera = default_camera()
    trajectory = loop_trajectory(world, "single-loop", keyframe_count)
    if noise is None:
        noise = ObservationNoise(
            pixel_sigma=0.7,
            class_confusion_rate=0.08,
            bow_word_dropout=0.12,
            detection_dropout=0.05,
        )
    if step_drift_sim3 is not None:
        split = int(0.7 * keyframe_count)
        drift = make_step_drift(keyframe_count, split, step_drift_sim3)
        info_drift = {"kind": "step", "split": split, "sim3": step_drift_sim3}
    else:
        if drift is None:
            drift = DriftModel(
                translation_rw_sigma=0.005,
                rotation_rw_sigma=0.0006,
                scale_rw_sigma=0.0004,
            )
        info_drift = {"kind": "random-walk", "model": drift}
    records = render_sequence(world, trajectory, camera, drift, noise, seed, max_range=5.0)
    return records, {"world": world, "drift": info_drift, "camera": camera}


def two_floor_fixture(seed, keyframe_count=300, perturbation=0.3, noise=None):
    """Twin-scene circuit: one floor, a transition, then its look-alike twin.

    Returns (records, info); ``info['phase_split']`` is the first keyframe of
    the twin-floor phase, so a (kc >= split, kl < split) pair is cross-floor.
    """
    spec = WorldSpec(seed=seed)
    world_a, world_b = generate_twin_world(spec, perturbation)
    offset = np.array([spec.room_extent[0] + 8.0, 0.0, 0.0])
    world = combine_worlds(world_a, world_b, offset)
    camera = default_camera()
    trajectory = loop_trajectory(world, "two-floor", keyframe_count)
    if noise is None:
        noise = ObservationNoise(
            pixel_sigma=0.7,
            class_confusion_rate=0.08,
            bow_word_dropout=0.12,
            detection_dropout=0.05,
        )
    drift = DriftModel(
        translation_rw_sigma=0.003, rotation_rw_sigma=0.0004, scale_rw_sigma=0.0003
    )
    records = render_sequence(world, trajectory, camera, drift, noise, seed, max_range=5.0)

    n_trans = max(6, keyframe_count // 14)
    n_a = (keyframe_count - n_trans) // 2
    phase_split = n_a + n_trans
    return records, {
        "world": world,
        "camera": camera,
        "phase_split": phase_split,
        "offset": offset,
    }
