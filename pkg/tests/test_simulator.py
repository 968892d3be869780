import math

import numpy as np
import pytest

from semloop.errors import PlacementFailure
from semloop.geometry import Pose, Sim3Transform, project, rot_z
from semloop.simulator import (
    DriftModel,
    ObservationNoise,
    WorldSpec,
    combine_worlds,
    default_camera,
    generate_twin_world,
    generate_world,
    level_pose,
    loop_trajectory,
    make_step_drift,
    render_sequence,
    single_loop_fixture,
)

QUIET = ObservationNoise()
NO_DRIFT = DriftModel()


def small_spec(**kw):
    defaults = dict(object_count=6, background_point_count=60, seed=3)
    defaults.update(kw)
    return WorldSpec(**defaults)


class TestWorldGeneration:
    def test_same_seed_same_world(self):
        a = generate_world(small_spec())
        b = generate_world(small_spec())
        for oa, ob in zip(a.objects, b.objects):
            assert np.array_equal(oa.center, ob.center)
            assert np.array_equal(oa.words, ob.words)
            assert oa.class_id == ob.class_id
        assert np.array_equal(a.point_pos, b.point_pos)
        assert np.array_equal(a.point_words, b.point_words)

    def test_zero_objects_leaves_points_only(self):
        w = generate_world(small_spec(object_count=0))
        assert w.objects == []
        assert len(w.point_pos) == 60

    def test_objects_inside_room_and_separated(self):
        spec = small_spec(object_count=10)
        w = generate_world(spec)
        assert len(w.objects) == 10
        ext = np.array(spec.room_extent)
        for o in w.objects:
            assert (o.center >= 0).all() and (o.center <= ext).all()
            assert o.axes[0] >= o.axes[1] >= o.axes[2] > 0
        for i, a in enumerate(w.objects):
            for b in w.objects[i + 1 :]:
                d = np.linalg.norm(a.center - b.center)
                assert d >= 0.5 * (a.axes[0] + b.axes[0]) - 1e-12

    def test_placement_failure_when_room_too_small(self):
        spec = WorldSpec(
            object_count=10,
            room_extent=(1.6, 1.6, 3.0),
            axes_range=(0.5, 0.55),
            background_point_count=10,
            scene_radius=0.4,
            seed=0,
        )
        with pytest.raises(PlacementFailure):
            generate_world(spec)


class TestTwinWorlds:
    def test_zero_perturbation_copies_objects(self):
        a, b = generate_twin_world(small_spec(object_count=8), 0.0)
        for oa, ob in zip(a.objects, b.objects):
            assert np.array_equal(oa.center, ob.center)
            assert np.array_equal(oa.axes, ob.axes)
            assert np.array_equal(oa.words, ob.words)
            assert np.array_equal(oa.word_azimuths, ob.word_azimuths)

    def test_full_perturbation_changes_every_object(self):
        a, b = generate_twin_world(small_spec(object_count=8), 1.0)
        for oa, ob in zip(a.objects, b.objects):
            assert not np.array_equal(oa.words, ob.words)
            assert not np.allclose(oa.axes, ob.axes)

    def test_fraction_rounds_to_exact_count(self):
        a, b = generate_twin_world(small_spec(object_count=10), 0.2)
        changed = sum(
            1 for oa, ob in zip(a.objects, b.objects) if not np.array_equal(oa.words, ob.words)
        )
        assert changed == 2

    def test_classes_preserved(self):
        a, b = generate_twin_world(small_spec(object_count=10), 0.5)
        assert [o.class_id for o in a.objects] == [o.class_id for o in b.objects]

    def test_twin_points_always_fresh(self):
        a, b = generate_twin_world(small_spec(object_count=8), 0.0)
        assert not np.array_equal(a.point_words, b.point_words)

    def test_combine_offsets_second_world(self):
        a, b = generate_twin_world(small_spec(object_count=4), 0.0)
        w = combine_worlds(a, b, (20.0, 0.0, 0.0))
        assert len(w.objects) == 8
        assert np.allclose(w.objects[4].center, a.objects[0].center + (20, 0, 0))
        assert len(w.regions) == 2


class TestTrajectories:
    def test_single_loop_closes(self):
        w = generate_world(small_spec())
        poses = loop_trajectory(w, "single-loop", 100)
        assert len(poses) == 100
        gap = np.linalg.norm(poses[0].translation - poses[-1].translation)
        assert gap < 0.1
        ang = math.degrees(
            math.acos(np.clip(poses[0].optical_axis() @ poses[-1].optical_axis(), -1, 1))
        )
        assert ang < 10.0

    def test_two_floor_phases_never_meet(self):
        a, b = generate_twin_world(small_spec(object_count=4), 0.3)
        w = combine_worlds(a, b, (20.0, 0.0, 0.0))
        poses = loop_trajectory(w, "two-floor", 140)
        assert len(poses) == 140
        n_trans = max(6, 140 // 14)
        n_a = (140 - n_trans) // 2
        pos_a = np.array([p.translation for p in poses[:n_a]])
        pos_b = np.array([p.translation for p in poses[n_a + n_trans :]])
        d_min = min(np.linalg.norm(pos_b - pa, axis=1).min() for pa in pos_a)
        assert d_min > 1.0

    def test_unknown_kind_rejected(self):
        w = generate_world(small_spec())
        with pytest.raises(ValueError):
            loop_trajectory(w, "figure-eight", 50)
        with pytest.raises(ValueError):
            loop_trajectory(w, "single-loop", 5)


class TestRendering:
    def test_no_noise_no_drift_is_exact(self):
        w = generate_world(small_spec())
        traj = loop_trajectory(w, "single-loop", 40)
        recs = render_sequence(w, traj, default_camera(), NO_DRIFT, QUIET, seed=0)
        for rec, pose in zip(recs, traj):
            assert np.array_equal(rec.est_pose.rotation, pose.rotation)
            assert np.array_equal(rec.est_pose.translation, pose.translation)
            for obs in rec.object_obs:
                gt_center = w.objects[obs.gt_object_id].center
                assert np.allclose(obs.center_world, gt_center)
                assert np.allclose(obs.center_px, project(rec.camera, pose, gt_center))

    def test_camera_facing_away_sees_nothing(self):
        w = generate_world(small_spec())
        pose = level_pose((30.0, 30.0, 1.4), (1.0, 0.0))
        recs = render_sequence(w, [pose] * 3, default_camera(), NO_DRIFT, QUIET, seed=0)
        assert all(not r.object_obs for r in recs)
        assert all(r.frame_bow.norm() > 0 for r in recs)

    def test_byte_identical_rerender(self):
        w = generate_world(small_spec())
        traj = loop_trajectory(w, "single-loop", 30)
        noise = ObservationNoise(0.5, 0.1, 0.1, 0.05)
        drift = DriftModel(0.01, 0.001, 0.001)
        r1 = render_sequence(w, traj, default_camera(), drift, noise, seed=9)
        r2 = render_sequence(w, traj, default_camera(), drift, noise, seed=9)
        for a, b in zip(r1, r2):
            assert np.array_equal(a.est_pose.translation, b.est_pose.translation)
            assert len(a.object_obs) == len(b.object_obs)
            for oa, ob in zip(a.object_obs, b.object_obs):
                assert oa.track_id == ob.track_id
                assert np.array_equal(oa.center_world, ob.center_world)
                assert np.array_equal(oa.center_px, ob.center_px)
                assert oa.patch_bow == ob.patch_bow
            assert a.frame_bow == b.frame_bow

    def test_visibility_invariant(self):
        records, info = single_loop_fixture(seed=5, keyframe_count=50)
        world = info["world"]
        for rec in records:
            for obs in rec.object_obs:
                uv = project(rec.camera, rec.gt_pose, world.objects[obs.gt_object_id].center)
                assert 0 <= uv[0] < rec.camera.width
                assert 0 <= uv[1] < rec.camera.height
            for p in rec.point_obs:
                uv = project(rec.camera, rec.gt_pose, world.point_pos[p.point_id])
                assert 0 <= uv[0] < rec.camera.width
                assert 0 <= uv[1] < rec.camera.height

    def test_track_id_changes_after_long_absence(self):
        w = generate_world(small_spec(object_count=1, seed=11))
        w.objects[0].center[:] = (6.0, 6.0, 1.4)
        look = level_pose((6.0, 2.0, 1.4), (0.0, 1.0))
        away = level_pose((6.0, 2.0, 1.4), (0.0, -1.0))
        traj = [look] * 3 + [away] * 15 + [look] * 3
        recs = render_sequence(w, traj, default_camera(), NO_DRIFT, QUIET, seed=0)
        first = recs[0].object_obs[0].track_id
        last = recs[-1].object_obs[0].track_id
        assert first != last

    def test_step_drift_schedule(self):
        w = generate_world(small_spec())
        traj = loop_trajectory(w, "single-loop", 20)
        d = Sim3Transform(1.05, rot_z(0.1), np.array([0.5, 0.0, 0.0]))
        schedule = make_step_drift(20, 10, d)
        recs = render_sequence(w, traj, default_camera(), schedule, QUIET, seed=0)
        assert np.allclose(recs[5].est_pose.translation, traj[5].translation)
        assert np.allclose(recs[15].est_pose.translation, d.apply(traj[15].translation))


class TestDriftStatistics:
    def test_random_walk_magnitude(self):
        # final per-axis displacement of a pure translation random walk must
        # match sigma * sqrt(n) in distribution across seeds
        sigma, n_kf, n_seeds = 0.01, 500, 100
        w = generate_world(small_spec(object_count=0, background_point_count=8))
        pose = level_pose((6.0, 2.0, 1.4), (0.0, 1.0))
        traj = [pose] * n_kf
        drift = DriftModel(translation_rw_sigma=sigma)
        finals = []
        for seed in range(n_seeds):
            recs = render_sequence(w, traj, default_camera(), drift, QUIET, seed=seed)
            finals.append(recs[-1].est_pose.translation - traj[-1].translation)
        finals = np.array(finals)
        expected = sigma * math.sqrt(n_kf)
        stds = finals.std(axis=0, ddof=1)
        # 3-sigma band on the sample std of a normal sample of size 100
        band = 3.0 * expected / math.sqrt(2 * n_seeds)
        assert (np.abs(stds - expected) < band).all()
