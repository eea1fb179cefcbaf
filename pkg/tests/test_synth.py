import numpy as np
import pytest

from cuboidfit.annotations import compile_constraints
from cuboidfit.camera import CuboidPose, project
from cuboidfit.metrics import rotation_error_deg
from cuboidfit.solver import SolverConfig, solve
from cuboidfit.synth import (
    REAR_VIEW_RECIPE,
    SceneSpec,
    fd_jacobian,
    generate_rear_study_scene,
    generate_scene,
    gt_parameters,
    mc_box_volume,
)


class TestGenerateScene:
    def test_deterministic_per_seed(self):
        a = generate_scene(SceneSpec(seed=123))
        b = generate_scene(SceneSpec(seed=123))
        np.testing.assert_array_equal(a.gt_pose.rotation, b.gt_pose.rotation)
        for x, y in zip(a.annotations, b.annotations):
            assert x.label == y.label
            np.testing.assert_array_equal(np.asarray(x.points), np.asarray(y.points))

    def test_seeds_differ(self):
        a = generate_scene(SceneSpec(seed=1))
        b = generate_scene(SceneSpec(seed=2))
        assert not np.allclose(a.gt_pose.translation, b.gt_pose.translation)

    def test_feature_points_satisfy_constraints(self):
        scene = generate_scene(SceneSpec(seed=5))
        sys = compile_constraints(scene.annotations, scene.cam)
        # exact reconstruction of p proves every source point matches its label form
        p = gt_parameters(scene, sys)
        np.testing.assert_allclose(p[:3], scene.gt_pose.dimensions, atol=1e-9)

    def test_wheels_project_below_roof(self):
        scene = generate_scene(
            SceneSpec(seed=9, yaw_range=(0.0, 0.0), distance_range=(10.0, 10.0),
                      dims=(4.0, 2.0, 1.5), pitch_range_deg=(0, 0), roll_range_deg=(0, 0))
        )
        pose = scene.gt_pose
        wheel_px = [
            np.asarray(a.points[0]) for a in scene.annotations if a.label.value.startswith("wheel-")
        ]
        roof_center = pose.rotation @ np.array([0.0, 0.0, pose.dimensions[2]]) + pose.translation
        roof_px = project(roof_center, scene.cam)
        # image v grows downward: ground contacts sit lower than the roof
        assert all(w[1] > roof_px[1] for w in wheel_px)

    def test_noise_free_round_trip(self):
        scene = generate_scene(SceneSpec(seed=17))
        res = solve(scene.annotations, scene.cam, config=SolverConfig(gauge="fix_dz_to_1"))
        assert rotation_error_deg(res.pose.rotation, scene.gt_pose.rotation) < 1e-4
        s = scene.gt_pose.dimensions[2] / res.pose.dimensions[2]  # align scales
        np.testing.assert_allclose(res.pose.dimensions * s, scene.gt_pose.dimensions, atol=1e-5)

    def test_all_source_points_in_front(self):
        for seed in range(5):
            scene = generate_scene(SceneSpec(seed=seed))
            R, t = scene.gt_pose.rotation, scene.gt_pose.translation
            for pts in scene.gt_points:
                for X in pts:
                    assert (R @ X + t)[2] > 0

    def test_rear_view_recipe_labels(self):
        scene = generate_scene(
            SceneSpec(seed=3, recipe=REAR_VIEW_RECIPE, yaw_range=(-0.2, 0.2))
        )
        labels = {a.label.value for a in scene.annotations}
        assert labels == set(REAR_VIEW_RECIPE)

    def test_document_round_trip_shape(self):
        scene = generate_scene(SceneSpec(seed=2))
        doc = scene.to_document("veh-1", "sedan")
        assert doc["vehicles"][0]["id"] == "veh-1"
        assert doc["vehicles"][0]["prototype_class"] == "sedan"
        assert "gt" in doc["vehicles"][0]
        assert {"fx", "fy", "cx", "cy"} <= set(doc["camera"])


class TestRearStudyScene:
    def test_paired_scenes_share_ground_truth(self):
        a = generate_rear_study_scene(4, with_direction=False)
        b = generate_rear_study_scene(4, with_direction=True)
        np.testing.assert_array_equal(a.gt_pose.rotation, b.gt_pose.rotation)
        np.testing.assert_array_equal(a.gt_pose.dimensions, b.gt_pose.dimensions)
        assert len(b.annotations) == len(a.annotations) + 1
        assert b.annotations[-1].label.value == "dir-forward"
        # shared base features carry identical pixel noise
        for x, y in zip(a.annotations, b.annotations):
            np.testing.assert_array_equal(np.asarray(x.points), np.asarray(y.points))


class TestMcBoxVolume:
    def test_identical_unit_cubes(self):
        a = CuboidPose(rotation=np.eye(3), translation=(0, 0, 5), dimensions=(1, 1, 1))
        est = mc_box_volume(a, a, n_samples=1_000_000, seed=0)
        assert est == pytest.approx(1.0, abs=0.005)

    def test_disjoint(self):
        a = CuboidPose(rotation=np.eye(3), translation=(0, 0, 5), dimensions=(1, 1, 1))
        b = CuboidPose(rotation=np.eye(3), translation=(5, 0, 5), dimensions=(1, 1, 1))
        assert mc_box_volume(a, b, n_samples=100_000, seed=1) == 0.0

    def test_three_sigma_vs_exact(self):
        from cuboidfit.metrics import intersection_volume
        from scipy.spatial.transform import Rotation as SR

        rng = np.random.default_rng(6)
        for k in range(10):
            a = CuboidPose(rotation=SR.random(rng=rng).as_matrix(),
                           translation=(0, 0, 8) + rng.normal(0, 0.5, 3),
                           dimensions=rng.uniform(0.5, 2.5, 3))
            b = CuboidPose(rotation=SR.random(rng=rng).as_matrix(),
                           translation=a.translation + rng.normal(0, 0.5, 3),
                           dimensions=rng.uniform(0.5, 2.5, 3))
            n = 400_000
            est = mc_box_volume(a, b, n_samples=n, seed=k)
            exact = intersection_volume(a, b)
            frac = exact / a.volume
            se = a.volume * np.sqrt(max(frac * (1 - frac), 1e-12) / n)
            assert abs(est - exact) < max(3 * se, 1e-3)


class TestFdJacobian:
    def test_linear_residual_exact(self):
        rng = np.random.default_rng(7)
        A = rng.normal(0, 1, (5, 4))
        b = rng.normal(0, 1, 5)
        J = fd_jacobian(lambda x: A @ x + b, np.zeros(4))
        np.testing.assert_allclose(J, A, atol=1e-8)

    def test_quadratic_residual(self):
        f = lambda x: np.array([x[0] ** 2 + x[1], 3 * x[1] ** 2])
        x0 = np.array([1.5, -0.5])
        J = fd_jacobian(f, x0)
        expected = np.array([[3.0, 1.0], [0.0, -3.0]])
        np.testing.assert_allclose(J, expected, atol=1e-6)
