import numpy as np
import pytest
from scipy.spatial.transform import Rotation as SR

from cuboidfit.camera import CuboidPose
from cuboidfit.metrics import (
    MetricsReport,
    combined_error,
    evaluate_pair,
    intersection_volume,
    iou3d,
    relative_errors,
    rotation_error_deg,
    scaled_iou,
)
from cuboidfit.synth import mc_box_volume, rotation_from_angles


def random_pose(rng, center=(0, 0, 10), jitter=1.0):
    return CuboidPose(
        rotation=SR.random(rng=rng).as_matrix(),
        translation=np.asarray(center) + rng.normal(0, jitter, 3),
        dimensions=rng.uniform(0.5, 3.0, 3),
    )


class TestIou3d:
    def test_identical(self):
        a = CuboidPose(rotation=np.eye(3), translation=(0, 0, 10), dimensions=(2, 1, 1))
        assert iou3d(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint(self):
        a = CuboidPose(rotation=np.eye(3), translation=(0, 0, 10), dimensions=(2, 1, 1))
        b = CuboidPose(rotation=np.eye(3), translation=(10, 0, 10), dimensions=(2, 1, 1))
        assert iou3d(a, b) == 0.0

    def test_half_overlap_axis_aligned(self):
        a = CuboidPose(rotation=np.eye(3), translation=(0, 0, 10), dimensions=(2, 1, 1))
        b = CuboidPose(rotation=np.eye(3), translation=(1, 0, 10), dimensions=(2, 1, 1))
        assert iou3d(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(12)
        for k in range(40):
            a = random_pose(rng)
            b = CuboidPose(
                rotation=SR.random(rng=rng).as_matrix(),
                translation=a.translation + rng.normal(0, 0.8, 3),
                dimensions=rng.uniform(0.5, 3.0, 3),
            )
            exact = intersection_volume(a, b)
            mc = mc_box_volume(a, b, n_samples=200_000, seed=k)
            assert abs(exact - mc) < 0.02 * max(a.volume, 1.0)

    def test_symmetry(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            a, b = random_pose(rng), random_pose(rng)
            assert abs(iou3d(a, b) - iou3d(b, a)) < 1e-12

    def test_rigid_invariance(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            a, b = random_pose(rng), random_pose(rng)
            Q = SR.random(rng=rng).as_matrix()
            shift = rng.normal(0, 5, 3)
            a2 = CuboidPose(rotation=Q @ a.rotation, translation=Q @ a.translation + shift,
                            dimensions=a.dimensions)
            b2 = CuboidPose(rotation=Q @ b.rotation, translation=Q @ b.translation + shift,
                            dimensions=b.dimensions)
            assert abs(iou3d(a, b) - iou3d(a2, b2)) < 1e-9

    def test_face_touching_boxes(self):
        a = CuboidPose(rotation=np.eye(3), translation=(0, 0, 10), dimensions=(2, 1, 1))
        b = CuboidPose(rotation=np.eye(3), translation=(2, 0, 10), dimensions=(2, 1, 1))
        assert iou3d(a, b) == pytest.approx(0.0, abs=1e-9)


class TestRotationError:
    def test_zero(self):
        R = SR.random(rng=np.random.default_rng(1)).as_matrix()
        assert rotation_error_deg(R, R) == pytest.approx(0.0, abs=1e-5)

    def test_180_flip(self):
        flip = np.diag([-1.0, -1.0, 1.0])  # 180 deg about Z
        assert rotation_error_deg(flip, np.eye(3)) == pytest.approx(180.0, abs=1e-9)

    def test_axis_angle_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            axis = rng.normal(0, 1, 3)
            axis /= np.linalg.norm(axis)
            theta = rng.uniform(0, np.pi)
            R = SR.from_rotvec(theta * axis).as_matrix()
            assert rotation_error_deg(R, np.eye(3)) == pytest.approx(np.degrees(theta), abs=1e-9)

    def test_metric_properties(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            A, B, C = (SR.random(rng=rng).as_matrix() for _ in range(3))
            dab = rotation_error_deg(A, B)
            dba = rotation_error_deg(B, A)
            assert dab == pytest.approx(dba, abs=1e-9)
            assert dab + rotation_error_deg(B, C) >= rotation_error_deg(A, C) - 1e-9


class TestRelativeAndCombined:
    def test_equal_poses(self):
        pose = CuboidPose(rotation=np.eye(3), translation=(1, 2, 10), dimensions=(4, 2, 1.5))
        assert relative_errors(pose, pose) == (0.0, 0.0)

    def test_scaled_translation(self):
        gt = CuboidPose(rotation=np.eye(3), translation=(0, 0, 10), dimensions=(4, 2, 1.5))
        est = CuboidPose(rotation=np.eye(3), translation=(0, 0, 11), dimensions=(4, 2, 1.5))
        e_t, e_d = relative_errors(est, gt)
        assert e_t == pytest.approx(0.1, abs=1e-12)
        assert e_d == 0.0

    def test_random_recomputation(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            gt, est = random_pose(rng), random_pose(rng)
            e_t, e_d = relative_errors(est, gt)
            assert e_t == pytest.approx(
                np.linalg.norm(gt.translation - est.translation) / np.linalg.norm(gt.translation),
                abs=1e-12,
            )
            assert e_d == pytest.approx(
                np.linalg.norm(gt.dimensions - est.dimensions) / np.linalg.norm(gt.dimensions),
                abs=1e-12,
            )

    def test_combined_zero(self):
        assert combined_error(0, 0, 0) == 0

    def test_combined_reference_mix(self):
        # E_t=0.06, E_d=0.04, E_R=2.95 deg through the equal-thirds formula.
        assert combined_error(0.06, 0.04, 2.95) == pytest.approx(0.0387963, abs=1e-4)

    def test_combined_equal_thirds(self):
        assert combined_error(0.3, 0.3, 54.0) == pytest.approx(0.3, abs=1e-12)


class TestScaledIou:
    def test_scale_recovers_exactly(self):
        rng = np.random.default_rng(5)
        gt = random_pose(rng)
        for s in (0.5, 1.7, 3.0):
            est = CuboidPose(rotation=gt.rotation, translation=s * gt.translation,
                             dimensions=s * gt.dimensions)
            assert scaled_iou(est, gt) == pytest.approx(1.0, abs=1e-9)

    def test_equal_translation_norm_matches_iou(self):
        # s* = |t_gt|/|t| = 1 whenever the translation norms agree, so the
        # scaled score reduces to the plain one (pose == gt is a special case).
        rng = np.random.default_rng(6)
        gt = random_pose(rng)
        est = CuboidPose(rotation=rotation_from_angles(0.3, 0.05, -0.02),
                         translation=gt.translation,
                         dimensions=gt.dimensions * 1.1)
        assert scaled_iou(est, gt) == pytest.approx(iou3d(est, gt), abs=1e-12)
        assert scaled_iou(gt, gt) == pytest.approx(1.0, abs=1e-9)

    def test_explicit_rescale_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            gt, est = random_pose(rng), random_pose(rng)
            s = np.linalg.norm(gt.translation) / np.linalg.norm(est.translation)
            manual = iou3d(
                CuboidPose(rotation=est.rotation, translation=s * est.translation,
                           dimensions=s * est.dimensions),
                gt,
            )
            assert scaled_iou(est, gt) == pytest.approx(manual, abs=1e-12)

    def test_invariant_to_estimate_scaling(self):
        rng = np.random.default_rng(8)
        gt, est = random_pose(rng), random_pose(rng)
        base = scaled_iou(est, gt)
        for s in (0.3, 2.0, 11.0):
            est_s = CuboidPose(rotation=est.rotation, translation=s * est.translation,
                               dimensions=s * est.dimensions)
            assert scaled_iou(est_s, gt) == pytest.approx(base, abs=1e-9)


class TestReport:
    def test_report_rows_and_aggregate(self):
        rng = np.random.default_rng(9)
        report = MetricsReport()
        gt = random_pose(rng)
        report.add(evaluate_pair(gt, gt, vehicle_id="v0", solve_ms=10.0))
        est = CuboidPose(rotation=gt.rotation, translation=gt.translation * 1.05,
                         dimensions=gt.dimensions)
        report.add(evaluate_pair(est, gt, vehicle_id="v1", solve_ms=12.0))
        agg = report.aggregate()
        assert agg["n_vehicles"] == 2
        assert agg["iou"] <= 1.0
        csv = report.to_csv()
        lines = csv.strip().split("\n")
        assert lines[0].startswith("vehicle_id,iou,siou,e_rot_deg")
        assert len(lines) == 4  # header + 2 rows + mean footer
        assert lines[-1].startswith("mean,")

    def test_perfect_row_zero_errors(self):
        rng = np.random.default_rng(10)
        gt = random_pose(rng)
        m = evaluate_pair(gt, gt, vehicle_id="v")
        assert m.iou == pytest.approx(1.0, abs=1e-9)
        assert m.e_rot_deg == pytest.approx(0.0, abs=1e-7)
        assert m.e_trans == 0.0 and m.e_dim == 0.0
