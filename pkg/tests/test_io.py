import json

import numpy as np
import pytest

from cuboidfit.annotations import Annotation, AnnotationLabel
from cuboidfit.camera import CameraIntrinsics, CuboidPose
from cuboidfit.io import (
    AnnotationDocument,
    SchemaError,
    VehicleRecord,
    canonical_json,
    kitti_label_to_pose,
    load_annotations,
    load_kitti_calib,
    load_poses,
    parse_annotation_document,
    save_annotations,
    save_poses,
)


def minimal_doc():
    return {
        "camera": {"fx": 1000.0, "fy": 1000.0, "cx": 960.0, "cy": 540.0},
        "vehicles": [
            {
                "id": "car-0",
                "prototype_class": "sedan",
                "annotations": [
                    {"label": "wheel-front-left", "points": [[100.0, 600.0]]},
                    {"label": "symmetry-back", "points": [[450.0, 500.0], [550.0, 500.0]]},
                ],
            }
        ],
    }


class TestAnnotationDocument:
    def test_minimal_valid(self):
        doc = parse_annotation_document(minimal_doc())
        assert doc.camera.fx == 1000.0
        veh = doc.vehicles[0]
        assert veh.id == "car-0"
        assert veh.prototype_class == "sedan"
        assert veh.annotations[0].label is AnnotationLabel.WHEEL_FRONT_LEFT

    def test_unknown_label_names_it(self):
        bad = minimal_doc()
        bad["vehicles"][0]["annotations"][0]["label"] = "wheel-middle-left"
        with pytest.raises(SchemaError) as err:
            parse_annotation_document(bad)
        assert "wheel-middle-left" in str(err.value)

    def test_json_pointer_paths(self):
        bad = minimal_doc()
        bad["vehicles"][0]["annotations"][1]["points"] = [[1.0, 2.0, 3.0], [4.0, 5.0]]
        with pytest.raises(SchemaError) as err:
            parse_annotation_document(bad)
        assert "/vehicles/0/annotations/1/points" in str(err.value)

    def test_missing_camera(self):
        bad = minimal_doc()
        del bad["camera"]
        with pytest.raises(SchemaError) as err:
            parse_annotation_document(bad)
        assert "camera" in str(err.value)

    def test_round_trip_bit_stable(self, tmp_path):
        path = tmp_path / "doc.json"
        with open(path, "w") as f:
            json.dump(minimal_doc(), f)
        doc = load_annotations(str(path))
        out1 = tmp_path / "out1.json"
        out2 = tmp_path / "out2.json"
        save_annotations(doc, str(out1))
        save_annotations(load_annotations(str(out1)), str(out2))
        assert out1.read_bytes() == out2.read_bytes()

    def test_camera_by_reference(self, tmp_path):
        cam_path = tmp_path / "cam.json"
        with open(cam_path, "w") as f:
            json.dump({"fx": 720.0, "fy": 720.0, "cx": 600.0, "cy": 180.0}, f)
        doc = minimal_doc()
        doc["camera"] = "cam.json"
        path = tmp_path / "doc.json"
        with open(path, "w") as f:
            json.dump(doc, f)
        parsed = load_annotations(str(path))
        assert parsed.camera.fx == 720.0

    def test_gt_and_status_fields(self, tmp_path):
        doc = minimal_doc()
        doc["vehicles"][0]["gt"] = {
            "rotation": np.eye(3).tolist(),
            "translation": [0.0, 0.0, 10.0],
            "dimensions": [4.0, 2.0, 1.5],
        }
        doc["vehicles"][0]["elapsed_s"] = 42.5
        doc["vehicles"][0]["status"] = "accepted"
        parsed = parse_annotation_document(doc)
        assert parsed.vehicles[0].gt is not None
        assert parsed.vehicles[0].elapsed_s == 42.5
        assert parsed.vehicles[0].status == "accepted"


class TestPoseFiles:
    def test_save_load_round_trip(self, tmp_path):
        pose = CuboidPose(rotation=np.eye(3), translation=(1.0, 2.0, 10.0),
                          dimensions=(4.0, 2.0, 1.5))
        path = tmp_path / "poses.json"
        save_poses([{"id": "a", "pose": pose.to_dict(), "converged": True}], str(path))
        loaded = load_poses(str(path))
        assert "a" in loaded
        np.testing.assert_allclose(loaded["a"]["pose"].translation, [1, 2, 10])

    def test_error_record(self, tmp_path):
        path = tmp_path / "poses.json"
        save_poses([{"id": "b", "error": "nope"}], str(path))
        loaded = load_poses(str(path))
        assert loaded["b"]["pose"] is None
        assert loaded["b"]["error"] == "nope"


class TestKittiCalib:
    def test_identity_like(self, tmp_path):
        path = tmp_path / "calib.txt"
        path.write_text("P2: 1 0 0 0 0 1 0 0 0 0 1 0\n")
        cam = load_kitti_calib(str(path))
        assert cam.fx == 1.0 and cam.fy == 1.0 and cam.cx == 0.0 and cam.cy == 0.0

    def test_synthetic_p2(self, tmp_path):
        path = tmp_path / "calib.txt"
        path.write_text(
            "P0: 1 0 0 0 0 1 0 0 0 0 1 0\n"
            "P2: 721.5 0.0 609.56 44.86 0.0 721.5 172.85 0.22 0.0 0.0 1.0 0.003\n"
        )
        cam = load_kitti_calib(str(path))
        assert cam.fx == pytest.approx(721.5)
        assert cam.fy == pytest.approx(721.5)
        assert cam.cx == pytest.approx(609.56)
        assert cam.cy == pytest.approx(172.85)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "calib.txt"
        path.write_text("P2: 1 2 3\n")
        with pytest.raises(ValueError):
            load_kitti_calib(str(path))

    def test_missing_key(self, tmp_path):
        path = tmp_path / "calib.txt"
        path.write_text("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n")
        with pytest.raises(KeyError):
            load_kitti_calib(str(path))


class TestKittiLabelAdapter:
    def test_hand_worked_zero_yaw(self):
        # ry=0: object length axis along camera +x, upright.
        pose = kitti_label_to_pose(h=1.5, w=1.8, l=4.2, x=1.0, y=1.6, z=12.0, ry=0.0)
        np.testing.assert_allclose(pose.dimensions, [4.2, 1.8, 1.5])
        np.testing.assert_allclose(pose.translation, [1.0, 1.6, 12.0])
        # vehicle forward (X) maps to camera +x
        np.testing.assert_allclose(pose.rotation @ [1, 0, 0], [1, 0, 0], atol=1e-12)
        # vehicle up (Z) maps to camera -y (camera y points down)
        np.testing.assert_allclose(pose.rotation @ [0, 0, 1], [0, -1, 0], atol=1e-12)

    def test_hand_worked_quarter_turn(self):
        # ry = +pi/2 turns the forward axis onto camera -z... per KITTI
        # convention forward = (cos ry, 0, -sin ry) = (0, 0, -1).
        pose = kitti_label_to_pose(h=1.5, w=1.8, l=4.2, x=0.0, y=1.6, z=12.0, ry=np.pi / 2)
        np.testing.assert_allclose(pose.rotation @ [1, 0, 0], [0, 0, -1], atol=1e-12)
        assert np.linalg.det(pose.rotation) == pytest.approx(1.0)

    def test_valid_rotation_for_random_ry(self):
        for ry in np.linspace(-np.pi, np.pi, 17):
            pose = kitti_label_to_pose(1.5, 1.8, 4.2, 0, 1.6, 10.0, ry)
            R = pose.rotation
            assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-12


class TestCanonicalJson:
    def test_deterministic_and_sorted(self):
        a = canonical_json({"b": 1.23456789012345, "a": [1, 2.0000000001]})
        b = canonical_json({"a": [1, 2.0000000001], "b": 1.23456789012345})
        assert a == b
        assert a.index('"a"') < a.index('"b"')

    def test_nine_significant_digits(self):
        out = canonical_json({"x": 0.12345678987654321})
        assert json.loads(out)["x"] == 0.12345679

    def test_numpy_types(self):
        out = canonical_json({"v": np.float64(1.5), "n": np.int64(3), "arr": np.arange(3.0)})
        parsed = json.loads(out)
        assert parsed == {"v": 1.5, "n": 3, "arr": [0.0, 1.0, 2.0]}
