"""File formats: annotation documents, pose files, KITTI adapters.

All JSON emitted by this package goes through ``canonical_json`` (sorted
keys, floats at 9 significant digits) so identical runs produce
byte-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import json

import jsonschema
import numpy as np

from .annotations import Annotation, AnnotationLabel
from .camera import CameraIntrinsics, CuboidPose

__all__ = [
    "AnnotationDocument",
    "VehicleRecord",
    "SchemaError",
    "load_annotations",
    "save_annotations",
    "load_poses",
    "save_poses",
    "load_kitti_calib",
    "kitti_label_to_pose",
    "canonical_json",
    "ANNOTATION_DOCUMENT_SCHEMA",
]

_LABEL_VALUES = [lab.value for lab in AnnotationLabel]

_CAMERA_SCHEMA = {
    "type": "object",
    "properties": {
        "fx": {"type": "number", "exclusiveMinimum": 0},
        "fy": {"type": "number", "exclusiveMinimum": 0},
        "cx": {"type": "number"},
        "cy": {"type": "number"},
        "skew": {"type": "number"},
        "distortion": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 5,
            "maxItems": 5,
        },
    },
    "required": ["fx", "fy", "cx", "cy"],
    "additionalProperties": False,
}

_POINT_SCHEMA = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

_ANNOTATION_SCHEMA = {
    "type": "object",
    "properties": {
        "label": {"type": "string", "enum": _LABEL_VALUES},
        "points": {"type": "array", "items": _POINT_SCHEMA, "minItems": 1, "maxItems": 2},
    },
    "required": ["label", "points"],
    "additionalProperties": False,
}

_POSE_SCHEMA = {
    "type": "object",
    "properties": {
        "rotation": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
            "minItems": 3,
            "maxItems": 3,
        },
        "translation": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "dimensions": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
    },
    "required": ["rotation", "translation", "dimensions"],
    "additionalProperties": False,
}

_VEHICLE_SCHEMA = {
    "type": "object",
    "properties": {
        "id": {"type": "string"},
        "prototype_class": {"type": "string"},
        "annotations": {"type": "array", "items": _ANNOTATION_SCHEMA},
        "feature_scale": {
            "type": "object",
            "properties": {
                "label_pair": {
                    "type": "array",
                    "items": {"type": "string", "enum": _LABEL_VALUES},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "length_m": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["label_pair", "length_m"],
            "additionalProperties": False,
        },
        "gt": _POSE_SCHEMA,
        "elapsed_s": {"type": "number", "minimum": 0},
        "status": {"type": "string", "enum": ["accepted", "failed"]},
    },
    "required": ["id", "annotations"],
    "additionalProperties": False,
}

ANNOTATION_DOCUMENT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "image": {"type": "string"},
        "camera": {"oneOf": [_CAMERA_SCHEMA, {"type": "string"}]},
        "vehicles": {"type": "array", "items": _VEHICLE_SCHEMA},
    },
    "required": ["camera", "vehicles"],
    "additionalProperties": False,
}

_SOLVE_REQUEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "camera": _CAMERA_SCHEMA,
        "vehicle": _VEHICLE_SCHEMA,
        "config": {
            "type": "object",
            "properties": {
                "gauge": {"type": "string", "enum": ["fix_dz_to_1", "homogeneous_svd", "prior"]},
                "lambda_prior": {"type": "number", "minimum": 0},
                "lambda_pixel": {"type": "number", "minimum": 0},
                "finetune": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["camera", "vehicle"],
    "additionalProperties": False,
}


class SchemaError(ValueError):
    """Document violates the schema; message lists JSON-pointer paths."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _validate(doc: dict, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errs = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errs:
        raise SchemaError(
            f"/{'/'.join(str(p) for p in e.absolute_path)}: {e.message}" for e in errs
        )


def validate_annotation_document(doc: dict) -> None:
    _validate(doc, ANNOTATION_DOCUMENT_SCHEMA)


def validate_solve_request(doc: dict) -> None:
    _validate(doc, _SOLVE_REQUEST_SCHEMA)


@dataclass
class VehicleRecord:
    id: str
    annotations: list
    prototype_class: str | None = None
    feature_scale: dict | None = None
    gt: CuboidPose | None = None
    elapsed_s: float | None = None
    status: str | None = None

    def to_dict(self) -> dict:
        doc: dict = {
            "id": self.id,
            "annotations": [
                {"label": a.label.value, "points": [list(map(float, p)) for p in a.points]}
                for a in self.annotations
            ],
        }
        if self.prototype_class:
            doc["prototype_class"] = self.prototype_class
        if self.feature_scale:
            doc["feature_scale"] = self.feature_scale
        if self.gt is not None:
            doc["gt"] = self.gt.to_dict()
        if self.elapsed_s is not None:
            doc["elapsed_s"] = self.elapsed_s
        if self.status is not None:
            doc["status"] = self.status
        return doc


@dataclass
class AnnotationDocument:
    camera: CameraIntrinsics
    vehicles: list
    image: str | None = None

    def to_dict(self) -> dict:
        doc: dict = {"camera": self.camera.to_dict(), "vehicles": [v.to_dict() for v in self.vehicles]}
        if self.image:
            doc["image"] = self.image
        return doc


def _vehicle_from_dict(doc: dict) -> VehicleRecord:
    return VehicleRecord(
        id=doc["id"],
        annotations=[
            Annotation(label=AnnotationLabel(a["label"]), points=tuple(a["points"]))
            for a in doc["annotations"]
        ],
        prototype_class=doc.get("prototype_class"),
        feature_scale=doc.get("feature_scale"),
        gt=CuboidPose.from_dict(doc["gt"]) if "gt" in doc else None,
        elapsed_s=doc.get("elapsed_s"),
        status=doc.get("status"),
    )


def parse_annotation_document(doc: dict, base_dir: str | None = None) -> AnnotationDocument:
    validate_annotation_document(doc)
    cam_field = doc["camera"]
    if isinstance(cam_field, str):
        import os

        path = cam_field if base_dir is None else os.path.join(base_dir, cam_field)
        camera = CameraIntrinsics.from_json(path)
    else:
        camera = CameraIntrinsics.from_dict(cam_field)
    return AnnotationDocument(
        camera=camera,
        vehicles=[_vehicle_from_dict(v) for v in doc["vehicles"]],
        image=doc.get("image"),
    )


def load_annotations(path: str) -> AnnotationDocument:
    import os

    with open(path) as f:
        doc = json.load(f)
    return parse_annotation_document(doc, base_dir=os.path.dirname(path))


def save_annotations(doc: AnnotationDocument, path: str) -> None:
    with open(path, "w") as f:
        f.write(canonical_json(doc.to_dict()))


# ---------------------------------------------------------------------------
# Pose files (solver output and ground truth share this shape)


def save_poses(records: list, path: str) -> None:
    """records: list of dicts with at least id and pose (or error)."""
    with open(path, "w") as f:
        f.write(canonical_json({"vehicles": records}))


def load_poses(path: str) -> dict:
    """Returns {vehicle_id: {"pose": CuboidPose | None, **extras}}."""
    with open(path) as f:
        doc = json.load(f)
    out = {}
    for rec in doc["vehicles"]:
        entry = dict(rec)
        entry["pose"] = CuboidPose.from_dict(rec["pose"]) if rec.get("pose") else None
        out[rec["id"]] = entry
    return out


# ---------------------------------------------------------------------------
# KITTI adapters


def load_kitti_calib(path: str, key: str = "P2") -> CameraIntrinsics:
    """Intrinsics from a KITTI-style calibration file's projection row.

    Parses the 3x4 projection matrix named by ``key`` and keeps the
    intrinsic entries; the baseline (fourth column) is ignored.
    """
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            name, _, rest = line.partition(":")
            if name.strip() != key:
                continue
            vals = [float(v) for v in rest.split()]
            if len(vals) != 12:
                raise ValueError(f"{key} row must have 12 values, got {len(vals)}")
            P = np.array(vals).reshape(3, 4)
            return CameraIntrinsics(
                fx=P[0, 0], fy=P[1, 1], cx=P[0, 2], cy=P[1, 2], skew=P[0, 1]
            )
    raise KeyError(f"no {key} row in {path}")


def kitti_label_to_pose(h: float, w: float, l: float, x: float, y: float, z: float,
                        ry: float) -> CuboidPose:
    """KITTI label fields to a CuboidPose.

    KITTI: camera frame x right / y down / z forward, location at the
    bottom center, ry about the camera Y axis with the length axis along
    +x at ry = 0.  Maps onto our bottom-center, Z-up vehicle frame.
    """
    c, s = np.cos(ry), np.sin(ry)
    R = np.array([[c, s, 0.0], [0.0, 0.0, -1.0], [-s, c, 0.0]])
    return CuboidPose(rotation=R, translation=np.array([x, y, z]), dimensions=np.array([l, w, h]))


# ---------------------------------------------------------------------------
# Canonical JSON


def _canonize(obj):
    if isinstance(obj, dict):
        return {k: _canonize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.9g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _canonize(obj.tolist())
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, floats at 9 significant digits."""
    return json.dumps(_canonize(obj), sort_keys=True, indent=2) + "\n"
