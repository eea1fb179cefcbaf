"""Evaluation metrics for estimated cuboids against ground truth.

Provides exact oriented 3D IoU (half-space clipping, no BEV shortcut, so
boxes with pitch/roll are handled), rotation error in degrees, relative
translation/dimension errors, their combined score, and the scaled IoU
that evaluates up-to-scale solutions after the optimal rescale
s* = |t_gt| / |t|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .camera import CuboidPose, cuboid_corners

__all__ = [
    "iou3d",
    "rotation_error_deg",
    "relative_errors",
    "combined_error",
    "scaled_iou",
    "VehicleMetrics",
    "MetricsReport",
    "evaluate_pair",
]

# Face corner indices for the cuboid_corners ordering (bottom ring
# rear-left, rear-right, front-right, front-left; then top ring).
_FACES = (
    (0, 1, 2, 3),  # bottom (Z = 0)
    (4, 5, 6, 7),  # top (Z = d_z)
    (3, 2, 6, 7),  # front (X = +d_x/2)
    (0, 1, 5, 4),  # rear
    (0, 3, 7, 4),  # left (Y = +d_y/2)
    (1, 2, 6, 5),  # right
)

_PLANE_EPS = 1e-12


def _to_local(pose: CuboidPose, pts: np.ndarray) -> np.ndarray:
    """Camera-frame points into the box frame centered at the cuboid middle."""
    center = pose.rotation @ np.array([0.0, 0.0, pose.dimensions[2] / 2.0]) + pose.translation
    return (pts - center) @ pose.rotation


def _clip_polygon_slab(poly: list, axis: int, half: float, sign: float) -> list:
    """Sutherland-Hodgman clip of a 3D polygon against sign*x[axis] <= half."""
    if not poly:
        return []
    out: list = []
    prev = poly[-1]
    prev_d = half - sign * prev[axis]
    for cur in poly:
        cur_d = half - sign * cur[axis]
        if cur_d >= -_PLANE_EPS:
            if prev_d < -_PLANE_EPS:
                t = prev_d / (prev_d - cur_d)
                out.append(prev + t * (cur - prev))
            out.append(cur)
        elif prev_d >= -_PLANE_EPS:
            t = prev_d / (prev_d - cur_d)
            out.append(prev + t * (cur - prev))
        prev, prev_d = cur, cur_d
    return out


def _clipped_face_points(src: CuboidPose, clip: CuboidPose) -> list:
    """Vertices of src's faces clipped by clip's six half-spaces (camera frame)."""
    corners = cuboid_corners(src)
    local = _to_local(clip, corners)
    halves = clip.dimensions / 2.0
    pts: list = []
    for face in _FACES:
        poly = [local[i] for i in face]
        for axis in range(3):
            for sign in (1.0, -1.0):
                poly = _clip_polygon_slab(poly, axis, halves[axis], sign)
                if not poly:
                    break
            if not poly:
                break
        pts.extend(poly)
    if not pts:
        return []
    # Back to the camera frame.
    center = clip.rotation @ np.array([0.0, 0.0, clip.dimensions[2] / 2.0]) + clip.translation
    return [clip.rotation @ p + center for p in pts]


def intersection_volume(a: CuboidPose, b: CuboidPose) -> float:
    """Exact volume of the intersection polyhedron of two cuboids."""
    pts = _clipped_face_points(a, b) + _clipped_face_points(b, a)
    if len(pts) < 4:
        return 0.0
    try:
        return float(ConvexHull(np.asarray(pts)).volume)
    except QhullError:
        return 0.0  # degenerate contact (face/edge touch)


def iou3d(a: CuboidPose, b: CuboidPose) -> float:
    """Exact oriented 3D intersection-over-union."""
    va, vb = a.volume, b.volume
    if va <= 0 or vb <= 0:
        raise ValueError("degenerate box volume")
    inter = intersection_volume(a, b)
    return inter / (va + vb - inter)


def rotation_error_deg(R: np.ndarray, R_gt: np.ndarray) -> float:
    """Angle of the relative rotation R @ R_gt', in degrees (0..180)."""
    R = np.asarray(R, dtype=float)
    R_gt = np.asarray(R_gt, dtype=float)
    c = (np.trace(R @ R_gt.T) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def relative_errors(pose: CuboidPose, gt: CuboidPose) -> tuple:
    """(relative translation error, relative dimension error)."""
    e_t = np.linalg.norm(gt.translation - pose.translation) / np.linalg.norm(gt.translation)
    e_d = np.linalg.norm(gt.dimensions - pose.dimensions) / np.linalg.norm(gt.dimensions)
    return float(e_t), float(e_d)


def combined_error(e_t: float, e_d: float, e_r_deg: float) -> float:
    """Equal-thirds mix of translation, dimension, and rotation/180 errors."""
    return (e_t + e_d + e_r_deg / 180.0) / 3.0


def scaled_iou(pose: CuboidPose, gt: CuboidPose) -> float:
    """IoU after rescaling the estimate by s* = |t_gt| / |t|.

    Evaluates the up-to-scale (8 DoF) solution quality independently of
    the metric scale the estimate happened to pick.
    """
    s = np.linalg.norm(gt.translation) / np.linalg.norm(pose.translation)
    rescaled = CuboidPose(
        rotation=pose.rotation,
        translation=s * pose.translation,
        dimensions=s * pose.dimensions,
    )
    return iou3d(rescaled, gt)


@dataclass(frozen=True)
class VehicleMetrics:
    vehicle_id: str
    iou: float
    siou: float
    e_rot_deg: float
    e_trans: float
    e_dim: float
    e_comb: float
    solve_ms: float = float("nan")
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "iou": self.iou,
            "siou": self.siou,
            "e_rot_deg": self.e_rot_deg,
            "e_trans": self.e_trans,
            "e_dim": self.e_dim,
            "e_comb": self.e_comb,
            "solve_ms": self.solve_ms,
            "converged": self.converged,
        }


def evaluate_pair(pose: CuboidPose, gt: CuboidPose, vehicle_id: str = "",
                  solve_ms: float = float("nan"), converged: bool = True) -> VehicleMetrics:
    e_r = rotation_error_deg(pose.rotation, gt.rotation)
    e_t, e_d = relative_errors(pose, gt)
    return VehicleMetrics(
        vehicle_id=vehicle_id,
        iou=iou3d(pose, gt),
        siou=scaled_iou(pose, gt),
        e_rot_deg=e_r,
        e_trans=e_t,
        e_dim=e_d,
        e_comb=combined_error(e_t, e_d, e_r),
        solve_ms=solve_ms,
        converged=converged,
    )


_CSV_COLUMNS = ("vehicle_id", "iou", "siou", "e_rot_deg", "e_trans", "e_dim",
                "e_comb", "solve_ms", "converged")


@dataclass
class MetricsReport:
    """Per-vehicle metric rows plus aggregate means."""

    rows: list = field(default_factory=list)

    def add(self, m: VehicleMetrics) -> None:
        self.rows.append(m)

    def aggregate(self) -> dict:
        if not self.rows:
            return {}
        keys = ("iou", "siou", "e_rot_deg", "e_trans", "e_dim", "e_comb")
        agg = {k: float(np.mean([getattr(r, k) for r in self.rows])) for k in keys}
        agg["n_vehicles"] = len(self.rows)
        agg["n_converged"] = sum(1 for r in self.rows if r.converged)
        return agg

    def to_dict(self) -> dict:
        return {"vehicles": [r.to_dict() for r in self.rows], "aggregate": self.aggregate()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(_CSV_COLUMNS) + "\n")
        for r in self.rows:
            d = r.to_dict()
            buf.write(",".join(_fmt(d[c]) for c in _CSV_COLUMNS) + "\n")
        agg = self.aggregate()
        if agg:
            buf.write(
                "mean,"
                + ",".join(_fmt(agg[c]) for c in ("iou", "siou", "e_rot_deg", "e_trans", "e_dim", "e_comb"))
                + ",,\n"
            )
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)
