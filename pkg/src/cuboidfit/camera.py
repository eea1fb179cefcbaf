"""Pinhole camera model and the vehicle/cuboid coordinate conventions.

Conventions used throughout the package:

* Camera frame: X right, Y down, Z forward (standard computer vision).
* Vehicle frame: origin at the bottom center of the vehicle, X forward,
  Y left, Z up.  The top-right-front corner of the enclosing cuboid is
  at ``(d_x/2, -d_y/2, d_z)``.
* Lengths in meters, pixel quantities in pixels, angles in radians
  (degrees only at reporting boundaries).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

__all__ = [
    "CameraIntrinsics",
    "CuboidPose",
    "CUBOID_EDGES",
    "ensure_rotation",
    "is_rotation",
    "normalize_pixel",
    "project",
    "cuboid_corners",
    "camera_center_in_vehicle",
]

ROTATION_TOL = 1e-9
MIN_DEPTH = 1e-9

# Edge index pairs of the corner ordering produced by cuboid_corners:
# bottom ring, top ring, then the four vertical edges.
CUBOID_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)


class BadCameraError(ValueError):
    """Invalid intrinsics or an undistortion that fails to converge."""


def is_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """True if R is a proper rotation: R'R = I and det(R) = +1 within tol."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    ortho = np.linalg.norm(R.T @ R - np.eye(3))
    return ortho < tol and abs(np.linalg.det(R) - 1.0) < tol


def ensure_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> np.ndarray:
    """Validate and return R as a float array; raises ValueError if invalid."""
    R = np.asarray(R, dtype=float)
    if not is_rotation(R, tol):
        raise ValueError("matrix is not a proper rotation (orthogonality/det check failed)")
    return R


def nearest_rotation(R: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto SO(3) (sign-corrected polar factor)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with optional Brown-Conrady distortion.

    distortion holds (k1, k2, p1, p2, k3); an empty tuple means an ideal
    pinhole.  Distortion is applied to normalized image coordinates, i.e.
    after perspective division and before the K matrix.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0
    distortion: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.fx) and self.fx > 0 and np.isfinite(self.fy) and self.fy > 0):
            raise BadCameraError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not all(np.isfinite(v) for v in (self.cx, self.cy, self.skew)):
            raise BadCameraError("principal point / skew must be finite")
        dist = tuple(float(d) for d in self.distortion)
        if len(dist) not in (0, 5):
            raise BadCameraError(f"distortion must be empty or (k1,k2,p1,p2,k3), got {len(dist)} values")
        if not all(np.isfinite(d) for d in dist):
            raise BadCameraError("distortion coefficients must be finite")
        object.__setattr__(self, "distortion", dist)

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, self.skew, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def K_inv(self) -> np.ndarray:
        return np.linalg.inv(self.K)

    @property
    def has_distortion(self) -> bool:
        return any(d != 0.0 for d in self.distortion)

    @classmethod
    def from_dict(cls, doc: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(doc["fx"]),
            fy=float(doc["fy"]),
            cx=float(doc["cx"]),
            cy=float(doc["cy"]),
            skew=float(doc.get("skew", 0.0)),
            distortion=tuple(doc.get("distortion", ())),
        )

    def to_dict(self) -> dict:
        doc = {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}
        if self.skew != 0.0:
            doc["skew"] = self.skew
        if self.distortion:
            doc["distortion"] = list(self.distortion)
        return doc

    @classmethod
    def from_json(cls, path: str) -> "CameraIntrinsics":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class CuboidPose:
    """Vehicle cuboid as (rotation, translation, dimensions).

    rotation/translation map vehicle coordinates to camera coordinates;
    dimensions = (d_x, d_y, d_z) = (length, width, height) in meters.
    """

    rotation: np.ndarray
    translation: np.ndarray
    dimensions: np.ndarray

    def __post_init__(self) -> None:
        R = ensure_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        d = np.asarray(self.dimensions, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        if not (np.all(np.isfinite(d)) and np.all(d > 0)):
            raise ValueError(f"dimensions must be positive, got {d}")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "dimensions", d)

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "dimensions": self.dimensions.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CuboidPose":
        R = np.asarray(doc["rotation"], dtype=float)
        if not is_rotation(R) and is_rotation(R, tol=1e-6):
            # serialized matrices are rounded to 9 significant digits
            R = nearest_rotation(R)
        return cls(
            rotation=R,
            translation=np.asarray(doc["translation"], dtype=float),
            dimensions=np.asarray(doc["dimensions"], dtype=float),
        )

    @property
    def volume(self) -> float:
        return float(np.prod(self.dimensions))


def _distort_normalized(x: np.ndarray, y: np.ndarray, dist: tuple[float, ...]):
    """Forward Brown-Conrady distortion on normalized coordinates."""
    k1, k2, p1, p2, k3 = dist
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return xd, yd


def _undistort_normalized(xd: float, yd: float, dist: tuple[float, ...],
                          max_iters: int = 20, tol: float = 1e-9):
    """Invert the distortion by fixed-point iteration.

    Accurate for the small distortions typical of driving cameras; raises
    if the iteration fails to reach tol within max_iters (a symptom of
    bad coefficients).
    """
    k1, k2, p1, p2, k3 = dist
    x, y = xd, yd
    for _ in range(max_iters):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        x_new = (xd - dx) / radial
        y_new = (yd - dy) / radial
        if abs(x_new - x) < tol and abs(y_new - y) < tol:
            return x_new, y_new
        x, y = x_new, y_new
    raise BadCameraError("undistortion did not converge; distortion coefficients look invalid")


def normalize_pixel(pt, cam: CameraIntrinsics) -> np.ndarray:
    """Map a pixel to the normalized image point u with u[2] == 1.

    Applies K^-1 and, when distortion coefficients are present, iterative
    undistortion so that u is an ideal-pinhole direction.
    """
    pt = np.asarray(pt, dtype=float).reshape(2)
    if not np.all(np.isfinite(pt)):
        raise ValueError(f"pixel coordinates must be finite, got {pt}")
    u = cam.K_inv @ np.array([pt[0], pt[1], 1.0])
    u = u / u[2]
    if cam.has_distortion:
        x, y = _undistort_normalized(u[0], u[1], cam.distortion)
        u = np.array([x, y, 1.0])
    u[2] = 1.0
    return u


def project(X_cam, cam: CameraIntrinsics) -> np.ndarray:
    """Project a camera-frame 3D point to pixel coordinates.

    Perspective division, then distortion (if any), then the K matrix.
    Raises ValueError for points at or behind the camera plane.
    """
    X = np.asarray(X_cam, dtype=float).reshape(3)
    if X[2] <= MIN_DEPTH:
        raise ValueError(f"point at/behind camera: Z={X[2]}")
    x, y = X[0] / X[2], X[1] / X[2]
    if cam.has_distortion:
        x, y = _distort_normalized(np.float64(x), np.float64(y), cam.distortion)
    return np.array([cam.fx * x + cam.skew * y + cam.cx, cam.fy * y + cam.cy])


# Vehicle-frame corner signs, bottom ring then top ring.  The bottom ring
# walks counterclockwise in the X-toward-Y sense starting at rear-left, so
# that corner 6 is the top-right-front corner (d_x/2, -d_y/2, d_z).
_CORNER_SIGNS = np.array(
    [
        [-1.0, +1.0, 0.0],  # 0 rear-left  bottom
        [-1.0, -1.0, 0.0],  # 1 rear-right bottom
        [+1.0, -1.0, 0.0],  # 2 front-right bottom
        [+1.0, +1.0, 0.0],  # 3 front-left  bottom
        [-1.0, +1.0, 1.0],  # 4 rear-left  top
        [-1.0, -1.0, 1.0],  # 5 rear-right top
        [+1.0, -1.0, 1.0],  # 6 front-right top
        [+1.0, +1.0, 1.0],  # 7 front-left  top
    ]
)


def cuboid_corners(pose: CuboidPose) -> np.ndarray:
    """The 8 cuboid corners in the camera frame, in a frozen order.

    Order: bottom face (rear-left, rear-right, front-right, front-left),
    then the top face in the same order.  Corner 6 is top-right-front.
    Returns an (8, 3) array.
    """
    d = pose.dimensions
    local = _CORNER_SIGNS * np.array([d[0] / 2.0, d[1] / 2.0, d[2]])
    return local @ pose.rotation.T + pose.translation


def camera_center_in_vehicle(pose: CuboidPose) -> np.ndarray:
    """Camera center expressed in vehicle coordinates: -R' t."""
    return -pose.rotation.T @ pose.translation
