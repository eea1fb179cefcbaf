"""Annotation taxonomy and compilation into a parameterized linear system.

Every labeled 2D click corresponds to a vehicle-frame 3D point that is a
linear function X_i = A_i @ p of the parameter vector p.  p always starts
with the cuboid dimensions (d_x, d_y, d_z); wheel annotations share one
axle X-coordinate slot per axle (X_wf front, X_wr rear); other labels add
their own auxiliary slots.

Point forms per label (vehicle frame: X forward, Y left, Z up):

* wheels           (X_axle, +-d_y/2, 0)           shared axle slot
* center-front     (+d_x/2, 0, Z)                 aux Z
* center-back      (-d_x/2, 0, Z)                 aux Z
* center-top       (X, 0, d_z)                    aux X
* vertical edges   (+-d_x/2, +-d_y/2, Z)          aux Z
* top corners      (+-d_x/2, +-d_y/2, d_z)        no aux
* symmetry pairs   left (.., +Y, ..), right (.., -Y, ..), shared aux
* dir-forward      tail (X, Y, Z), tip (X + d_x, Y, Z), aux X, Y, Z
* dir-sideways     tail (X, Y, Z), tip (X, Y + d_y, Z)
* dir-upward       tail (X, Y, Z), tip (X, Y, Z + d_z)

Direction arrows span a full cuboid dimension so that the two endpoints
stay linear in p; the alternative of pinning the arrow to the ground
plane degenerates when the camera-arrow plane is nearly horizontal.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .camera import CameraIntrinsics, normalize_pixel

__all__ = [
    "AnnotationLabel",
    "Annotation",
    "ParamLayout",
    "ConstraintRow",
    "ConstraintSystem",
    "DofReport",
    "CompileError",
    "compile_constraints",
    "dof_report",
    "evaluate_points",
    "DOF_NEEDED_UP_TO_SCALE",
    "DOF_NEEDED_METRIC",
]

# Pose + dimensions up to scale; +1 when a prior must also fix metric scale.
DOF_NEEDED_UP_TO_SCALE = 8
DOF_NEEDED_METRIC = 9

# A size prior contributes three soft rows on the dimensions, so a counting
# deficit of at most 3 can still be bridged by enabling one.
PRIOR_BRIDGEABLE_DOF = 3


class CompileError(ValueError):
    """Invalid annotation set (bad arity, duplicate corner, empty input)."""


class AnnotationLabel(str, Enum):
    WHEEL_FRONT_LEFT = "wheel-front-left"
    WHEEL_FRONT_RIGHT = "wheel-front-right"
    WHEEL_REAR_LEFT = "wheel-rear-left"
    WHEEL_REAR_RIGHT = "wheel-rear-right"
    CENTER_FRONT = "center-front"
    CENTER_BACK = "center-back"
    CENTER_TOP = "center-top"
    EDGE_REAR_LEFT = "edge-rear-left"
    EDGE_REAR_RIGHT = "edge-rear-right"
    EDGE_FRONT_LEFT = "edge-front-left"
    EDGE_FRONT_RIGHT = "edge-front-right"
    CORNER_TOP_REAR_LEFT = "corner-top-rear-left"
    CORNER_TOP_REAR_RIGHT = "corner-top-rear-right"
    CORNER_TOP_FRONT_LEFT = "corner-top-front-left"
    CORNER_TOP_FRONT_RIGHT = "corner-top-front-right"
    SYMMETRY_FRONT = "symmetry-front"
    SYMMETRY_BACK = "symmetry-back"
    SYMMETRY_ROOF = "symmetry-roof"
    DIR_FORWARD = "dir-forward"
    DIR_UPWARD = "dir-upward"
    DIR_SIDEWAYS = "dir-sideways"


WHEEL_LABELS = frozenset(
    {
        AnnotationLabel.WHEEL_FRONT_LEFT,
        AnnotationLabel.WHEEL_FRONT_RIGHT,
        AnnotationLabel.WHEEL_REAR_LEFT,
        AnnotationLabel.WHEEL_REAR_RIGHT,
    }
)
CORNER_LABELS = frozenset(
    {
        AnnotationLabel.CORNER_TOP_REAR_LEFT,
        AnnotationLabel.CORNER_TOP_REAR_RIGHT,
        AnnotationLabel.CORNER_TOP_FRONT_LEFT,
        AnnotationLabel.CORNER_TOP_FRONT_RIGHT,
    }
)
SYMMETRY_LABELS = frozenset(
    {
        AnnotationLabel.SYMMETRY_FRONT,
        AnnotationLabel.SYMMETRY_BACK,
        AnnotationLabel.SYMMETRY_ROOF,
    }
)
DIRECTION_LABELS = frozenset(
    {
        AnnotationLabel.DIR_FORWARD,
        AnnotationLabel.DIR_UPWARD,
        AnnotationLabel.DIR_SIDEWAYS,
    }
)

TWO_POINT_LABELS = SYMMETRY_LABELS | DIRECTION_LABELS


def label_arity(label: AnnotationLabel) -> int:
    return 2 if label in TWO_POINT_LABELS else 1


@dataclass(frozen=True)
class Annotation:
    """One labeled observation: 1 pixel point, or 2 for symmetry/direction.

    Symmetry pairs are ordered [left, right]; direction arrows [tail, tip].
    """

    label: AnnotationLabel
    points: tuple

    def __post_init__(self) -> None:
        label = AnnotationLabel(self.label)
        pts = tuple(np.asarray(p, dtype=float).reshape(2) for p in self.points)
        if len(pts) != label_arity(label):
            raise CompileError(
                f"label {label.value} takes {label_arity(label)} point(s), got {len(pts)}"
            )
        for p in pts:
            if not np.all(np.isfinite(p)):
                raise CompileError(f"non-finite pixel coordinates in {label.value}: {p}")
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class ParamLayout:
    """Slot order of the parameter vector p: d_x, d_y, d_z, then auxiliaries."""

    names: tuple

    def __post_init__(self) -> None:
        if tuple(self.names[:3]) != ("d_x", "d_y", "d_z"):
            raise ValueError("layout must start with d_x, d_y, d_z")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate slot names in layout")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class ConstraintRow:
    """One observed point: its mixing matrix, ray, and bookkeeping."""

    a_matrix: np.ndarray      # (3, P): vehicle point = a_matrix @ p
    u: np.ndarray             # (3,) normalized ray, u[2] == 1
    pixel: np.ndarray         # (2,) raw annotated pixel
    pixel_ideal: np.ndarray   # (2,) undistorted pixel K @ u
    annotation_index: int
    label: AnnotationLabel


@dataclass(frozen=True)
class ConstraintSystem:
    rows: tuple
    layout: ParamLayout
    net_dof: int
    cam: CameraIntrinsics

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def n_params(self) -> int:
        return len(self.layout)

    @property
    def a_stack(self) -> np.ndarray:
        """(n, 3, P) stack of the mixing matrices."""
        return np.stack([r.a_matrix for r in self.rows])

    @property
    def u_stack(self) -> np.ndarray:
        """(n, 3) stack of normalized rays."""
        return np.stack([r.u for r in self.rows])

    @property
    def pixels_ideal(self) -> np.ndarray:
        """(n, 2) undistorted pixel coordinates of every observation."""
        return np.stack([r.pixel_ideal for r in self.rows])


@dataclass(frozen=True)
class DofReport:
    dof_available: int
    dof_needed: int
    status: str  # solvable | gauge-only-deficient | under-constrained

    def to_dict(self) -> dict:
        return {
            "dof_available": self.dof_available,
            "dof_needed": self.dof_needed,
            "status": self.status,
        }


class _LayoutBuilder:
    def __init__(self) -> None:
        self.names: list[str] = ["d_x", "d_y", "d_z"]

    def slot(self, name: str) -> int:
        """Index of name, allocating it on first use."""
        try:
            return self.names.index(name)
        except ValueError:
            self.names.append(name)
            return len(self.names) - 1


def _symbolic_points(ann: Annotation, index: int, layout: _LayoutBuilder):
    """Linear forms of the annotation's vehicle-frame point(s).

    Returns one dict {slot_name: coeff} per coordinate per point.
    """
    lab = ann.label
    tag = f"{lab.value}_{index}"
    half = 0.5

    if lab in WHEEL_LABELS:
        axle = "X_wf" if "front" in lab.value else "X_wr"
        side = half if lab.value.endswith("left") else -half
        layout.slot(axle)
        return [[{axle: 1.0}, {"d_y": side}, {}]]

    if lab == AnnotationLabel.CENTER_FRONT:
        layout.slot(f"{tag}.Z")
        return [[{"d_x": half}, {}, {f"{tag}.Z": 1.0}]]
    if lab == AnnotationLabel.CENTER_BACK:
        layout.slot(f"{tag}.Z")
        return [[{"d_x": -half}, {}, {f"{tag}.Z": 1.0}]]
    if lab == AnnotationLabel.CENTER_TOP:
        layout.slot(f"{tag}.X")
        return [[{f"{tag}.X": 1.0}, {}, {"d_z": 1.0}]]

    if lab in (AnnotationLabel.EDGE_REAR_LEFT, AnnotationLabel.EDGE_REAR_RIGHT,
               AnnotationLabel.EDGE_FRONT_LEFT, AnnotationLabel.EDGE_FRONT_RIGHT):
        sx = half if "front" in lab.value else -half
        sy = half if lab.value.endswith("left") else -half
        layout.slot(f"{tag}.Z")
        return [[{"d_x": sx}, {"d_y": sy}, {f"{tag}.Z": 1.0}]]

    if lab in CORNER_LABELS:
        sx = half if "front" in lab.value else -half
        sy = half if lab.value.endswith("left") else -half
        return [[{"d_x": sx}, {"d_y": sy}, {"d_z": 1.0}]]

    if lab in SYMMETRY_LABELS:
        ys, zs = f"{tag}.Y", f"{tag}.Z"
        layout.slot(ys)
        if lab == AnnotationLabel.SYMMETRY_ROOF:
            xs = f"{tag}.X"
            layout.slot(xs)
            left = [{xs: 1.0}, {ys: 1.0}, {"d_z": 1.0}]
            right = [{xs: 1.0}, {ys: -1.0}, {"d_z": 1.0}]
        else:
            sx = half if lab == AnnotationLabel.SYMMETRY_FRONT else -half
            layout.slot(zs)
            left = [{"d_x": sx}, {ys: 1.0}, {zs: 1.0}]
            right = [{"d_x": sx}, {ys: -1.0}, {zs: 1.0}]
        return [left, right]

    if lab in DIRECTION_LABELS:
        xs, ys, zs = f"{tag}.X", f"{tag}.Y", f"{tag}.Z"
        for s in (xs, ys, zs):
            layout.slot(s)
        tail = [{xs: 1.0}, {ys: 1.0}, {zs: 1.0}]
        tip = [dict(c) for c in tail]
        if lab == AnnotationLabel.DIR_FORWARD:
            tip[0]["d_x"] = 1.0
        elif lab == AnnotationLabel.DIR_SIDEWAYS:
            tip[1]["d_y"] = 1.0
        else:
            tip[2]["d_z"] = 1.0
        return [tail, tip]

    raise CompileError(f"unhandled label {lab}")  # pragma: no cover


def _merge_duplicates(annotations) -> list[Annotation]:
    """Resolve repeated labels.

    Wheel and symmetry repeats denote the same physical feature and are
    averaged in pixel space; repeated corners conflict and are rejected;
    centerline / edge / direction repeats are independent observations
    (each carries its own auxiliaries) and pass through unchanged.
    """
    groups: dict[AnnotationLabel, list[Annotation]] = {}
    seen_corners: set = set()
    order: list = []  # (kind, payload) preserving first-occurrence order
    for ann in annotations:
        if ann.label in WHEEL_LABELS or ann.label in SYMMETRY_LABELS:
            if ann.label not in groups:
                order.append(("group", ann.label))
            groups.setdefault(ann.label, []).append(ann)
        else:
            if ann.label in CORNER_LABELS:
                if ann.label in seen_corners:
                    raise CompileError(f"duplicate corner label {ann.label.value}")
                seen_corners.add(ann.label)
            order.append(("single", ann))
    merged: list[Annotation] = []
    for kind, payload in order:
        if kind == "single":
            merged.append(payload)
        else:
            group = groups[payload]
            pts = tuple(
                np.mean([np.asarray(a.points[k]) for a in group], axis=0)
                for k in range(label_arity(payload))
            )
            merged.append(Annotation(label=payload, points=pts))
    return merged


def compile_constraints(annotations, cam: CameraIntrinsics) -> ConstraintSystem:
    """Compile annotations into rows X_i = A_i @ p with normalized rays."""
    annotations = [a if isinstance(a, Annotation) else Annotation(**a) for a in annotations]
    if not annotations:
        raise CompileError("no annotations")
    annotations = _merge_duplicates(annotations)

    layout = _LayoutBuilder()
    pending = []  # (annotation_index, point, symbolic coords)
    for idx, ann in enumerate(annotations):
        forms = _symbolic_points(ann, idx, layout)
        for pt, coords in zip(ann.points, forms):
            pending.append((idx, ann.label, pt, coords))

    P = len(layout.names)
    slot_index = {name: i for i, name in enumerate(layout.names)}
    K = cam.K

    rows = []
    for idx, label, pt, coords in pending:
        A = np.zeros((3, P))
        for axis, form in enumerate(coords):
            for name, coeff in form.items():
                A[axis, slot_index[name]] = coeff
        u = normalize_pixel(pt, cam)
        pixel_ideal = (K @ u)[:2]
        rows.append(
            ConstraintRow(
                a_matrix=A,
                u=u,
                pixel=np.asarray(pt, dtype=float),
                pixel_ideal=pixel_ideal,
                annotation_index=idx,
                label=label,
            )
        )

    n_aux = P - 3
    net_dof = 2 * len(rows) - n_aux
    return ConstraintSystem(
        rows=tuple(rows), layout=ParamLayout(tuple(layout.names)), net_dof=net_dof, cam=cam
    )


def dof_report(sys: ConstraintSystem, prior_active: bool = False) -> DofReport:
    """Soft solvability verdict for UIs; never raises.

    Needs 8 net constraints for the up-to-scale problem, 9 when a prior
    must also pin metric scale.  A deficit of at most 3 is bridgeable by
    a size prior's three soft dimension rows and is reported as
    gauge-only-deficient; larger deficits are under-constrained.
    """
    needed = DOF_NEEDED_METRIC if prior_active else DOF_NEEDED_UP_TO_SCALE
    deficit = needed - sys.net_dof
    if deficit <= 0:
        status = "solvable"
    elif deficit <= PRIOR_BRIDGEABLE_DOF:
        status = "gauge-only-deficient"
    else:
        status = "under-constrained"
    return DofReport(dof_available=sys.net_dof, dof_needed=needed, status=status)


def evaluate_points(sys: ConstraintSystem, p: np.ndarray) -> np.ndarray:
    """Vehicle-frame points A_i @ p for every row; returns (n, 3)."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != sys.n_params:
        raise ValueError(f"parameter vector has length {p.shape[0]}, layout needs {sys.n_params}")
    return sys.a_stack @ p
