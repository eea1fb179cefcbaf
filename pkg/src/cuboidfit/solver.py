"""Pose/dimension solver for compiled annotation systems.

Pipeline: extract image-line constraints -> closed-form yaw candidates ->
coordinate descent alternating a least-squares stage for (p, t) with a
PnP stage for (R, t) on the shared object-space cost

    sum_i || M_i (R A_i p + t) ||^2,   M_i = I - u_i e3'

optionally regularized by a Gaussian size prior, followed by
Levenberg-Marquardt refinement of the pixel reprojection cost with the
rotation updated on the SO(3) tangent space.

The object-space system is homogeneous in (p, t); a gauge fixes the scale:
``fix_dz_to_1`` pins the cuboid height, ``homogeneous_svd`` solves the
(p, t) subproblem on the unit sphere of p, and ``prior`` makes the system
inhomogeneous through the size prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

from .annotations import (
    Annotation,
    AnnotationLabel,
    ConstraintSystem,
    DIRECTION_LABELS,
    SYMMETRY_LABELS,
    _merge_duplicates,
    compile_constraints,
    dof_report,
    evaluate_points,
)
from .camera import CameraIntrinsics, CuboidPose, nearest_rotation as _nearest_so3

__all__ = [
    "SolverConfig",
    "SolveResult",
    "LineConstraint",
    "SolverError",
    "UnderConstrainedError",
    "CheiralityError",
    "DegenerateGeometryError",
    "extract_line_constraints",
    "init_yaw",
    "rotation_from_yaw",
    "pnp_stage",
    "ls_stage",
    "coordinate_descent",
    "pixel_finetune",
    "solve",
    "cost_3d",
    "pixel_residuals",
    "pixel_jacobian",
]

GAUGES = ("fix_dz_to_1", "homogeneous_svd", "prior")

_RANK_GAP_TOL = 1e-10
_COND_LIMIT = 1e12
_MONOTONE_SLACK = 1e-12
_LM_DAMPING_LIMIT = 1e12
_MIN_DEPTH = 1e-9


class SolverError(RuntimeError):
    pass


class UnderConstrainedError(SolverError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class CheiralityError(SolverError):
    """No solution with all observed points in front of the camera."""


class DegenerateGeometryError(SolverError):
    """Point configuration unusable (too few / collinear / ill-conditioned)."""


@dataclass(frozen=True)
class SolverConfig:
    lambda_prior: float = 1.0
    lambda_pixel: float = 1.0
    gauge: str = "fix_dz_to_1"
    max_descent_iters: int = 50
    descent_tol: float = 1e-10
    lm_max_iters: int = 100
    yaw_candidate_offsets_deg: tuple = (0.0, 10.0, -10.0, 20.0, -20.0)
    brute_force_angles: int = 36
    finetune: bool = True

    def __post_init__(self) -> None:
        if self.gauge not in GAUGES:
            raise ValueError(f"gauge must be one of {GAUGES}, got {self.gauge!r}")
        if self.lambda_prior < 0 or self.lambda_pixel < 0:
            raise ValueError("lambda_prior and lambda_pixel must be nonnegative")


@dataclass(frozen=True)
class LineConstraint:
    """An image line whose vehicle-frame direction is known and horizontal."""

    l: np.ndarray  # homogeneous pixel-space line, unit norm
    D: np.ndarray  # (1,0,0) or (0,1,0)

    def __post_init__(self) -> None:
        l = np.asarray(self.l, dtype=float).reshape(3)
        D = np.asarray(self.D, dtype=float).reshape(3)
        norm = np.linalg.norm(l)
        if norm <= 0:
            raise ValueError("degenerate line")
        if not (np.allclose(D, [1, 0, 0]) or np.allclose(D, [0, 1, 0])):
            raise ValueError(f"unsupported line direction {D}")
        object.__setattr__(self, "l", l / norm)
        object.__setattr__(self, "D", D)


@dataclass(frozen=True)
class SolveResult:
    pose: CuboidPose
    p: np.ndarray
    layout: tuple
    cost_3d: float
    cost_pixel: float
    iterations: int
    converged: bool
    per_point_residuals_px: np.ndarray
    cost_history: tuple = ()

    def to_dict(self) -> dict:
        return {
            "pose": self.pose.to_dict(),
            "p": self.p.tolist(),
            "layout": list(self.layout),
            "cost_3d": self.cost_3d,
            "cost_pixel": self.cost_pixel,
            "iterations": self.iterations,
            "converged": self.converged,
            "per_point_residuals_px": self.per_point_residuals_px.tolist(),
        }


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


# skew(e_k) for the three basis vectors; used to build rotation Jacobians.
_SKEW_BASIS = np.stack([_skew(e) for e in np.eye(3)])


def _exp_so3(omega) -> np.ndarray:
    """Rodrigues' formula; exact at the origin."""
    w = np.asarray(omega, dtype=float)
    theta = np.sqrt(w @ w)
    K = _skew(w)
    if theta < 1e-10:
        return np.eye(3) + K + 0.5 * (K @ K)
    A = np.sin(theta) / theta
    B = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + A * K + B * (K @ K)




def rotation_from_yaw(gamma: float) -> np.ndarray:
    """Vehicle-to-camera rotation for yaw gamma and zero pitch/roll.

    At gamma = 0 the vehicle axes (X fwd, Y left, Z up) align with the
    camera axes (Z, -X, -Y): a vehicle seen exactly from behind.
    """
    s, c = np.sin(gamma), np.cos(gamma)
    return np.array([[-s, -c, 0.0], [0.0, 0.0, -1.0], [c, -s, 0.0]])


# ---------------------------------------------------------------------------
# Initialization from line constraints


def extract_line_constraints(annotations, cam: CameraIntrinsics) -> list:
    """Image lines with known horizontal vehicle directions.

    Sources: same-side front+rear wheel pairs and same-axle left+right
    wheel pairs, every symmetry pair, and forward/sideways direction
    arrows.  Upward arrows tell nothing about yaw and are skipped.  Lines
    are built from undistorted pixel coordinates.
    """
    annotations = [a if isinstance(a, Annotation) else Annotation(**a) for a in annotations]
    merged = _merge_duplicates(annotations)
    K = cam.K

    def ideal_h(pt) -> np.ndarray:
        from .camera import normalize_pixel

        u = normalize_pixel(pt, cam)
        h = K @ u
        return h / h[2]

    by_label: dict = {}
    for ann in merged:
        by_label.setdefault(ann.label, []).append(ann)

    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    out: list = []

    def add_line(p1, p2, D) -> None:
        l = np.cross(ideal_h(p1), ideal_h(p2))
        if np.linalg.norm(l) < 1e-12:
            return
        out.append(LineConstraint(l=l, D=D))

    wheel_pt = {
        lab: by_label[lab][0].points[0]
        for lab in (
            AnnotationLabel.WHEEL_FRONT_LEFT,
            AnnotationLabel.WHEEL_FRONT_RIGHT,
            AnnotationLabel.WHEEL_REAR_LEFT,
            AnnotationLabel.WHEEL_REAR_RIGHT,
        )
        if lab in by_label
    }
    W = AnnotationLabel
    pairs = (
        (W.WHEEL_FRONT_LEFT, W.WHEEL_REAR_LEFT, ex),
        (W.WHEEL_FRONT_RIGHT, W.WHEEL_REAR_RIGHT, ex),
        (W.WHEEL_FRONT_LEFT, W.WHEEL_FRONT_RIGHT, ey),
        (W.WHEEL_REAR_LEFT, W.WHEEL_REAR_RIGHT, ey),
    )
    for la, lb, D in pairs:
        if la in wheel_pt and lb in wheel_pt:
            add_line(wheel_pt[la], wheel_pt[lb], D)

    for lab in SYMMETRY_LABELS:
        for ann in by_label.get(lab, ()):
            add_line(ann.points[0], ann.points[1], ey)

    for ann in by_label.get(W.DIR_FORWARD, ()):
        add_line(ann.points[0], ann.points[1], ex)
    for ann in by_label.get(W.DIR_SIDEWAYS, ()):
        add_line(ann.points[0], ann.points[1], ey)

    return out


def init_yaw(lines, cam: CameraIntrinsics,
             offsets_deg=(0.0, 10.0, -10.0, 20.0, -20.0),
             brute_force_angles: int = 36) -> list:
    """Rotation candidates for the coordinate descent.

    With line constraints: each gives a row (a_i, b_i) of
    a cos(g) + b sin(g) = 0; the null direction (last right singular
    vector) yields g and g + pi, each spread by the offset angles.
    Without lines: a uniform brute-force sweep of candidate yaws.

    The zero-pitch/roll model behind the line equations can be badly
    violated on tilted vehicles (the shared yaw then explains the lines
    poorly), so when the joint fit residual is non-negligible the sweep
    candidates are appended as insurance; the descent's candidate pruning
    discards the bad ones cheaply.
    """
    rows = []
    K = cam.K
    for line in lines:
        g = K.T @ line.l
        if line.D[0] == 1.0:
            a, b = g[2], -g[0]
        else:
            a, b = -g[0], -g[2]
        if abs(a) + abs(b) > 1e-15:
            rows.append((a, b))

    step = 2.0 * np.pi / brute_force_angles
    sweep = [rotation_from_yaw(k * step) for k in range(brute_force_angles)]
    if not rows:
        return sweep

    A = np.asarray(rows, dtype=float)
    _, _, Vt = np.linalg.svd(A, full_matrices=True)
    u, v = Vt[-1]
    base = np.arctan2(v, u)
    cands = []
    for branch in (base, base + np.pi):
        for off in offsets_deg:
            cands.append(rotation_from_yaw(branch + np.radians(off)))
    residual = np.linalg.norm(A @ Vt[-1]) / np.linalg.norm(A)
    if residual > 1e-6:
        cands.extend(sweep)
    return cands


# ---------------------------------------------------------------------------
# Shared object-space cost


def _m_stack(u: np.ndarray) -> np.ndarray:
    """(n, 3, 3) stack of M_i = I - u_i e3'."""
    n = u.shape[0]
    M = np.tile(np.eye(3), (n, 1, 1))
    M[:, :, 2] -= u
    return M


def _prior_term(p: np.ndarray, prior, lam: float) -> float:
    if prior is None or lam == 0.0:
        return 0.0
    d = p[:3] - prior.mu
    return float(lam * d @ prior.sigma_inv @ d)


def cost_3d(sys: ConstraintSystem, R: np.ndarray, t: np.ndarray, p: np.ndarray,
            prior=None, lambda_prior: float = 0.0) -> float:
    """The shared descent cost: object-space error plus optional prior."""
    Y = (sys.a_stack @ p) @ R.T + t
    res = Y - Y[:, 2:3] * sys.u_stack
    return float(np.sum(res * res)) + _prior_term(p, prior, lambda_prior)


def _depths(sys: ConstraintSystem, R: np.ndarray, t: np.ndarray, p: np.ndarray) -> np.ndarray:
    return (sys.a_stack @ p) @ R.T[:, 2] + t[2]


# ---------------------------------------------------------------------------
# PnP stage (object-space cost, fixed 3D points)


def _omega_matrix(X: np.ndarray, u: np.ndarray):
    """Quadratic form over vec(R) after eliminating t, and the t map.

    Returns (Omega, T) with cost(R) = vec(R)' Omega vec(R) and
    t*(R) = T @ vec(R).  vec is column-major.
    """
    n = X.shape[0]
    M = _m_stack(u)
    Q = np.einsum("nij,nik->jk", M, M)
    if np.linalg.cond(Q) > _COND_LIMIT:
        raise DegenerateGeometryError("translation elimination is ill-conditioned")
    # W_i = M_i (X_i' kron I3): column 3k+j holds M_i[:, j] * X_i[k].
    W = (M[:, :, None, :] * X[:, None, :, None]).reshape(n, 3, 9)
    G = np.einsum("nij,nik->jk", M, W)  # (3,9)
    T = -np.linalg.solve(Q, G)
    H = W + M @ T  # (n,3,9)
    Omega = np.einsum("nij,nik->jk", H, H)
    return 0.5 * (Omega + Omega.T), T


def _refine_rotation(R: np.ndarray, Omega: np.ndarray,
                     max_iters: int = 40, step_tol: float = 1e-13) -> np.ndarray:
    """Minimize vec(R)' Omega vec(R) over SO(3) from R (damped Gauss-Newton)."""
    mu = 0.0
    cost = _vec_cost(R, Omega)
    scale = max(np.trace(Omega) / 9.0, 1e-300)
    for _ in range(max_iters):
        J = np.stack([(R @ _SKEW_BASIS[k]).flatten(order="F") for k in range(3)], axis=1)
        OJ = Omega @ J
        g = 2.0 * (R.flatten(order="F") @ OJ)
        if np.max(np.abs(g)) < 1e-15 * scale:
            break
        Hgn = 2.0 * J.T @ OJ
        accepted = False
        for _ in range(30):
            try:
                delta = np.linalg.solve(Hgn + mu * np.eye(3), -g)
            except np.linalg.LinAlgError:
                mu = max(10.0 * mu, 1e-12 * scale)
                continue
            R_new = R @ _exp_so3(delta)
            c_new = _vec_cost(R_new, Omega)
            if c_new <= cost:
                R, cost = R_new, c_new
                mu /= 3.0
                accepted = True
                break
            mu = max(10.0 * mu, 1e-12 * scale)
            if mu > 1e10 * scale:
                break
        if not accepted or np.linalg.norm(delta) < step_tol:
            break
    return R


def _vec_cost(R: np.ndarray, Omega: np.ndarray) -> float:
    r = R.flatten(order="F")
    return float(r @ Omega @ r)


def pnp_stage(points3d, u, seed_rotations=None, eigen_seeds: bool = True,
              refine_iters: int = 40, step_tol: float = 1e-13):
    """Pose (R, t) minimizing the object-space error for fixed 3D points.

    Eliminates t in closed form, builds the 9x9 quadratic form over
    vec(R), seeds rotations from nearest-SO(3) projections of its low
    eigenvectors (plus any warm starts), refines each on the rotation
    manifold, and keeps the lowest-cost solution with all point depths
    positive.  ``eigen_seeds=False`` refines warm starts only (used inside
    the descent loop where the previous rotation is already close, with a
    reduced iteration budget).
    """
    X = np.asarray(points3d, dtype=float).reshape(-1, 3)
    U = np.asarray(u, dtype=float).reshape(-1, 3)
    n = X.shape[0]
    if n < 3:
        raise DegenerateGeometryError(f"need at least 3 points, got {n}")
    centered = X - X.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[1] <= 1e-12 * max(svals[0], 1.0):
        raise DegenerateGeometryError("3D points are collinear")

    Omega, T = _omega_matrix(X, U)
    seeds = []
    if eigen_seeds:
        _, vecs = np.linalg.eigh(Omega)
        for k in range(3):
            V = vecs[:, k].reshape(3, 3, order="F")
            seeds.append(_nearest_so3(V))
            seeds.append(_nearest_so3(-V))
    for R0 in seed_rotations or ():
        seeds.append(np.asarray(R0, dtype=float))
    if not seeds:
        raise ValueError("no rotation seeds")

    best = None
    for R0 in seeds:
        R = _refine_rotation(R0, Omega, max_iters=refine_iters, step_tol=step_tol)
        t = T @ R.flatten(order="F")
        depths = (X @ R.T[:, 2]) + t[2]
        feasible = bool(np.all(depths > _MIN_DEPTH))
        c = _vec_cost(R, Omega)
        if feasible and (best is None or c < best[0]):
            best = (c, R, t)
    if best is None:
        raise CheiralityError("no cheirality-positive PnP solution")
    return best[1], best[2]


# ---------------------------------------------------------------------------
# Least-squares stage for (p, t)


def _stacked_system(sys: ConstraintSystem, R: np.ndarray):
    """B (3n, P) and M (3n, 3) with rows M_i R A_i and M_i."""
    RA = np.einsum("ij,njk->nik", R, sys.a_stack)  # (n,3,P)
    B = RA - sys.u_stack[:, :, None] * RA[:, 2:3, :]
    M = _m_stack(sys.u_stack)
    n = len(sys)
    return B.reshape(3 * n, -1), M.reshape(3 * n, 3)


def _lstsq_checked(A: np.ndarray, b: np.ndarray, context: str, report=None) -> np.ndarray:
    """Least squares with a relative singular-value gap check."""
    x, _, _, s = np.linalg.lstsq(A, b, rcond=None)
    if s[0] <= 0 or s.size < A.shape[1] or s[-1] / s[0] < _RANK_GAP_TOL:
        raise UnderConstrainedError(f"{context}: system rank-deficient beyond the gauge", report)
    return x


def ls_stage(sys: ConstraintSystem, R: np.ndarray, prior=None, gauge: str = "fix_dz_to_1",
             lambda_prior: float = 1.0):
    """Best (p, t) for fixed rotation under the chosen gauge."""
    if gauge not in GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}")
    B, M = _stacked_system(sys, R)
    P = sys.n_params
    report = dof_report(sys, prior_active=(gauge == "prior"))

    if gauge == "fix_dz_to_1":
        A = np.hstack([B[:, :2], B[:, 3:], M])
        x = _lstsq_checked(A, -B[:, 2], "fix_dz_to_1", report)
        p = np.concatenate([x[:2], [1.0], x[2 : P - 1]])
        t = x[P - 1 :]
        return p, t

    if gauge == "homogeneous_svd":
        if B.shape[0] < P:
            raise UnderConstrainedError("homogeneous_svd: fewer equations than parameters", report)
        C = M.T @ M
        if np.linalg.cond(C) > _COND_LIMIT:
            raise DegenerateGeometryError("translation elimination is ill-conditioned")
        TM = np.linalg.solve(C, M.T @ B)  # (3, P)
        Bt = B - M @ TM
        _, s, Vt = np.linalg.svd(Bt, full_matrices=False)
        if s[0] <= 0 or s[-2] / s[0] < _RANK_GAP_TOL:
            raise UnderConstrainedError(
                "homogeneous_svd: null space larger than the scale gauge", report
            )
        p = Vt[-1]
        t = -TM @ p
        if np.median(_depths(sys, R, t, p)) < 0:
            p, t = -p, -t

        def valid(pc, tc) -> bool:
            d = pc[:3]
            lam = _depths(sys, R, tc, pc)
            return bool(
                pc[2] > 0 and np.all(d > 0)
                and np.min(d) > 0.1 * np.max(d) and np.all(lam > 0.5 * pc[2])
            )

        if valid(p, t):
            return p, t
        # The scale-free gauge admits a zero-cost collapse valley (dims
        # shrinking toward a line through the camera) that the smallest
        # singular vector follows while the rotation is still imperfect.
        # Step via the height-pinned solution projected onto the unit
        # sphere instead; once the rotation converges the SVD vector is
        # valid again and the pure homogeneous solution is returned.
        try:
            pf, tf = ls_stage(sys, R, prior=None, gauge="fix_dz_to_1")
        except SolverError:
            return p, t
        scale = 1.0 / np.linalg.norm(pf)
        return scale * pf, scale * tf

    # gauge == "prior"
    if prior is None:
        raise ValueError("gauge 'prior' requires a SizePrior")
    L = prior.chol_inv_factor()
    S = np.zeros((3, P))
    S[:, :3] = np.eye(3)
    sq = np.sqrt(lambda_prior)
    A = np.vstack([np.hstack([B, M]), np.hstack([sq * L.T @ S, np.zeros((3, 3))])])
    b = np.concatenate([np.zeros(B.shape[0]), sq * L.T @ prior.mu])
    x = _lstsq_checked(A, b, "prior", report)
    return x[:P], x[P:]


# ---------------------------------------------------------------------------
# Coordinate descent


@dataclass
class _DescentState:
    R: np.ndarray
    t: np.ndarray = field(default=None)
    p: np.ndarray = field(default=None)
    cost: float = np.inf
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    done: bool = False


def _descent_iteration(sys, st: _DescentState, config, used_prior, lam,
                       first: bool) -> None:
    """One LS stage followed by one PnP stage, with monotone acceptance.

    A stage that would increase the shared cost is rejected and marks the
    candidate converged.  The first PnP call of a candidate also tries
    the eigenvector seeds; later calls warm-start from the current R.
    """
    p, t = ls_stage(sys, st.R, prior=used_prior, gauge=config.gauge,
                    lambda_prior=config.lambda_prior)
    c_ls = cost_3d(sys, st.R, t, p, used_prior, lam)
    if c_ls > st.cost * (1.0 + _MONOTONE_SLACK):
        st.converged = st.done = True
        return
    st.p, st.t, st.cost = p, t, c_ls
    st.history.append(c_ls)

    X = evaluate_points(sys, st.p)
    if first:
        R_new, t_new = pnp_stage(X, sys.u_stack, seed_rotations=[st.R], eigen_seeds=True)
    else:
        R_new, t_new = pnp_stage(X, sys.u_stack, seed_rotations=[st.R],
                                 eigen_seeds=False, refine_iters=6, step_tol=1e-10)
    c_pnp = cost_3d(sys, R_new, t_new, st.p, used_prior, lam)
    if c_pnp > st.cost * (1.0 + _MONOTONE_SLACK):
        st.converged = st.done = True
        return
    st.R, st.t, st.cost = R_new, t_new, c_pnp
    st.history.append(c_pnp)
    st.iterations += 1

    if st.cost < 1e-30:
        st.converged = st.done = True
    elif len(st.history) >= 3:
        prev = st.history[-3]
        if prev - st.cost <= config.descent_tol * max(prev, 1e-30):
            st.converged = st.done = True


# Slack factor on the physical bounds of auxiliary values (annotators can
# click slightly outside the ideal face).
_AUX_SLACK = 1.10


def _aux_plausible(layout_names, p: np.ndarray) -> bool:
    """Auxiliary values consistent with their labels' physical meaning.

    Wheels sit under the footprint, symmetry points within the face they
    were clicked on, centerline/edge heights within the body.  Direction
    arrows may be drawn on the ground beside the vehicle and are exempt.
    Bounds are ratios of the dimensions, hence gauge-invariant.
    """
    dx, dy, dz = p[0], p[1], p[2]
    for name, v in zip(layout_names, p):
        if name in ("d_x", "d_y", "d_z"):
            continue
        if name in ("X_wf", "X_wr"):
            if abs(v) > 0.5 * _AUX_SLACK * dx:
                return False
            continue
        label, _, coord = name.rpartition(".")
        if label.startswith("dir-"):
            continue
        if coord == "Z" and not (-0.1 * dz <= v <= _AUX_SLACK * dz):
            return False
        if coord == "Y" and abs(v) > 0.5 * _AUX_SLACK * dy:
            return False
        if coord == "X" and abs(v) > 0.5 * _AUX_SLACK * dx:
            return False
    return True


def _state_tier(sys, R, t, p) -> int:
    """0: fully plausible; 1: satisfies the hard constraints; 2: invalid.

    The hard constraints are the result invariants (positive dimensions,
    positive depths, non-collapsed box); full plausibility adds the
    per-label auxiliary bounds and a depth margin, and is used to rank
    candidates so spurious zero-cost basins never outrank honest ones.
    """
    d = p[:3]
    if not np.all(d > 0) or np.min(d) < 1e-2 * np.max(d):
        return 2
    depths = _depths(sys, R, t, p)
    if not np.all(depths > _MIN_DEPTH):
        return 2
    # Zero-cost collapses put every point at the camera center; demand
    # depths that are meaningful relative to the box height.
    if np.all(depths > 0.5 * d[2]) and _aux_plausible(sys.layout.names, p):
        return 0
    return 1


def _state_plausible(sys, R, t, p) -> bool:
    return _state_tier(sys, R, t, p) == 0


def _check_feasible(sys, st: _DescentState) -> None:
    if st.p is None:
        raise CheiralityError("candidate produced no feasible state")
    if _state_tier(sys, st.R, st.t, st.p) > 1:
        raise CheiralityError("candidate violates cheirality or collapsed")


def coordinate_descent(sys: ConstraintSystem, config: SolverConfig, prior=None,
                       init_candidates=None) -> SolveResult:
    """Alternate the LS and PnP stages from every candidate; keep the best.

    Accepted stages never increase the shared cost (increases are rejected
    and stop that candidate).  Candidates whose first-iteration cost
    exceeds 100x the best seen are dropped early.
    """
    if config.gauge == "prior" and prior is None:
        raise ValueError("gauge 'prior' requires a SizePrior")
    report = dof_report(sys, prior_active=(config.gauge == "prior"))
    if report.status == "under-constrained":
        raise UnderConstrainedError(
            f"annotations provide {report.dof_available} of {report.dof_needed} needed DoF",
            report,
        )
    candidates = list(init_candidates or ())
    if not candidates:
        raise ValueError("need at least one rotation candidate")

    lam = config.lambda_prior if config.gauge == "prior" else 0.0
    used_prior = prior if config.gauge == "prior" else None
    # Eigenvector PnP seeds help the first iteration escape a bad basin,
    # but with the dense angle sweep the basins are already covered and
    # warm starts are much cheaper.
    eigen_ok = len(candidates) <= 2 * len(config.yaw_candidate_offsets_deg)

    def advance(st: _DescentState, upto: int) -> None:
        while not st.done and st.iterations < upto:
            try:
                _descent_iteration(sys, st, config, used_prior, lam,
                                   first=(st.iterations == 0 and eigen_ok))
            except UnderConstrainedError:
                raise
            except SolverError:
                st.done = True

    # Probe: rank candidates by the cost of their first LS stage alone and
    # apply the 100x prune before spending PnP work on hopeless ones.
    # Implausible probe states (mirrors, collapses) can have spuriously low
    # costs; they may stay in the race but must not set the prune baseline.
    probes: list = []
    plausible_costs: list = []
    for R0 in candidates:
        R0 = np.asarray(R0, dtype=float)
        try:
            p, t = ls_stage(sys, R0, prior=used_prior, gauge=config.gauge,
                            lambda_prior=config.lambda_prior)
        except UnderConstrainedError:
            raise
        except SolverError:
            continue
        c = cost_3d(sys, R0, t, p, used_prior, lam)
        probes.append((c, R0))
        if _state_plausible(sys, R0, t, p):
            plausible_costs.append(c)
    if not probes:
        raise CheiralityError("all rotation candidates failed at the probe stage")
    best_first = min(plausible_costs) if plausible_costs else min(c for c, _ in probes)

    # Tournament: give survivors a short budget, then run only the leaders
    # to full depth.  The final pick is the minimum-cost feasible state.
    states: list = []
    for c, R0 in probes:
        if c > 100.0 * best_first:
            continue
        st = _DescentState(R=R0)
        try:
            _descent_iteration(sys, st, config, used_prior, lam, first=eigen_ok)
        except UnderConstrainedError:
            raise
        except SolverError:
            continue
        if st.p is not None:
            states.append(st)
    if not states:
        raise CheiralityError("all rotation candidates failed on the first iteration")

    # Beam narrowing: rank after each stage, advance only the leaders.
    # Implausible states (mirror dimensions, collapses, out-of-body
    # auxiliaries) rank behind honest ones regardless of cost.
    def tier(st: _DescentState) -> int:
        return _state_tier(sys, st.R, st.t, st.p)

    def rank(states_: list) -> list:
        return sorted(states_, key=lambda s: (tier(s), s.cost))

    survivors = states
    for width, upto in ((12, 3), (6, min(5, config.max_descent_iters)), (3, config.max_descent_iters)):
        survivors = rank(survivors)
        for st in survivors[:width]:
            advance(st, upto)

    if not any(tier(st) == 0 for st in survivors):
        # Rare: the leaders all collapsed.  Finish the remaining states
        # before giving up; half-converged ones may just need iterations.
        for st in survivors:
            advance(st, config.max_descent_iters)

    best = None
    for st in rank(survivors):
        if tier(st) <= 1:
            best = st
            break
    if best is None:
        raise CheiralityError("all rotation candidates failed cheirality")
    return _make_result(sys, best, config, prior)


def _make_result(sys, st: _DescentState, config: SolverConfig, prior) -> SolveResult:
    used_prior = prior if config.gauge == "prior" else None
    lam = config.lambda_prior if config.gauge == "prior" else 0.0
    res_px = pixel_residuals(sys, sys.cam, st.R, st.t, st.p).reshape(-1, 2)
    cost_px = float(np.sum(res_px * res_px)) + _prior_term(
        st.p, used_prior, config.lambda_pixel if used_prior is not None else 0.0
    )
    pose = CuboidPose(rotation=st.R, translation=st.t, dimensions=st.p[:3])
    return SolveResult(
        pose=pose,
        p=st.p.copy(),
        layout=tuple(sys.layout.names),
        cost_3d=cost_3d(sys, st.R, st.t, st.p, used_prior, lam),
        cost_pixel=cost_px,
        iterations=st.iterations,
        converged=st.converged,
        per_point_residuals_px=np.linalg.norm(res_px, axis=1),
        cost_history=tuple(st.history),
    )


# ---------------------------------------------------------------------------
# Pixel-domain fine-tuning


def pixel_residuals(sys: ConstraintSystem, cam: CameraIntrinsics, R, t, p,
                    prior=None, lambda_pixel: float = 0.0) -> np.ndarray:
    """Stacked residual vector of the pixel-domain cost.

    Data rows x_i - K_:2 (X/Z, Y/Z, 1)' in undistorted pixel coordinates,
    then sqrt(lambda_p) L' (d - mu) prior rows when a prior is active.
    """
    K2 = cam.K[:2]
    Y = (sys.a_stack @ p) @ np.asarray(R, dtype=float).T + t
    if np.any(Y[:, 2] <= _MIN_DEPTH):
        raise CheiralityError("point at/behind camera during pixel refinement")
    h = np.concatenate([Y[:, :2] / Y[:, 2:3], np.ones((Y.shape[0], 1))], axis=1)
    res = sys.pixels_ideal - h @ K2.T
    parts = [res.reshape(-1)]
    if prior is not None and lambda_pixel > 0:
        L = prior.chol_inv_factor()
        parts.append(np.sqrt(lambda_pixel) * (L.T @ (np.asarray(p)[:3] - prior.mu)))
    return np.concatenate(parts)


def pixel_jacobian(sys: ConstraintSystem, cam: CameraIntrinsics, R, t, p,
                   prior=None, lambda_pixel: float = 0.0) -> np.ndarray:
    """Analytic Jacobian of pixel_residuals w.r.t. (omega, t, p).

    The rotation block is the right tangent: R <- R @ exp([omega]x).
    Column order: omega (3), t (3), p (P).
    """
    R = np.asarray(R, dtype=float)
    p = np.asarray(p, dtype=float)
    K2 = cam.K[:2]
    P = sys.n_params
    X = sys.a_stack @ p  # (n,3) vehicle-frame points
    Y = X @ R.T + t
    n = len(sys)
    n_rows = 2 * n + (3 if prior is not None and lambda_pixel > 0 else 0)
    J = np.zeros((n_rows, 6 + P))
    for i in range(n):
        Z = Y[i, 2]
        dh = np.array(
            [[1.0 / Z, 0.0, -Y[i, 0] / Z**2],
             [0.0, 1.0 / Z, -Y[i, 1] / Z**2],
             [0.0, 0.0, 0.0]]
        )
        dproj = K2 @ dh  # (2,3)
        dy_domega = -R @ _skew(X[i])
        dy_dp = R @ sys.a_stack[i]
        block = np.hstack([dy_domega, np.eye(3), dy_dp])  # (3, 6+P)
        J[2 * i : 2 * i + 2] = -dproj @ block
    if prior is not None and lambda_pixel > 0:
        L = prior.chol_inv_factor()
        J[2 * n :, 6 : 9] = np.sqrt(lambda_pixel) * L.T
    return J


def pixel_finetune(sys: ConstraintSystem, cam: CameraIntrinsics, start: SolveResult,
                   prior=None, config: SolverConfig | None = None) -> SolveResult:
    """Levenberg-Marquardt refinement of the pixel reprojection cost.

    Rotation steps live in the SO(3) tangent space (right multiplication
    by exp).  Without a prior the data term is scale-invariant, so the
    radial direction of p is projected out of every step, freezing |p| at
    its incoming value.  Divergence (damping beyond 1e12) returns the
    start unchanged with converged=False.
    """
    config = config or SolverConfig()
    lam_p = config.lambda_pixel if prior is not None else 0.0
    R = start.pose.rotation.copy()
    t = start.pose.translation.copy()
    p = start.p.copy()

    def total_cost(R_, t_, p_) -> float:
        r = pixel_residuals(sys, cam, R_, t_, p_, prior, lam_p)
        return float(r @ r)

    cost = total_cost(R, t, p)
    r = pixel_residuals(sys, cam, R, t, p, prior, lam_p)
    J = pixel_jacobian(sys, cam, R, t, p, prior, lam_p)
    n_par = J.shape[1]
    mu = 1e-3 * np.trace(J.T @ J) / n_par
    converged = False
    gauge_free = prior is None or lam_p == 0.0
    p_norm0 = np.linalg.norm(p)
    x_scale = 1.0 + np.linalg.norm(t) + p_norm0

    for _ in range(config.lm_max_iters):
        if cost < 1e-22:
            converged = True
            break
        g = J.T @ r
        H = J.T @ J
        mean_diag = np.trace(H) / n_par
        accepted = False
        while mu <= _LM_DAMPING_LIMIT:
            try:
                delta = np.linalg.solve(H + mu * np.eye(n_par), -g)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            if gauge_free:
                # Slide along the scale null direction (0, t, p) until the
                # step is orthogonal to p: keeps |p| frozen to first order
                # without distorting the Gauss-Newton direction.
                alpha = -(delta[6:] @ p) / (p @ p)
                delta[3:6] += alpha * t
                delta[6:] += alpha * p
            R_new = R @ _exp_so3(delta[:3])
            t_new = t + delta[3:6]
            p_new = p + delta[6:]
            if gauge_free:
                # The projection freezes |p| only to first order; rescaling
                # along the exact (cost-invariant) scale family removes the
                # second-order drift.
                s = p_norm0 / np.linalg.norm(p_new)
                p_new = s * p_new
                t_new = s * t_new
            try:
                c_new = total_cost(R_new, t_new, p_new)
            except (CheiralityError, FloatingPointError):
                c_new = np.inf
            if c_new <= cost * (1.0 + 1e-15):
                rel_drop = (cost - c_new) / max(cost, 1e-300)
                R, t, p, cost = R_new, t_new, p_new, c_new
                mu = max(mu / 3.0, 1e-16)
                accepted = True
                # Trust tiny steps as convergence only when lightly damped,
                # otherwise they just reflect a large mu.
                if mu <= 1e-2 * mean_diag and (
                    rel_drop < 1e-13 or np.linalg.norm(delta) < 1e-13 * x_scale
                ):
                    converged = True
                break
            mu *= 10.0
        if not accepted:
            return replace(start, converged=False)
        if converged:
            break
        r = pixel_residuals(sys, cam, R, t, p, prior, lam_p)
        J = pixel_jacobian(sys, cam, R, t, p, prior, lam_p)
    else:
        converged = True  # budget exhausted while still improving

    if not np.all(p[:3] > 0):
        return replace(start, converged=False)
    res_px = pixel_residuals(sys, cam, R, t, p)  # data rows only
    res_px = res_px.reshape(-1, 2)
    lam3d = config.lambda_prior if prior is not None and config.gauge == "prior" else 0.0
    used_prior = prior if lam3d > 0 else None
    return SolveResult(
        pose=CuboidPose(rotation=R, translation=t, dimensions=p[:3]),
        p=p,
        layout=start.layout,
        cost_3d=cost_3d(sys, R, t, p, used_prior, lam3d),
        cost_pixel=cost,
        iterations=start.iterations,
        converged=converged,
        per_point_residuals_px=np.linalg.norm(res_px, axis=1),
        cost_history=start.cost_history,
    )


# ---------------------------------------------------------------------------
# End-to-end solve


def _apply_feature_scale(sys, result: SolveResult, feature_scale: dict,
                         cam: CameraIntrinsics, config, prior) -> SolveResult:
    """Similarity rescale of (p, t) so a named feature has a known length."""
    la, lb = (AnnotationLabel(x) for x in feature_scale["label_pair"])
    length_m = float(feature_scale["length_m"])
    if length_m <= 0:
        raise ValueError("feature_scale length must be positive")
    X = evaluate_points(sys, result.p)
    rows_a = [i for i, row in enumerate(sys.rows) if row.label == la]
    rows_b = [i for i, row in enumerate(sys.rows) if row.label == lb]
    if not rows_a or not rows_b:
        raise ValueError(f"feature_scale labels not found among annotations: {la.value}, {lb.value}")
    if la == lb:
        if len(rows_a) < 2:
            raise ValueError(f"feature_scale with a single label needs a two-point annotation: {la.value}")
        i, j = rows_a[0], rows_a[1]
    else:
        i, j = rows_a[0], rows_b[0]
    current = float(np.linalg.norm(X[i] - X[j]))
    if current <= 0:
        raise ValueError("feature has zero length at the current solution")
    s = length_m / current
    p = s * result.p
    t = s * result.pose.translation
    R = result.pose.rotation
    lam3d = config.lambda_prior if prior is not None and config.gauge == "prior" else 0.0
    used_prior = prior if lam3d > 0 else None
    res_px = pixel_residuals(sys, cam, R, t, p).reshape(-1, 2)
    return replace(
        result,
        pose=CuboidPose(rotation=R, translation=t, dimensions=p[:3]),
        p=p,
        cost_3d=cost_3d(sys, R, t, p, used_prior, lam3d),
        per_point_residuals_px=np.linalg.norm(res_px, axis=1),
    )


def solve(annotations, cam: CameraIntrinsics, prototype_class=None,
          config: SolverConfig | None = None, priors=None, prior=None,
          feature_scale=None) -> SolveResult:
    """Full pipeline: compile, init yaw, coordinate descent, pixel refine.

    ``prior`` overrides table lookup; otherwise, with gauge 'prior', the
    prototype class is looked up in ``priors`` (defaults to the bundled
    table, with the generic fallback for unknown classes).
    """
    config = config or SolverConfig()
    sys = compile_constraints(annotations, cam)
    if prior is None and config.gauge == "prior":
        if priors is None:
            from .priors import PriorTable

            priors = PriorTable.default()
        prior = priors.lookup(prototype_class) if prototype_class else priors.lookup(None)
    lines = extract_line_constraints(annotations, cam)
    candidates = init_yaw(
        lines, cam,
        offsets_deg=config.yaw_candidate_offsets_deg,
        brute_force_angles=config.brute_force_angles,
    )
    result = coordinate_descent(sys, config, prior=prior, init_candidates=candidates)
    if config.finetune:
        result = pixel_finetune(sys, cam, result, prior=prior, config=config)
    if feature_scale:
        result = _apply_feature_scale(sys, result, feature_scale, cam, config, prior)
    return result
