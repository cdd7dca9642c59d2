"""Projective camera geometry.

Conventions used throughout the package:

* World and camera coordinates are in millimetres, images in pixels.
* A camera maps a world point X to camera coordinates Xc = R @ X + t,
  so rows of R are the camera axes expressed in the world frame and the
  camera centre is C = -R.T @ t.  Pixels follow x right, y down, z forward.
* Projection is x ~ K @ (R @ X + t) with K upper triangular, K[2, 2] = 1.
* A relative pose (R, t) maps reference-camera coordinates to target-camera
  coordinates: X_tgt = R @ X_ref + t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CheiralityAmbiguous,
    DegenerateConfiguration,
    DegenerateGeometry,
    InsufficientViews,
    LengthMismatch,
    PointBehindCamera,
    ZeroNorm,
)

# Points closer than this (mm) to the principal plane count as behind.
EPS_DEPTH = 1e-6
# Trailing singular value ratio marking a rank-deficient DLT system.
DLT_DEGENERACY_RATIO = 1e-8
# Absolute 8th singular value of the normalized design marking a
# correspondence set that does not determine F.
EIGHT_POINT_RANK_TOL = 1e-10
# Norm below which a quaternion sum cannot be renormalized.
QUAT_ZERO_NORM = 1e-12


@dataclass(frozen=True)
class Camera:
    """Finite projective camera with intrinsics K and extrinsics (R, t)."""

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=np.float64)
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if K.shape != (3, 3) or R.shape != (3, 3):
            raise ValueError("intrinsics and rotation must be 3x3")
        if np.any(np.abs(K[np.tril_indices(3, -1)]) > 1e-9) or np.any(np.diag(K) <= 0):
            raise ValueError("intrinsics must be upper triangular with positive diagonal")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or np.linalg.det(R) < 0:
            raise ValueError("rotation must be in SO(3)")
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def matrix(self) -> np.ndarray:
        """3x4 projection matrix K @ [R | t]."""
        return self.intrinsics @ np.hstack([self.rotation, self.translation[:, None]])

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion (w, x, y, z).  Hemisphere is not canonicalized:
    q and -q describe the same rotation; consumers align signs by dot
    product where it matters."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {n} is not 1 within 1e-9")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def from_array(q) -> "Quaternion":
        q = np.asarray(q, dtype=np.float64).reshape(4)
        n = np.linalg.norm(q)
        if n < QUAT_ZERO_NORM:
            raise ZeroNorm("cannot normalize a zero quaternion")
        q = q / n
        return Quaternion(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @staticmethod
    def from_matrix(R) -> "Quaternion":
        """Convert a rotation matrix, picking the numerically largest
        component first (stable for all rotation angles)."""
        R = np.asarray(R, dtype=np.float64)
        tr = R[0, 0] + R[1, 1] + R[2, 2]
        cand = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
        i = int(np.argmax(cand))
        if i == 0:
            s = np.sqrt(tr + 1.0) * 2.0
            q = np.array([0.25 * s,
                          (R[2, 1] - R[1, 2]) / s,
                          (R[0, 2] - R[2, 0]) / s,
                          (R[1, 0] - R[0, 1]) / s])
        elif i == 1:
            s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            q = np.array([(R[2, 1] - R[1, 2]) / s,
                          0.25 * s,
                          (R[0, 1] + R[1, 0]) / s,
                          (R[0, 2] + R[2, 0]) / s])
        elif i == 2:
            s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
            q = np.array([(R[0, 2] - R[2, 0]) / s,
                          (R[0, 1] + R[1, 0]) / s,
                          0.25 * s,
                          (R[1, 2] + R[2, 1]) / s])
        else:
            s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
            q = np.array([(R[1, 0] - R[0, 1]) / s,
                          (R[0, 2] + R[2, 0]) / s,
                          (R[1, 2] + R[2, 1]) / s,
                          0.25 * s])
        return Quaternion.from_array(q)

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])


@dataclass(frozen=True)
class RelativePose:
    """Rigid map from reference-camera to target-camera coordinates."""

    rotation: Quaternion
    translation: np.ndarray  # (3,) mm, scale resolved by the caller

    def __post_init__(self):
        object.__setattr__(
            self, "translation",
            np.asarray(self.translation, dtype=np.float64).reshape(3))

    @property
    def rotation_matrix(self) -> np.ndarray:
        return self.rotation.to_matrix()


def rotvec_to_matrix(v) -> np.ndarray:
    """Rodrigues formula; v is an axis-angle vector (angle = |v|)."""
    v = np.asarray(v, dtype=np.float64).reshape(3)
    theta = np.linalg.norm(v)
    if theta < 1e-12:
        return np.eye(3)
    k = v / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)


def quaternion_angle(qa: Quaternion, qb: Quaternion) -> float:
    """Geodesic rotation angle (radians) between two quaternions."""
    d = min(1.0, abs(float(np.dot(qa.array, qb.array))))
    return 2.0 * float(np.arccos(d))


def camera_depths(camera: Camera, points) -> np.ndarray:
    """Signed depth (z in camera coordinates) for (N, 3) world points."""
    points = np.asarray(points, dtype=np.float64)
    return points @ camera.rotation[2] + camera.translation[2]


def project(camera: Camera, point) -> np.ndarray:
    """Project world point(s) to pixels.

    Accepts a (3,) point or an (N, 3) array.  Raises PointBehindCamera if
    any depth is <= EPS_DEPTH millimetres.
    """
    pts = np.asarray(point, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    depths = camera_depths(camera, pts)
    if np.any(depths <= EPS_DEPTH):
        raise PointBehindCamera(
            f"depth {float(depths.min()):.3g} mm <= {EPS_DEPTH}")
    h = pts @ (camera.intrinsics @ camera.rotation).T \
        + (camera.intrinsics @ camera.translation)
    xy = h[:, :2] / h[:, 2:3]
    return xy[0] if single else xy


def dlt_rows(P: np.ndarray, xy) -> np.ndarray:
    """Unit-norm DLT constraint rows for pixel(s) xy under projection P.

    Returns (..., 2, 4): row 0 is u*P[2]-P[0], row 1 is v*P[2]-P[1],
    each normalized to unit norm.  Shared by the scalar and pooled
    triangulation paths so both produce bit-identical systems.
    """
    xy = np.asarray(xy, dtype=np.float64)
    u = xy[..., 0:1]
    v = xy[..., 1:2]
    r0 = u * P[2] - P[0]
    r1 = v * P[2] - P[1]
    rows = np.stack([r0, r1], axis=-2)
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    return rows / norms


def solve_dlt_batch(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve stacked DLT systems A (..., R, 4) for homogeneous points.

    Returns (points (..., 3), degenerate mask (...)).  A system is flagged
    degenerate when its two trailing singular values are both near zero
    (second-smallest / largest < DLT_DEGENERACY_RATIO) or the homogeneous
    solution is at infinity.
    """
    _, s, vt = np.linalg.svd(A, full_matrices=False)
    X = vt[..., -1, :]
    degenerate = s[..., -2] < DLT_DEGENERACY_RATIO * s[..., 0]
    w = X[..., 3]
    at_infinity = np.abs(w) < 1e-15 * np.linalg.norm(X, axis=-1)
    degenerate = degenerate | at_infinity
    safe_w = np.where(at_infinity, 1.0, w)
    return X[..., :3] / safe_w[..., None], degenerate


def triangulate(cameras, observations) -> np.ndarray:
    """DLT triangulation of one world point from >= 2 views.

    cameras: sequence of Camera; observations: (V, 2) pixels, in the same
    order.  Solves the stacked homogeneous system via SVD (smallest right
    singular vector) after unit-normalizing each constraint row.
    """
    if len(cameras) < 2:
        raise InsufficientViews(f"{len(cameras)} view(s), need >= 2")
    obs = np.asarray(observations, dtype=np.float64).reshape(len(cameras), 2)
    A = np.concatenate(
        [dlt_rows(cam.matrix, xy) for cam, xy in zip(cameras, obs)], axis=0)
    X, degenerate = solve_dlt_batch(A)
    if bool(degenerate):
        raise DegenerateGeometry("triangulation system is rank deficient")
    return X


def _hartley_normalize(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Translate centroid to origin and scale mean radius to sqrt(2).

    pts: (..., N, 2).  Returns (normalized points, T (..., 3, 3)) with
    x_norm ~ T @ [x; 1].
    """
    c = pts.mean(axis=-2, keepdims=True)
    d = np.linalg.norm(pts - c, axis=-1).mean(axis=-1)
    scale = np.sqrt(2.0) / np.maximum(d, 1e-300)
    out = (pts - c) * scale[..., None, None]
    T = np.zeros(pts.shape[:-2] + (3, 3), dtype=np.float64)
    T[..., 0, 0] = scale
    T[..., 1, 1] = scale
    T[..., 0, 2] = -scale * c[..., 0, 0]
    T[..., 1, 2] = -scale * c[..., 0, 1]
    T[..., 2, 2] = 1.0
    return out, T


def eight_point_batch(pts_a: np.ndarray, pts_b: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Normalized eight-point solve for stacked correspondence sets.

    pts_a, pts_b: (..., T, 2) pixels in the two images, T >= 8.  Returns
    (F (..., 3, 3), degenerate mask (...)).  Each F is rank-2 enforced and
    scaled to unit Frobenius norm with a deterministic sign.
    """
    na, Ta = _hartley_normalize(pts_a)
    nb, Tb = _hartley_normalize(pts_b)
    u1, v1 = na[..., 0], na[..., 1]
    u2, v2 = nb[..., 0], nb[..., 1]
    ones = np.ones_like(u1)
    # columns follow row-major F: x_b^T F x_a = 0
    A = np.stack([u2 * u1, u2 * v1, u2, v2 * u1, v2 * v1, v2, u1, v1, ones],
                 axis=-1)
    if A.shape[-2] >= A.shape[-1]:
        # economy SVD keeps the same (9, 9) right basis without the
        # (T, T) left factor, which nobody reads
        _, s, vt = np.linalg.svd(A, full_matrices=False)
    else:
        # exactly eight rows: the null vector only exists in the full basis
        _, s, vt = np.linalg.svd(A)
    degenerate = s[..., 7] < EIGHT_POINT_RANK_TOL
    f = vt[..., -1, :]
    F = f.reshape(f.shape[:-1] + (3, 3))
    # rank-2 enforcement in the normalized frame
    Uf, sf, Vtf = np.linalg.svd(F)
    sf = sf.copy()
    sf[..., 2] = 0.0
    F = (Uf * sf[..., None, :]) @ Vtf
    F = np.swapaxes(Tb, -1, -2) @ F @ Ta
    F = F / np.linalg.norm(F, axis=(-2, -1), keepdims=True)
    # deterministic sign: largest-magnitude entry positive
    flat = F.reshape(F.shape[:-2] + (9,))
    idx = np.argmax(np.abs(flat), axis=-1)
    lead = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    F = F * np.where(lead < 0, -1.0, 1.0)[..., None, None]
    return F, degenerate


def eight_point(corrs) -> np.ndarray:
    """Fundamental matrix from >= 8 correspondences.

    corrs: (N, 4) array of [u_a, v_a, u_b, v_b] rows; the result satisfies
    x_b^T F x_a ~ 0, rank(F) = 2, ||F||_F = 1.
    """
    corrs = np.asarray(corrs, dtype=np.float64).reshape(-1, 4)
    if corrs.shape[0] < 8:
        raise InsufficientViews(f"{corrs.shape[0]} correspondences, need >= 8")
    F, degenerate = eight_point_batch(corrs[None, :, :2], corrs[None, :, 2:])
    if bool(degenerate[0]):
        raise DegenerateConfiguration(
            "correspondences do not determine a fundamental matrix")
    return F[0]


def _pose_candidates(E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Four (R, t) candidates from an essential matrix.

    Returns (R (..., 4, 3, 3), t (..., 4, 3)), t unit norm.
    """
    U, _, Vt = np.linalg.svd(E)
    detU = np.linalg.det(U)
    detV = np.linalg.det(Vt)
    U = U * np.where(detU < 0, -1.0, 1.0)[..., None, None]
    Vt = Vt * np.where(detV < 0, -1.0, 1.0)[..., None, None]
    W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    Ra = U @ W @ Vt
    Rb = U @ W.T @ Vt
    tu = U[..., :, 2]
    R = np.stack([Ra, Ra, Rb, Rb], axis=-3)
    t = np.stack([tu, -tu, tu, -tu], axis=-2)
    return R, t


def cheirality_counts(R: np.ndarray, t: np.ndarray,
                      x_a: np.ndarray, x_b: np.ndarray) -> np.ndarray:
    """Count probes with positive depth in both views per candidate.

    R: (..., C, 3, 3), t: (..., C, 3); x_a, x_b: (..., N, 3) normalized
    image points (z = 1) in the reference and target cameras.  Uses the
    closed-form two-view depth solution; only signs are consumed.
    """
    Rx = np.einsum("...cij,...nj->...cni", R, x_a)
    xb = x_b[..., None, :, :]
    n1 = np.cross(xb, Rx)
    n2 = np.cross(xb, t[..., None, :])
    denom = np.sum(n1 * n1, axis=-1)
    denom = np.where(denom < 1e-300, 1e-300, denom)
    d1 = -np.sum(n2 * n1, axis=-1) / denom
    # depth in target view: z of R X + t with X = d1 * x_a
    d2 = d1 * Rx[..., 2] + t[..., None, 2]
    return np.sum((d1 > 0) & (d2 > 0), axis=-1)


def decompose_to_pose(F, K_a, K_b, probe_corrs, scale: float = 1.0
                      ) -> RelativePose:
    """Relative pose from a fundamental matrix.

    E = K_b^T F K_a is decomposed into the four (R, t) candidates; the one
    placing a strict majority of probe correspondences at positive depth in
    both views wins (CheiralityAmbiguous otherwise).  The unit translation
    is rescaled by `scale` (the declared baseline length in mm).
    """
    F = np.asarray(F, dtype=np.float64)
    K_a = np.asarray(K_a, dtype=np.float64)
    K_b = np.asarray(K_b, dtype=np.float64)
    probes = np.asarray(probe_corrs, dtype=np.float64).reshape(-1, 4)
    n = probes.shape[0]
    if n < 1:
        raise InsufficientViews("need at least one cheirality probe")
    E = K_b.T @ F @ K_a
    R, t = _pose_candidates(E[None])
    ha = np.concatenate([probes[:, :2], np.ones((n, 1))], axis=1)
    hb = np.concatenate([probes[:, 2:], np.ones((n, 1))], axis=1)
    x_a = ha @ np.linalg.inv(K_a).T
    x_b = hb @ np.linalg.inv(K_b).T
    counts = cheirality_counts(R, t, x_a[None], x_b[None])[0]
    best = int(np.argmax(counts))
    if counts[best] * 2 <= n or int(np.sum(counts == counts[best])) > 1:
        raise CheiralityAmbiguous(
            f"candidate depth counts {counts.tolist()} of {n} probes")
    return RelativePose(Quaternion.from_matrix(R[0, best]),
                        t[0, best] * scale)


def relative_pose(cam_a: Camera, cam_b: Camera) -> RelativePose:
    """Ground-truth relative pose mapping cam_a coordinates to cam_b's."""
    R = cam_b.rotation @ cam_a.rotation.T
    t = cam_b.translation - R @ cam_a.translation
    return RelativePose(Quaternion.from_matrix(R), t)


def compose_camera(reference: Camera, rel: RelativePose,
                   intrinsics) -> Camera:
    """Build the target camera from the reference camera and a relative pose."""
    R = rel.rotation_matrix @ reference.rotation
    t = rel.rotation_matrix @ reference.translation + rel.translation
    return Camera(np.asarray(intrinsics, dtype=np.float64), R, t)


def pixel_rays(camera: Camera, pixels) -> tuple[np.ndarray, np.ndarray]:
    """Back-project pixels to world rays.

    Returns (origin (3,), directions (N, 3) unit norm); origin is the
    camera centre, shared by all rays.
    """
    px = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    h = np.concatenate([px, np.ones((px.shape[0], 1))], axis=1)
    d = h @ np.linalg.inv(camera.intrinsics).T @ camera.rotation
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    return camera.center, d


def ray_distance_many(origin_a, dirs_a, origin_b, dirs_b) -> np.ndarray:
    """Closest distance between paired skew rays (lines, not half-lines).

    dirs must be unit norm; shapes (N, 3).  Parallel pairs fall back to
    the point-to-line distance.
    """
    w = np.asarray(origin_b, dtype=np.float64) - np.asarray(origin_a, dtype=np.float64)
    n = np.cross(dirs_a, dirs_b)
    nn = np.linalg.norm(n, axis=-1)
    parallel = nn < 1e-12
    w = np.broadcast_to(w, dirs_a.shape)
    skew = np.abs(np.sum(w * n, axis=-1)) / np.where(parallel, 1.0, nn)
    proj = w - np.sum(w * dirs_a, axis=-1, keepdims=True) * dirs_a
    return np.where(parallel, np.linalg.norm(proj, axis=-1), skew)


def ray_distance(cam_a: Camera, xy_a, cam_b: Camera, xy_b) -> float:
    """Closest distance (mm) between the back-projected rays of two pixels."""
    oa, da = pixel_rays(cam_a, xy_a)
    ob, db = pixel_rays(cam_b, xy_b)
    return float(ray_distance_many(oa, da, ob, db)[0])


def quat_weighted_average(quats, weights) -> Quaternion:
    """Weighted unit-quaternion average.

    Signs are aligned to the first quaternion (dot >= 0), components are
    averaged with the given weights, and the sum is renormalized.  Weights
    must be nonnegative and sum to 1 within 1e-9.
    """
    qs = np.stack([q.array for q in quats], axis=0)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if qs.shape[0] != w.shape[0]:
        raise LengthMismatch(f"{qs.shape[0]} quaternions, {w.shape[0]} weights")
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    sign = np.where(qs @ qs[0] < 0, -1.0, 1.0)
    m = (w * sign) @ qs
    n = np.linalg.norm(m)
    if n < QUAT_ZERO_NORM:
        raise ZeroNorm("weighted quaternion sum has near-zero norm")
    return Quaternion.from_array(m / n)
