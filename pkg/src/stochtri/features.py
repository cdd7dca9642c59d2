"""Hypothesis features and evaluation metrics.

A pose feature describes a skeleton in a body-centred frame so the scorer
never sees where the subject stands or which way it faces: the pelvis
(midpoint of the hips) is moved to the origin, the torso-plane normal is
rotated onto +z by the minimal rotation, and the remaining in-plane freedom
is fixed by turning the left->right shoulder direction onto the +x axis.
The flattened normalized joints are concatenated with the 16 bone lengths.

A camera feature summarizes a hypothesized relative pose by how well it
makes corresponding detection rays meet: one closest-ray distance per
correspondence, sorted ascending so the vector is invariant to the order
detections are stored in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateTorso, LengthMismatch, ShapeMismatch,
                     ZeroLimb)
from .geometry import (Camera, RelativePose, compose_camera, dlt_rows,
                       pixel_rays, ray_distance_many, solve_dlt_batch)


@dataclass(frozen=True)
class Skeleton:
    """Kinematic tree of a 17-joint body model.

    parents[j] is the parent joint of j (parents[0] = -1 for the pelvis
    root); each non-root joint defines one body part (bone) joining it to
    its parent, 16 in total.  symmetric_pairs lists (left child, right
    child) joints of the six left/right bone pairs used by the symmetry
    prior: upper arms, lower arms, shoulders, hips, upper legs, lower legs.
    bone_lengths holds the template length in millimetres for the bone
    ending at each non-root joint, in joint order.
    """

    joint_count: int
    parents: tuple
    left_shoulder: int
    right_shoulder: int
    left_hip: int
    right_hip: int
    symmetric_pairs: tuple
    bone_lengths: tuple

    def __post_init__(self):
        if len(self.parents) != self.joint_count:
            raise ShapeMismatch("parents must list every joint")
        if self.parents[0] != -1:
            raise ValueError("joint 0 must be the root")
        if len(self.bone_lengths) != self.joint_count - 1:
            raise ShapeMismatch("one template length per non-root joint")
        if len(self.symmetric_pairs) != 6:
            raise ValueError("exactly six left/right bone pairs")

    @property
    def edges(self):
        """(child, parent) pairs for the 16 bones, child order."""
        return tuple((j, self.parents[j]) for j in range(1, self.joint_count))


# Joint order: 0 pelvis, 1-3 right leg (hip, knee, ankle), 4-6 left leg,
# 7 spine, 8 thorax, 9 neck, 10 head, 11-13 left arm (shoulder, elbow,
# wrist), 14-16 right arm.
DEFAULT_SKELETON = Skeleton(
    joint_count=17,
    parents=(-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15),
    left_shoulder=11,
    right_shoulder=14,
    left_hip=4,
    right_hip=1,
    # (left child, right child): upper arms, lower arms, shoulders, hips,
    # upper legs, lower legs
    symmetric_pairs=((12, 15), (13, 16), (11, 14), (4, 1), (5, 2), (6, 3)),
    bone_lengths=(130.0, 450.0, 440.0, 130.0, 450.0, 440.0, 230.0, 230.0,
                  120.0, 110.0, 170.0, 280.0, 250.0, 170.0, 280.0, 250.0),
)

POSE_FEATURE_WIDTH = 3 * DEFAULT_SKELETON.joint_count + 16


def bone_lengths(joints, skel: Skeleton = DEFAULT_SKELETON) -> np.ndarray:
    """Bone lengths (mm) in child-joint order; joints (..., J, 3)."""
    joints = np.asarray(joints, dtype=np.float64)
    children = np.arange(1, skel.joint_count)
    parents = np.asarray(skel.parents)[children]
    return np.linalg.norm(joints[..., children, :] - joints[..., parents, :],
                          axis=-1)


def _rotation_to_z(n: np.ndarray) -> np.ndarray:
    """Minimal rotation taking unit vector n onto +z."""
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(n, z)
    s = np.linalg.norm(axis)
    c = float(n @ z)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])  # pi about x
    axis = axis / s
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    theta = np.arctan2(s, c)
    return np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)


def normalize_pose(joints, skel: Skeleton = DEFAULT_SKELETON) -> np.ndarray:
    """Rigid-normalize a pose: pelvis to origin, torso-plane normal to +z,
    left->right shoulder direction to +x.

    The torso plane passes through the two shoulders and the pelvis; if the
    three are collinear (cross product with sin(angle) < 1e-9) the plane is
    undefined and DegenerateTorso is raised.  The result is invariant to
    any rigid motion of the input.
    """
    joints = np.asarray(joints, dtype=np.float64)
    if joints.shape != (skel.joint_count, 3):
        raise ShapeMismatch(f"expected ({skel.joint_count}, 3), got {joints.shape}")
    pelvis = 0.5 * (joints[skel.left_hip] + joints[skel.right_hip])
    centered = joints - pelvis
    ls = centered[skel.left_shoulder]
    rs = centered[skel.right_shoulder]
    n = np.cross(ls, rs)
    nn = np.linalg.norm(n)
    if nn < 1e-9 * max(1.0, np.linalg.norm(ls) * np.linalg.norm(rs)):
        raise DegenerateTorso("shoulders and pelvis are collinear")
    R1 = _rotation_to_z(n / nn)
    out = centered @ R1.T
    s = out[skel.right_shoulder] - out[skel.left_shoulder]
    ang = np.arctan2(s[1], s[0])
    ca, sa = np.cos(-ang), np.sin(-ang)
    R2 = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    return out @ R2.T


def pose_feature(joints, skel: Skeleton = DEFAULT_SKELETON) -> np.ndarray:
    """Scoring feature: normalized joints flattened, then bone lengths.

    Width 3*J + 16 (= 67 for the default skeleton), all in millimetres.
    """
    return np.concatenate([normalize_pose(joints, skel).ravel(),
                           bone_lengths(joints, skel)])


def cam_feature(rel: RelativePose, cam_pair, dets,
                width: int | None = None) -> np.ndarray:
    """Scoring feature of a relative-pose hypothesis: sorted ray distances.

    cam_pair is (reference Camera, target Camera); only the target's
    intrinsics are consumed, its extrinsics are replaced by the hypothesis.
    dets is a list of M two-view DetectionSets; every correspondence valid
    in both views contributes the closest distance (mm) between its two
    back-projected rays, and the vector is sorted ascending.

    `width` resamples the sorted vector to a fixed length by linear
    interpolation between quantiles, so a network trained at one frame
    count can score pools built from another.
    """
    ref, target = cam_pair
    cam_hyp = compose_camera(ref, rel, target.intrinsics)
    mask = np.concatenate([d.valid[:, 0] & d.valid[:, 1] for d in dets])
    px_a = np.concatenate([d.keypoints[:, 0] for d in dets], axis=0)[mask]
    px_b = np.concatenate([d.keypoints[:, 1] for d in dets], axis=0)[mask]
    oa, da = pixel_rays(ref, px_a)
    ob, db = pixel_rays(cam_hyp, px_b)
    dist = np.sort(ray_distance_many(oa, da, ob, db))
    if width is None or width == dist.size:
        return dist
    if dist.size < 2:
        raise ShapeMismatch("need at least two distances to resample")
    return np.interp(np.linspace(0.0, 1.0, width),
                     np.linspace(0.0, 1.0, dist.size), dist)


def mpjpe(estimate, truth) -> float:
    """Mean per-joint position error (mm): mean Euclidean distance over
    joints between two (J, 3) poses."""
    est = np.asarray(estimate, dtype=np.float64)
    ref = np.asarray(truth, dtype=np.float64)
    if est.shape != ref.shape or est.ndim != 2 or est.shape[1] != 3:
        raise ShapeMismatch(f"pose shapes {est.shape} vs {ref.shape}")
    return float(np.mean(np.linalg.norm(est - ref, axis=1)))


def pose_prior_variance(pose_sequence, skel: Skeleton = DEFAULT_SKELETON
                        ) -> np.ndarray:
    """Left/right length-ratio sample variance per symmetric bone pair.

    pose_sequence: (T, J, 3) with T >= 2.  For each of the six pairs the
    per-frame ratio r_t = len(left)/len(right) is formed and its sample
    variance (denominator T-1) returned; a rigid sequence gives exact
    zeros.  ZeroLimb is raised if any denominator bone is shorter than
    1e-9 mm.
    """
    seq = np.asarray(pose_sequence, dtype=np.float64)
    if seq.ndim != 3 or seq.shape[1] != skel.joint_count or seq.shape[2] != 3:
        raise ShapeMismatch(f"expected (T, {skel.joint_count}, 3), got {seq.shape}")
    if seq.shape[0] < 2:
        raise ShapeMismatch("need at least two frames for a sample variance")
    lengths = bone_lengths(seq, skel)  # (T, 16), child order
    out = np.empty(6, dtype=np.float64)
    for i, (left, right) in enumerate(skel.symmetric_pairs):
        den = lengths[:, right - 1]
        if np.any(den < 1e-9):
            raise ZeroLimb(f"right bone of pair {i} has near-zero length")
        out[i] = np.var(lengths[:, left - 1] / den, ddof=1)
    return out


def _algebraic_project(cam: Camera, pts: np.ndarray) -> np.ndarray:
    """Dehomogenized P @ [X;1] without depth checks; metrics must stay
    finite for arbitrarily bad estimates instead of refusing to measure."""
    h = pts @ (cam.intrinsics @ cam.rotation).T \
        + cam.intrinsics @ cam.translation
    return h[:, :2] / h[:, 2:3]


def camera_errors(est: RelativePose, truth: RelativePose, ref_cam: Camera,
                  target_intrinsics, probe_points) -> dict:
    """Relative-pose error measures against ground truth.

    Returns a dict with:
      e_rot   -- Euclidean distance between unit quaternions (sign-aligned)
      e_trans -- ||t_est - t_true|| in mm
      e_2d    -- mean pixel distance of probe projections under the
                 estimated vs true target camera
      e_3d    -- mean mm distance between probe points and their
                 reconstruction: true 2D observations (reference and true
                 target projections) triangulated with the reference camera
                 and the ESTIMATED target camera
    probe_points: (N, 3) world points, expected inside both frusta.
    """
    probes = np.asarray(probe_points, dtype=np.float64).reshape(-1, 3)
    qa = est.rotation.array
    qb = truth.rotation.array
    if float(qa @ qb) < 0:
        qa = -qa
    e_rot = float(np.linalg.norm(qa - qb))
    e_trans = float(np.linalg.norm(est.translation - truth.translation))
    cam_est = compose_camera(ref_cam, est, target_intrinsics)
    cam_true = compose_camera(ref_cam, truth, target_intrinsics)
    px_est = _algebraic_project(cam_est, probes)
    px_true = _algebraic_project(cam_true, probes)
    e_2d = float(np.mean(np.linalg.norm(px_est - px_true, axis=1)))
    px_ref = _algebraic_project(ref_cam, probes)
    rows_ref = dlt_rows(ref_cam.matrix, px_ref)
    rows_est = dlt_rows(cam_est.matrix, px_true)
    A = np.concatenate([rows_ref, rows_est], axis=-2)
    X, _ = solve_dlt_batch(A)
    e_3d = float(np.mean(np.linalg.norm(X - probes, axis=1)))
    return {"e_rot": e_rot, "e_trans": e_trans, "e_2d": e_2d, "e_3d": e_3d}
