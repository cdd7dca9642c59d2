"""Synthetic capture generation.

Provides camera rig presets (ring, arc, dome of look-at cameras), smooth
random body motion with exactly rigid bones (forward kinematics over the
skeleton tree, so every frame reproduces the template bone lengths), and a
detection renderer with Gaussian pixel noise, gross outliers, and
occlusion that always leaves every joint at least two valid views.

Everything is deterministic given the (rig, motion, noise) seeds.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DatasetError, UnrenderableFrame
from .features import DEFAULT_SKELETON, Skeleton
from .geometry import EPS_DEPTH, Camera, rotvec_to_matrix
from .hypotheses import DetectionSet

RIG_PRESETS = ("ring", "arc", "dome")


@dataclass(frozen=True)
class RigSpec:
    """Camera arrangement parameters.

    Cameras are placed on a circle (ring), a partial arc, or a hemisphere
    shell (dome) around `center` and all gaze exactly at it.  Heights are
    drawn uniformly from height_range with the rig seed.
    """

    preset: str = "ring"
    camera_count: int = 4
    radius_mm: float = 4000.0
    center: tuple = (0.0, 0.0, 0.0)
    height_range: tuple = (1200.0, 2000.0)
    arc_span_deg: float = 150.0
    focal_px: float = 1100.0
    image_size: tuple = (1000, 1000)
    seed: int = 0

    def __post_init__(self):
        if self.preset not in RIG_PRESETS:
            raise ValueError(f"unknown rig preset {self.preset!r}")
        if self.camera_count < 2:
            raise ValueError("need at least two cameras")


@dataclass(frozen=True)
class NoiseSpec:
    """Detection corruption: isotropic Gaussian pixel noise, gross
    outliers (true location displaced by outlier_magnitude px in a uniform
    direction), and Bernoulli occlusion."""

    pixel_sigma: float = 0.0
    outlier_rate: float = 0.0
    outlier_magnitude: float = 0.0
    occlusion_rate: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.outlier_rate <= 1.0
                and 0.0 <= self.occlusion_rate < 1.0):
            raise ValueError("rates must be probabilities")
        if self.pixel_sigma < 0 or self.outlier_magnitude < 0:
            raise ValueError("magnitudes must be nonnegative")


def _look_at(eye, target, K):
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    z = target - eye
    z = z / np.linalg.norm(z)
    x = np.cross(z, np.array([0.0, 0.0, 1.0]))
    if np.linalg.norm(x) < 1e-8:
        x = np.cross(z, np.array([0.0, 1.0, 0.0]))
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return Camera(K, R, -R @ eye)


def generate_rig(spec: RigSpec) -> list[Camera]:
    """Instantiate the rig's cameras (deterministic in spec.seed)."""
    rng = np.random.default_rng(spec.seed)
    c = np.asarray(spec.center, dtype=np.float64)
    K = np.array([[spec.focal_px, 0.0, spec.image_size[0] / 2.0],
                  [0.0, spec.focal_px, spec.image_size[1] / 2.0],
                  [0.0, 0.0, 1.0]])
    n = spec.camera_count
    heights = rng.uniform(spec.height_range[0], spec.height_range[1], n)
    if spec.preset == "ring":
        angles = 2.0 * np.pi * np.arange(n) / n
        rho = np.full(n, spec.radius_mm)
    elif spec.preset == "arc":
        angles = np.linspace(0.0, np.deg2rad(spec.arc_span_deg), n)
        rho = np.full(n, spec.radius_mm)
    else:  # dome: keep |position - center| = radius by shrinking rho
        angles = 2.0 * np.pi * np.arange(n) / n
        heights = np.clip(heights, None, 0.9 * spec.radius_mm)
        rho = np.sqrt(spec.radius_mm**2 - heights**2)
    cams = []
    for i in range(n):
        eye = c + np.array([rho[i] * np.cos(angles[i]),
                            rho[i] * np.sin(angles[i]), heights[i]])
        cams.append(_look_at(eye, c, K))
    return cams


# Rest-pose bone directions (unit, child order), subject facing +y, z up,
# right side on +x.  Arms in a slight A-pose so the torso triangle is
# never degenerate.
_REST_DIRECTIONS = np.array([
    [1.0, 0.0, 0.0],     # right hip
    [0.0, 0.0, -1.0],    # right knee
    [0.0, 0.0, -1.0],    # right ankle
    [-1.0, 0.0, 0.0],    # left hip
    [0.0, 0.0, -1.0],    # left knee
    [0.0, 0.0, -1.0],    # left ankle
    [0.0, 0.0, 1.0],     # spine
    [0.0, 0.0, 1.0],     # thorax
    [0.0, 0.3, 0.954],   # neck
    [0.0, 0.0, 1.0],     # head
    [-1.0, 0.0, 0.0],    # left shoulder
    [-0.98, 0.0, -0.2],  # left elbow
    [-0.995, 0.0, -0.1],  # left wrist
    [1.0, 0.0, 0.0],     # right shoulder
    [0.98, 0.0, -0.2],   # right elbow
    [0.995, 0.0, -0.1],  # right wrist
])
_REST_DIRECTIONS = _REST_DIRECTIONS / np.linalg.norm(_REST_DIRECTIONS,
                                                     axis=1, keepdims=True)


def rest_pose(skel: Skeleton = DEFAULT_SKELETON,
              bone_lengths=None) -> np.ndarray:
    """(J, 3) template pose: identity joint rotations, pelvis at origin."""
    lengths = np.asarray(skel.bone_lengths if bone_lengths is None
                         else bone_lengths, dtype=np.float64)
    pos = np.zeros((skel.joint_count, 3))
    for j in range(1, skel.joint_count):
        pos[j] = pos[skel.parents[j]] + _REST_DIRECTIONS[j - 1] * lengths[j - 1]
    return pos


@dataclass(frozen=True)
class MotionSpec:
    """Smoothness/variability of the random motion (mean-reverting
    joint-angle walks plus a drifting, turning root)."""

    angle_persistence: float = 0.97
    angle_sigma: float = 0.22      # rad, stationary std per axis
    angle_limit: float = 0.6       # rad, per-joint rotation cap
    turn_sigma: float = 0.5        # rad, root yaw
    drift_sigma_xy: float = 160.0  # mm, root wandering
    drift_sigma_z: float = 40.0


def generate_sequence(frames: int, skel: Skeleton = DEFAULT_SKELETON,
                      motion_seed=0, motion: MotionSpec = MotionSpec()
                      ) -> np.ndarray:
    """Sample a (frames, J, 3) world-space pose sequence.

    Bone lengths equal the skeleton template exactly in every frame (the
    pose is built by rotating template bones, never by perturbing points),
    so the left/right symmetry prior is exactly zero on the output.
    """
    if frames < 1:
        raise ValueError("need at least one frame")
    rng = np.random.default_rng(motion_seed)
    J = skel.joint_count
    rho = motion.angle_persistence
    step = np.sqrt(1.0 - rho * rho)
    angles = np.zeros((J - 1, 3))
    yaw = 0.0
    root = np.zeros(3)
    out = np.empty((frames, J, 3), dtype=np.float64)
    lengths = np.asarray(skel.bone_lengths, dtype=np.float64)
    for f in range(frames):
        angles = rho * angles + motion.angle_sigma * step * rng.normal(size=(J - 1, 3))
        norms = np.linalg.norm(angles, axis=1, keepdims=True)
        scale = np.minimum(1.0, motion.angle_limit / np.maximum(norms, 1e-12))
        angles = angles * scale
        yaw = rho * yaw + motion.turn_sigma * step * float(rng.normal())
        drift = np.array([motion.drift_sigma_xy, motion.drift_sigma_xy,
                          motion.drift_sigma_z])
        root = rho * root + step * drift * rng.normal(size=3)
        pos = np.empty((J, 3))
        rot = np.empty((J, 3, 3))
        pos[0] = root
        rot[0] = rotvec_to_matrix([0.0, 0.0, yaw])
        for j in range(1, J):
            p = skel.parents[j]
            R = rot[p] @ rotvec_to_matrix(angles[j - 1])
            rot[j] = R
            pos[j] = pos[p] + R @ (_REST_DIRECTIONS[j - 1] * lengths[j - 1])
        out[f] = pos
    return out


def render_detections(poses, cameras, noise: NoiseSpec = NoiseSpec(),
                      noise_seed=0) -> list[DetectionSet]:
    """Project poses into every camera and corrupt the detections.

    Views where a joint sits at or behind a camera are invalid from the
    start; if fewer than two cameras see a joint, UnrenderableFrame is
    raised (the rig cannot cover the motion).  Occlusions that would leave
    a joint under two valid views are redrawn, so the guarantee holds on
    the output too.
    """
    poses = np.asarray(poses, dtype=np.float64)
    F, J, _ = poses.shape
    K = len(cameras)
    rng = np.random.default_rng(noise_seed)
    flat = poses.reshape(F * J, 3)
    px = np.empty((F, J, K, 2))
    depth_ok = np.empty((F, J, K), dtype=bool)
    for v, cam in enumerate(cameras):
        depths = flat @ cam.rotation[2] + cam.translation[2]
        ok = depths > EPS_DEPTH
        h = flat @ (cam.intrinsics @ cam.rotation).T \
            + cam.intrinsics @ cam.translation
        with np.errstate(divide="ignore", invalid="ignore"):
            xy = h[:, :2] / h[:, 2:3]
        px[:, :, v] = xy.reshape(F, J, 2)
        depth_ok[:, :, v] = ok.reshape(F, J)
    if np.any(depth_ok.sum(axis=2) < 2):
        f, j = np.argwhere(depth_ok.sum(axis=2) < 2)[0]
        raise UnrenderableFrame(f"frame {f} joint {j} in front of < 2 cameras")
    px += rng.normal(0.0, noise.pixel_sigma, px.shape) \
        if noise.pixel_sigma > 0 else 0.0
    if noise.outlier_rate > 0:
        hit = rng.random((F, J, K)) < noise.outlier_rate
        ang = rng.uniform(0.0, 2.0 * np.pi, (F, J, K))
        off = noise.outlier_magnitude * np.stack([np.cos(ang), np.sin(ang)],
                                                 axis=-1)
        px = np.where(hit[..., None], px + off, px)
    valid = depth_ok.copy()
    if noise.occlusion_rate > 0:
        occluded = rng.random((F, J, K)) < noise.occlusion_rate
        valid = depth_ok & ~occluded
        bad = np.argwhere(valid.sum(axis=2) < 2)
        for f, j in bad:
            for _ in range(100):
                occ = rng.random(K) < noise.occlusion_rate
                row = depth_ok[f, j] & ~occ
                if row.sum() >= 2:
                    valid[f, j] = row
                    break
            else:
                keep = np.flatnonzero(depth_ok[f, j])[:2]
                row = np.zeros(K, dtype=bool)
                row[keep] = True
                valid[f, j] = row
    return [DetectionSet(f, px[f], valid[f]) for f in range(F)]


@dataclass
class SyntheticDataset:
    """Ground-truth scene plus rendered detections."""

    cameras: list
    poses: np.ndarray
    detections: list
    skeleton: Skeleton = DEFAULT_SKELETON
    meta: dict = field(default_factory=dict)

    @property
    def frames(self) -> int:
        return self.poses.shape[0]


def _jsonable(x):
    """Tuples to lists, recursively, so in-memory meta equals its JSON
    round trip."""
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def make_dataset(rig: RigSpec, noise: NoiseSpec, frames: int,
                 motion_seed=0, noise_seed=0,
                 skel: Skeleton = DEFAULT_SKELETON,
                 motion: MotionSpec = MotionSpec()) -> SyntheticDataset:
    cameras = generate_rig(rig)
    poses = generate_sequence(frames, skel, motion_seed, motion)
    dets = render_detections(poses, cameras, noise, noise_seed)
    meta = _jsonable({"rig": asdict(rig), "noise": asdict(noise),
                      "seeds": {"rig": rig.seed, "motion": motion_seed,
                                "noise": noise_seed},
                      "frames": frames})
    return SyntheticDataset(cameras, poses, dets, skel, meta)


def save_dataset(ds: SyntheticDataset, path: str) -> None:
    """Write the dataset as JSON (floats keep full repr precision)."""
    doc = {
        "version": 1,
        "skeleton": {
            "joint_count": ds.skeleton.joint_count,
            "parents": list(ds.skeleton.parents),
            "left_shoulder": ds.skeleton.left_shoulder,
            "right_shoulder": ds.skeleton.right_shoulder,
            "left_hip": ds.skeleton.left_hip,
            "right_hip": ds.skeleton.right_hip,
            "symmetric_pairs": [list(p) for p in ds.skeleton.symmetric_pairs],
            "bone_lengths": list(ds.skeleton.bone_lengths),
        },
        "cameras": [{"id": i, "K": c.intrinsics.tolist(),
                     "R": c.rotation.tolist(), "t": c.translation.tolist()}
                    for i, c in enumerate(ds.cameras)],
        "poses": ds.poses.tolist(),
        "detections": [{"frame_id": int(d.frame_id),
                        "keypoints": d.keypoints.tolist(),
                        "valid": d.valid.tolist()} for d in ds.detections],
        "meta": ds.meta,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_dataset(path: str) -> SyntheticDataset:
    """Read a dataset written by save_dataset; bad files raise DatasetError."""
    if not os.path.exists(path):
        raise DatasetError(f"no such dataset: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetError(f"cannot parse {path}: {e}") from e
    try:
        if doc["version"] != 1:
            raise DatasetError(f"unsupported dataset version {doc['version']}")
        sk = doc["skeleton"]
        skel = Skeleton(joint_count=sk["joint_count"],
                        parents=tuple(sk["parents"]),
                        left_shoulder=sk["left_shoulder"],
                        right_shoulder=sk["right_shoulder"],
                        left_hip=sk["left_hip"],
                        right_hip=sk["right_hip"],
                        symmetric_pairs=tuple(tuple(p) for p in
                                              sk["symmetric_pairs"]),
                        bone_lengths=tuple(sk["bone_lengths"]))
        cameras = [Camera(np.array(c["K"]), np.array(c["R"]),
                          np.array(c["t"]))
                   for c in sorted(doc["cameras"], key=lambda c: c["id"])]
        poses = np.asarray(doc["poses"], dtype=np.float64)
        dets = [DetectionSet(d["frame_id"],
                             np.asarray(d["keypoints"], dtype=np.float64),
                             np.asarray(d["valid"], dtype=bool))
                for d in doc["detections"]]
        if poses.ndim != 3 or poses.shape[0] != len(dets):
            raise DatasetError(f"poses {poses.shape} vs {len(dets)} detections")
        return SyntheticDataset(cameras, poses, dets, skel, doc.get("meta", {}))
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"malformed dataset {path}: {e}") from e


def sample_probe_points(cameras, n: int, rng_seed, center=(0.0, 0.0, 0.0),
                        half_extent_mm: float = 1000.0,
                        image_size=(1000, 1000)) -> np.ndarray:
    """Uniform points in the cube around `center` that fall inside every
    given camera's frustum (positive depth, projection inside the image)."""
    rng = np.random.default_rng(rng_seed)
    c = np.asarray(center, dtype=np.float64)
    out = []
    found = 0
    for _ in range(1000):
        pts = c + rng.uniform(-half_extent_mm, half_extent_mm, (4 * n, 3))
        ok = np.ones(len(pts), dtype=bool)
        for cam in cameras:
            depths = pts @ cam.rotation[2] + cam.translation[2]
            ok &= depths > EPS_DEPTH
            h = pts @ (cam.intrinsics @ cam.rotation).T \
                + cam.intrinsics @ cam.translation
            with np.errstate(divide="ignore", invalid="ignore"):
                xy = h[:, :2] / h[:, 2:3]
            ok &= ((xy[:, 0] >= 0) & (xy[:, 0] <= image_size[0])
                   & (xy[:, 1] >= 0) & (xy[:, 1] <= image_size[1]))
        out.append(pts[ok])
        found += int(ok.sum())
        if found >= n:
            break
    if found < n:
        raise ValueError("probe acceptance too low; check rig and cube")
    return np.concatenate(out, axis=0)[:n]
