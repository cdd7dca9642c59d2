"""Hypothesis pools.

A pose hypothesis triangulates every joint from a random subset of the
views that see it; a camera hypothesis runs the eight-point algorithm on a
random subset of correspondences.  Pools of such hypotheses are what the
scoring network ranks.  Generation is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (InsufficientViews, NoValidPair, TooManyDegenerate)
from .geometry import (Camera, Quaternion, RelativePose, cheirality_counts,
                       dlt_rows, eight_point_batch, relative_pose,
                       solve_dlt_batch, _pose_candidates)


@dataclass(frozen=True)
class DetectionSet:
    """2D detections of one frame: keypoints (J, K, 2) px over K views,
    valid (J, K) flags (False = occluded / missing)."""

    frame_id: int
    keypoints: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        kp = np.asarray(self.keypoints, dtype=np.float64)
        va = np.asarray(self.valid, dtype=bool)
        if kp.ndim != 3 or kp.shape[2] != 2 or va.shape != kp.shape[:2]:
            raise ValueError(f"keypoints {kp.shape} / valid {va.shape}")
        object.__setattr__(self, "keypoints", kp)
        object.__setattr__(self, "valid", va)


@dataclass(frozen=True)
class PoseHypothesis:
    """Triangulated 3D pose and, per joint, the view subset that made it."""

    joints: np.ndarray        # (J, 3) mm
    view_subsets: tuple       # J tuples of sorted view indices


@dataclass(frozen=True)
class CamPoseHypothesis:
    """Relative pose and the correspondence subset that made it."""

    pose: RelativePose
    corr_subset: np.ndarray   # (T, 2) rows of (frame index, joint index)


@dataclass
class HypothesisPool:
    """Hypotheses plus, once scored, their raw scores and probabilities."""

    hypotheses: list
    scores: np.ndarray | None = None
    probs: np.ndarray | None = None

    def __len__(self):
        return len(self.hypotheses)


def generate_pose_pool(det: DetectionSet, cameras, n_pool: int,
                       rng_seed) -> list[PoseHypothesis]:
    """Build n_pool pose hypotheses for one frame.

    For every joint independently: draw a subset size uniformly from
    {2..#valid views}, then a uniform subset of that size, and DLT-
    triangulate it.  Joints seen by fewer than two valid views raise
    NoValidPair.  Degenerate subsets are resampled, with a total budget of
    10 * n_pool before TooManyDegenerate.
    """
    rng = np.random.default_rng(rng_seed)
    J, K = det.valid.shape
    if len(cameras) != K:
        raise InsufficientViews(f"{len(cameras)} cameras for {K} detection views")
    # constraint rows per (view, joint): (K, J, 2, 4)
    rows = np.stack([dlt_rows(cameras[v].matrix, det.keypoints[:, v, :])
                     for v in range(K)], axis=0)
    joints = np.empty((n_pool, J, 3), dtype=np.float64)
    subsets = [[None] * J for _ in range(n_pool)]
    budget = 10 * n_pool
    for j in range(J):
        valid_views = np.flatnonzero(det.valid[j])
        if valid_views.size < 2:
            raise NoValidPair(f"joint {j} visible in {valid_views.size} view(s)")
        pending = list(range(n_pool))
        while pending:
            sizes = rng.integers(2, valid_views.size + 1, size=len(pending))
            subs = [np.sort(rng.permutation(valid_views)[:s]) for s in sizes]
            # group equal-sized systems for one batched solve per size
            retry = []
            for s in np.unique(sizes):
                idx = [i for i, sz in enumerate(sizes) if sz == s]
                A = np.stack([rows[subs[i], j].reshape(2 * s, 4) for i in idx])
                X, degenerate = solve_dlt_batch(A)
                for pos, i in enumerate(idx):
                    h = pending[i]
                    if degenerate[pos]:
                        retry.append(h)
                    else:
                        joints[h, j] = X[pos]
                        subsets[h][j] = tuple(int(v) for v in subs[i])
            budget -= len(pending)
            if retry and budget <= 0:
                raise TooManyDegenerate(f"joint {j}: resampling budget spent")
            pending = retry
    return [PoseHypothesis(joints[h], tuple(subsets[h])) for h in range(n_pool)]


def available_correspondences(dets) -> np.ndarray:
    """(N, 2) rows of (frame index, joint index) valid in both views."""
    out = []
    for m, det in enumerate(dets):
        ok = np.flatnonzero(det.valid[:, 0] & det.valid[:, 1])
        out.append(np.stack([np.full(ok.size, m), ok], axis=1))
    cat = np.concatenate(out, axis=0)
    return cat.astype(np.int64)


def default_subset_size(n_available: int) -> int:
    """Camera subset size when none is configured: 3% of the available
    correspondences, floored at twice the eight-point minimum.  Small
    subsets keep a useful share of them free of gross outliers."""
    return max(16, int(np.ceil(0.03 * n_available)))


def generate_camera_pool(dets, cam_pair, subset_size: int, n_pool: int,
                         rng_seed, scale: float | None = None
                         ) -> list[CamPoseHypothesis]:
    """Build n_pool relative-pose hypotheses from two-view detections.

    Each hypothesis: a uniform subset (without replacement) of size
    subset_size from the valid correspondences, a normalized eight-point
    solve, essential decomposition, and a cheirality vote over the subset
    itself.  Degenerate or ambiguous subsets are resampled with a total
    budget of 10 * n_pool.  Translations are rescaled to `scale` mm
    (defaults to the true baseline of cam_pair).
    """
    cam_a, cam_b = cam_pair
    if scale is None:
        scale = float(np.linalg.norm(relative_pose(cam_a, cam_b).translation))
    corr = available_correspondences(dets)
    n_avail = corr.shape[0]
    if subset_size < 8:
        raise InsufficientViews(f"subset size {subset_size} < 8")
    if subset_size >= n_avail:
        raise ValueError(f"subset size {subset_size} must be < {n_avail} available")
    kp = np.stack([d.keypoints for d in dets], axis=0)  # (M, J, 2, 2)
    pts_a = kp[corr[:, 0], corr[:, 1], 0]  # (N, 2)
    pts_b = kp[corr[:, 0], corr[:, 1], 1]
    ones = np.ones((n_avail, 1))
    x_a = np.concatenate([pts_a, ones], axis=1) @ np.linalg.inv(cam_a.intrinsics).T
    x_b = np.concatenate([pts_b, ones], axis=1) @ np.linalg.inv(cam_b.intrinsics).T
    rng = np.random.default_rng(rng_seed)
    out: list[CamPoseHypothesis] = []
    attempts = 0
    budget = 10 * n_pool
    while len(out) < n_pool:
        want = n_pool - len(out)
        if attempts + want > budget:
            raise TooManyDegenerate(
                f"{attempts} attempts for {len(out)}/{n_pool} hypotheses")
        attempts += want
        sel = np.stack([np.sort(rng.choice(n_avail, subset_size, replace=False))
                        for _ in range(want)])
        F, degenerate = eight_point_batch(pts_a[sel], pts_b[sel])
        E = cam_b.intrinsics.T @ F @ cam_a.intrinsics
        R, t = _pose_candidates(E)
        counts = cheirality_counts(R, t, x_a[sel], x_b[sel])  # (want, 4)
        best = np.argmax(counts, axis=1)
        best_count = np.take_along_axis(counts, best[:, None], axis=1)[:, 0]
        unique = np.sum(counts == best_count[:, None], axis=1) == 1
        ok = (~degenerate) & (best_count * 2 > subset_size) & unique
        for i in np.flatnonzero(ok):
            b = int(best[i])
            pose = RelativePose(Quaternion.from_matrix(R[i, b]),
                                t[i, b] * scale)
            out.append(CamPoseHypothesis(pose, corr[sel[i]]))
    return out
