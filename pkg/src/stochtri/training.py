"""Training loops, evaluation, baselines, the extrinsics ablation, and
report emission.

One training sample is one hypothesis pool: a pose pool for one frame, or
a relative-pose pool for one window of two-view frames.  The loss per
pool combines the expected hypothesis error under the (noisy) selection
distribution, the distribution entropy, and the error of the selected
estimate; gradients flow through the softmax analytically.  Two batch
semantics are supported: "samples" treats `iterations` as the number of
pools and applies one averaged optimizer step every `batch_size` pools;
"steps" builds `batch_size` pools per iteration and steps once per
iteration.  The default is "samples" (500 iterations then cost 500 pools,
about 32 optimizer steps with the default batch size); "steps" is the
heavier reading (500 x 16 pools) and is selectable in the config.

Everything here is deterministic given the config: reports carry a
sha256 fingerprint of the config and no timestamps, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, DegenerateGeometry, InsufficientViews, \
    NoValidPair, PointBehindCamera, TaskMismatch
from .features import (POSE_FEATURE_WIDTH, cam_feature, camera_errors,
                       mpjpe, pose_feature, pose_prior_variance)
from .geometry import (RelativePose, compose_camera, decompose_to_pose,
                       dlt_rows, eight_point, project, relative_pose,
                       solve_dlt_batch, triangulate)
from .hypotheses import (DetectionSet, HypothesisPool,
                         available_correspondences, default_subset_size,
                         generate_camera_pool, generate_pose_pool)
from .scoring import ScoringNetwork, sample_gumbel, softmax_backward, \
    tempered_softmax
from .selection import (ENTROPY_CLAMP, STRATEGIES, LossWeights,
                        entropy_loss, estimation_loss, select, select_index,
                        stochastic_loss, total_loss)
from .synth import SyntheticDataset, sample_probe_points

TASK_DEFAULTS = {
    "pose": {"pool_size": 200, "learning_rate": 5e-4, "temperature": 1.5,
             "alpha": 1.0, "beta": 0.01, "gamma": 0.02},
    "camera": {"pool_size": 100, "learning_rate": 1e-5, "temperature": 1.2,
               "alpha": 1.0, "beta": 0.01, "gamma": 0.0},
}

EVAL_STRATEGIES = ("weight", "avg", "most", "least", "stoch", "random",
                   "best", "worst")


@dataclass
class TrainConfig:
    """Flat, JSON-serializable run configuration.

    Numeric defaults of None are filled from TASK_DEFAULTS by __post_init__
    so both tasks keep their own published defaults.  subset_size and
    window only matter for the camera task.
    """

    task: str = "pose"
    iterations: int = 500
    batch_size: int = 16
    batch_semantics: str = "samples"
    pool_size: int | None = None
    learning_rate: float | None = None
    temperature: float | None = None
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    strategy: str = "weight"
    optimizer: str = "adam"
    seed: int = 0
    subset_size: int = 40
    window: int = 80
    dataset: str | None = None
    out: str | None = None
    weights: str | None = None
    cam_weights: str | None = None

    def __post_init__(self):
        if self.task not in TASK_DEFAULTS:
            raise ConfigError(f"unknown task {self.task!r}")
        for key, val in TASK_DEFAULTS[self.task].items():
            if getattr(self, key) is None:
                setattr(self, key, val)
        if self.batch_semantics not in ("samples", "steps"):
            raise ConfigError(
                f"unknown batch_semantics {self.batch_semantics!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.iterations < 0:
            raise ConfigError("iterations must be nonnegative")
        for key in ("batch_size", "pool_size", "subset_size", "window"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigError("loss weights must be nonnegative")

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta, self.gamma)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict:
        return asdict(self)


PATH_FIELDS = ("dataset", "out", "weights", "cam_weights")


def config_fingerprint(cfg: TrainConfig | dict) -> str:
    """sha256 over the semantic config fields.  File locations are
    excluded so the same run writes the same fingerprint anywhere."""
    doc = cfg.to_dict() if isinstance(cfg, TrainConfig) else dict(cfg)
    for key in PATH_FIELDS:
        doc.pop(key, None)
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _entropy_grad(probs):
    # consistent with entropy_loss: entries below the clamp contribute 0
    return np.where(probs >= ENTROPY_CLAMP, -(np.log(
        np.maximum(probs, ENTROPY_CLAMP)) + 1.0), 0.0)


def blended_pose_error_grad(probs, joints, truth):
    """Error of the probability-weighted pose and its gradient in probs.

    joints: (N, J, 3) pool coordinates; the blended pose is sum_i p_i
    joints_i and the error is its MPJPE against truth.  Joints that land
    exactly on the truth get a zero subgradient.
    """
    blend = np.einsum("i,ijk->jk", probs, joints)
    diff = blend - truth
    norms = np.linalg.norm(diff, axis=1)
    err = float(norms.mean())
    unit = np.where(norms[:, None] > 0, diff / np.maximum(norms[:, None],
                                                          1e-300), 0.0)
    grad = np.einsum("kc,ikc->i", unit, joints) / truth.shape[0]
    return err, grad


def pool_loss_and_grads(net, feats, errors, weights, temperature,
                        gumbel_noise=None, pool_joints=None, truth=None,
                        strategy="weight", rng_seed=0):
    """Total loss of one pool and its gradient in the network parameters.

    `gumbel_noise` is added to the raw scores before the tempered softmax
    (pass a fixed vector to make the loss a deterministic function of the
    parameters, e.g. for finite-difference checks).  The estimation term
    follows `strategy`: the weight blend is differentiable in the
    probabilities (pose pools only, needs pool_joints and truth); every
    other strategy contributes its value with a zero gradient.
    """
    errors = np.asarray(errors, dtype=np.float64)
    raw = net.forward(feats)
    logits = raw if gumbel_noise is None else raw + gumbel_noise
    probs = tempered_softmax(logits, temperature)
    grad_probs = weights.alpha * errors + weights.beta * _entropy_grad(probs)
    if strategy == "weight" and pool_joints is not None:
        l_est, est_grad = blended_pose_error_grad(probs, pool_joints, truth)
        grad_probs = grad_probs + weights.gamma * est_grad
    else:
        pool = HypothesisPool(list(range(len(errors))), probs=probs)
        if strategy == "weight":
            l_est = 0.0   # camera pools carry no differentiable blend error
        else:
            i = select_index(pool, strategy, errors=errors, rng_seed=rng_seed)
            l_est = float(errors[i])
    loss = total_loss(stochastic_loss(errors, probs), entropy_loss(probs),
                      estimation_loss(l_est), weights)
    grads = net.backward(softmax_backward(grad_probs, probs, temperature))
    return loss, grads, probs


def _pose_pool_errors(joints, truth):
    return np.mean(np.linalg.norm(joints - truth, axis=2), axis=1)


def _pool_e3d(rels, ref_cam, target_intrinsics, ref_rows, px_true, probes):
    """Probe reconstruction error for a batch of relative-pose hypotheses.

    ref_rows are the reference camera's precomputed constraint rows for
    the probe observations; px_true are the probes as seen by the TRUE
    target camera.  Each hypothesis re-poses the target camera and the
    true observations are triangulated against it.
    """
    H, P = len(rels), probes.shape[0]
    rows = np.empty((H, P, 2, 4))
    for i, rel in enumerate(rels):
        cam = compose_camera(ref_cam, rel, target_intrinsics)
        rows[i] = dlt_rows(cam.matrix, px_true)
    A = np.concatenate([np.broadcast_to(ref_rows, rows.shape), rows],
                       axis=-2)
    X, _ = solve_dlt_batch(A.reshape(H * P, 4, 4))
    return np.mean(np.linalg.norm(X.reshape(H, P, 3) - probes, axis=2),
                   axis=1)


def _algebraic_px(cam, pts):
    h = pts @ (cam.intrinsics @ cam.rotation).T \
        + cam.intrinsics @ cam.translation
    return h[:, :2] / h[:, 2:3]


class _PoseSampler:
    """Draws one pose-pool training sample per call."""

    def __init__(self, cfg, ds):
        self.cfg = cfg
        self.ds = ds
        self.width = POSE_FEATURE_WIDTH

    def draw(self, rng):
        f = int(rng.integers(self.ds.frames))
        hyps = generate_pose_pool(self.ds.detections[f], self.ds.cameras,
                                  self.cfg.pool_size,
                                  int(rng.integers(2**63)))
        joints = np.stack([h.joints for h in hyps])
        feats = np.stack([pose_feature(h.joints, self.ds.skeleton)
                          for h in hyps])
        truth = self.ds.poses[f]
        return {"feats": feats, "errors": _pose_pool_errors(joints, truth),
                "joints": joints, "truth": truth}


class _CameraSampler:
    """Draws one camera-pool training sample (one frame window) per call.

    Per-hypothesis error is the probe reconstruction distance (the same
    quantity the evaluation reports as its 3D error), measured on a fixed
    set of in-frustum probe points.
    """

    def __init__(self, cfg, ds):
        if len(ds.cameras) != 2:
            raise ConfigError("camera task needs a two-view dataset")
        if ds.frames < cfg.window:
            raise ConfigError(
                f"window {cfg.window} exceeds dataset of {ds.frames} frames")
        self.cfg = cfg
        self.ds = ds
        self.width = cfg.window * ds.skeleton.joint_count
        self.pair = (ds.cameras[0], ds.cameras[1])
        self.probes = sample_probe_points(ds.cameras, 32,
                                          rng_seed=cfg.seed + 7919)
        self.ref_rows = dlt_rows(self.pair[0].matrix,
                                 _algebraic_px(self.pair[0], self.probes))
        self.px_true = _algebraic_px(self.pair[1], self.probes)

    def draw(self, rng):
        start = int(rng.integers(self.ds.frames - self.cfg.window + 1))
        dets = self.ds.detections[start:start + self.cfg.window]
        hyps = generate_camera_pool(dets, self.pair, self.cfg.subset_size,
                                    self.cfg.pool_size,
                                    int(rng.integers(2**63)))
        feats = np.stack([cam_feature(h.pose, self.pair, dets,
                                      width=self.width) for h in hyps])
        errors = _pool_e3d([h.pose for h in hyps], self.pair[0],
                           self.pair[1].intrinsics, self.ref_rows,
                           self.px_true, self.probes)
        return {"feats": feats, "errors": errors, "joints": None,
                "truth": None}


def _zero_grads(net):
    return [(np.zeros_like(W), np.zeros_like(b)) for W, b in net.layers]


def train(cfg: TrainConfig, dataset: SyntheticDataset):
    """Fit a scoring network on a synthetic dataset.

    Returns (network, report).  The report carries the config echo, its
    fingerprint, the per-iteration loss history, and the optimizer step
    count; it contains no timestamps, so identical configs reproduce it
    byte for byte.
    """
    sampler = (_PoseSampler if cfg.task == "pose" else _CameraSampler)(
        cfg, dataset)
    net = (ScoringNetwork.for_pose(sampler.width, seed=cfg.seed)
           if cfg.task == "pose"
           else ScoringNetwork.for_camera(sampler.width, seed=cfg.seed))
    rng = np.random.default_rng(cfg.seed)
    weights = cfg.loss_weights
    step = net.adam_step if cfg.optimizer == "adam" else net.sgd_step
    acc, acc_n, steps = _zero_grads(net), 0, 0
    history = []

    def accumulate(sample):
        noise = sample_gumbel(rng, cfg.pool_size)
        loss, grads, _ = pool_loss_and_grads(
            net, sample["feats"], sample["errors"], weights,
            cfg.temperature, gumbel_noise=noise,
            pool_joints=sample["joints"], truth=sample["truth"],
            strategy=cfg.strategy, rng_seed=int(rng.integers(2**63)))
        for (aW, ab), (gW, gb) in zip(acc, grads):
            aW += gW
            ab += gb
        return loss

    def apply(n):
        nonlocal acc, acc_n, steps
        step([(aW / n, ab / n) for aW, ab in acc], cfg.learning_rate)
        acc, acc_n = _zero_grads(net), 0
        steps += 1

    for _ in range(cfg.iterations):
        if cfg.batch_semantics == "steps":
            batch_losses = []
            for _ in range(cfg.batch_size):
                batch_losses.append(accumulate(sampler.draw(rng)))
            history.append(float(np.mean(batch_losses)))
            apply(cfg.batch_size)
        else:
            history.append(accumulate(sampler.draw(rng)))
            acc_n += 1
            if acc_n == cfg.batch_size:
                apply(cfg.batch_size)
    if acc_n:
        apply(acc_n)   # trailing partial batch, averaged over its size
    report = {"task": cfg.task, "config": cfg.to_dict(),
              "fingerprint": config_fingerprint(cfg),
              "loss_history": history, "optimizer_steps": steps,
              "feature_width": sampler.width}
    return net, report


def smoothed_loss(history, iteration: int, window: int = 50) -> float:
    """Mean of the `window` losses ending at `iteration` (1-based)."""
    if not 1 <= iteration <= len(history):
        raise ValueError(f"iteration {iteration} outside 1..{len(history)}")
    return float(np.mean(history[max(0, iteration - window):iteration]))


def evaluate_pose(net, dataset, strategies=EVAL_STRATEGIES, pool_size=200,
                  temperature=1.5, seed=0, ransac_threshold=10.0,
                  ransac_iterations=50):
    """Per-strategy pose metrics over every frame of a dataset.

    Scoring is noise-free (plain tempered softmax).  Strategies may
    include "ransac" for the consensus baseline.  Returns a report dict:
    per strategy, the per-frame MPJPE list, its mean, and the six
    symmetry-prior variances of the selected pose sequence.
    """
    if net.task != "pose":
        raise TaskMismatch(f"pose evaluation got a {net.task!r} network")
    rng = np.random.default_rng(seed)
    frame_errors = {s: [] for s in strategies}
    sequences = {s: [] for s in strategies}
    for f, det in enumerate(dataset.detections):
        hyps = generate_pose_pool(det, dataset.cameras, pool_size,
                                  int(rng.integers(2**63)))
        pool = HypothesisPool(hyps)
        feats = np.stack([pose_feature(h.joints, dataset.skeleton)
                          for h in hyps])
        pool.scores = net.forward(feats)
        pool.probs = tempered_softmax(pool.scores, temperature)
        joints = np.stack([h.joints for h in hyps])
        errors = _pose_pool_errors(joints, dataset.poses[f])
        for s in strategies:
            if s == "ransac":
                est = ransac_triangulation_baseline(
                    det, dataset.cameras, threshold_px=ransac_threshold,
                    iterations=ransac_iterations,
                    rng_seed=int(rng.integers(2**63)))
            else:
                est = select(pool, s, errors=errors,
                             rng_seed=int(rng.integers(2**63)))
            frame_errors[s].append(mpjpe(est, dataset.poses[f]))
            sequences[s].append(est)
    report = {}
    for s in strategies:
        entry = {"mpjpe_mean": float(np.mean(frame_errors[s])),
                 "mpjpe_per_frame": frame_errors[s]}
        if dataset.frames >= 2:
            entry["prior_variance"] = pose_prior_variance(
                np.stack(sequences[s]), dataset.skeleton).tolist()
        report[s] = entry
    return report


def evaluate_camera(net, dataset, strategies=EVAL_STRATEGIES,
                    pool_size=100, subset_size=None, temperature=1.2, seed=0,
                    probe_count=40, include_8pt=True):
    """Per-strategy relative-pose metrics from one pool over the whole
    two-view dataset, plus the all-correspondence eight-point baseline.

    subset_size None applies the 3% rule over the correspondences the
    dataset actually offers.
    """
    if net.task != "camera":
        raise TaskMismatch(f"camera evaluation got a {net.task!r} network")
    if len(dataset.cameras) != 2:
        raise ConfigError("camera evaluation needs a two-view dataset")
    pair = (dataset.cameras[0], dataset.cameras[1])
    truth = relative_pose(*pair)
    rng = np.random.default_rng(seed)
    if subset_size is None:
        subset_size = default_subset_size(
            available_correspondences(dataset.detections).shape[0])
    hyps = generate_camera_pool(dataset.detections, pair, subset_size,
                                pool_size, int(rng.integers(2**63)))
    pool = HypothesisPool(hyps)
    feats = np.stack([cam_feature(h.pose, pair, dataset.detections,
                                  width=net.input_width) for h in hyps])
    pool.scores = net.forward(feats)
    pool.probs = tempered_softmax(pool.scores, temperature)
    probes = sample_probe_points(dataset.cameras, probe_count,
                                 rng_seed=seed + 7919)
    ref_rows = dlt_rows(pair[0].matrix, _algebraic_px(pair[0], probes))
    px_true = _algebraic_px(pair[1], probes)
    pool_errors = _pool_e3d([h.pose for h in hyps], pair[0],
                            pair[1].intrinsics, ref_rows, px_true, probes)
    report = {}
    for s in strategies:
        est = select(pool, s, errors=pool_errors,
                     rng_seed=int(rng.integers(2**63)))
        report[s] = camera_errors(est, truth, pair[0], pair[1].intrinsics,
                                  probes)
    if include_8pt:
        est = vanilla_8pt_baseline(dataset.detections, pair)
        report["baseline_8pt"] = camera_errors(est, truth, pair[0],
                                               pair[1].intrinsics, probes)
    return report


def ransac_triangulation_baseline(det: DetectionSet, cameras,
                                  threshold_px: float = 10.0,
                                  iterations: int = 50,
                                  rng_seed=0) -> np.ndarray:
    """Per-joint consensus triangulation.

    Candidate minimal hypotheses are two-view triangulations: every pair
    when the valid views allow at most `iterations` pairs, otherwise
    `iterations` pairs sampled without replacement.  Views whose
    reprojection error is under threshold_px form the consensus set; the
    winner (most inliers, then lower mean reprojection error, remaining
    ties to the earlier candidate) is refit on its consensus set.  If no
    candidate
    gets two inliers (e.g. threshold 0), the candidate with the lowest
    mean reprojection error wins unrefit.
    """
    rng = np.random.default_rng(rng_seed)
    J = det.valid.shape[0]
    out = np.empty((J, 3))
    for j in range(J):
        views = np.flatnonzero(det.valid[j])
        if views.size < 2:
            raise NoValidPair(f"joint {j} visible in {views.size} view(s)")
        pairs = [(a, b) for i, a in enumerate(views) for b in views[i + 1:]]
        if len(pairs) > iterations:
            keep = rng.choice(len(pairs), iterations, replace=False)
            pairs = [pairs[i] for i in sorted(keep)]
        best = None   # (inliers, -mean_err, candidate index, X, mask)
        for ci, (a, b) in enumerate(pairs):
            try:
                X = triangulate([cameras[a], cameras[b]],
                                det.keypoints[j, [a, b]])
            except DegenerateGeometry:
                continue
            errs = np.full(views.size, np.inf)
            for vi, v in enumerate(views):
                try:
                    errs[vi] = np.linalg.norm(project(cameras[v], X)
                                              - det.keypoints[j, v])
                except PointBehindCamera:
                    pass
            inliers = errs < threshold_px
            finite = errs[np.isfinite(errs)]
            mean_err = float(finite.mean()) if finite.size else np.inf
            key = (int(inliers.sum()), -mean_err, -ci)
            if best is None or key > best[0]:
                best = (key, X, inliers)
        if best is None:
            raise DegenerateGeometry(f"joint {j}: no usable view pair")
        key, X, inliers = best
        if key[0] >= 2:
            consensus = views[inliers]
            try:
                X = triangulate([cameras[v] for v in consensus],
                                det.keypoints[j, consensus])
            except DegenerateGeometry:
                pass   # keep the minimal-pair estimate
        out[j] = X
    return out


def vanilla_8pt_baseline(dets, cam_pair, scale=None) -> RelativePose:
    """Single eight-point solve on every valid correspondence at once,
    decomposed and scaled exactly like the pooled hypotheses."""
    cam_a, cam_b = cam_pair
    if scale is None:
        scale = float(np.linalg.norm(relative_pose(cam_a, cam_b).translation))
    rows = []
    for d in dets:
        ok = d.valid[:, 0] & d.valid[:, 1]
        rows.append(np.concatenate([d.keypoints[ok, 0], d.keypoints[ok, 1]],
                                   axis=1))
    corrs = np.concatenate(rows, axis=0)
    F = eight_point(corrs)
    return decompose_to_pose(F, cam_a.intrinsics, cam_b.intrinsics, corrs,
                             scale=scale)


def _self_calibrated_scale(dets, ref_cam, unit_cam, skeleton) -> float:
    """Metric baseline length from the skeleton template.

    Triangulates every correspondence the pair observes with the target
    camera placed at unit baseline; a two-view reconstruction scales
    linearly with the assumed baseline, so the median ratio of template
    bone length to reconstructed bone length IS the baseline in mm.
    """
    kp = np.stack([d.keypoints for d in dets])
    ok = np.stack([d.valid for d in dets]).all(axis=2)
    f_idx, j_idx = np.nonzero(ok)
    rows_ref = dlt_rows(ref_cam.matrix, kp[f_idx, j_idx, 0])
    rows_tgt = dlt_rows(unit_cam.matrix, kp[f_idx, j_idx, 1])
    pts3, _ = solve_dlt_batch(np.concatenate([rows_ref, rows_tgt], axis=-2))
    joints = np.full((len(dets), skeleton.joint_count, 3), np.nan)
    joints[f_idx, j_idx] = pts3
    child = np.arange(1, skeleton.joint_count)
    parent = np.asarray(skeleton.parents[1:])
    lengths = np.linalg.norm(joints[:, child] - joints[:, parent], axis=2)
    ratios = np.asarray(skeleton.bone_lengths) / lengths
    ratios = ratios[np.isfinite(ratios)]
    if ratios.size == 0:
        raise InsufficientViews("no bone observed by both views")
    return float(np.median(ratios))


def estimate_pairwise_extrinsics(cam_net, dataset, subset_size=None,
                                 pool_size=100, temperature=1.2, seed=0):
    """Relative pose of every camera against reference camera 0, via the
    scored pool pipeline with weight selection.  subset_size None applies
    the 3% rule per camera pair.

    The blend fixes the rotation and the translation direction; the
    translation magnitude comes from self-calibration against the
    skeleton template (two views alone cannot determine metric scale).
    """
    rng = np.random.default_rng(seed)
    ref = dataset.cameras[0]
    estimates = []
    for v in range(1, len(dataset.cameras)):
        pair = (ref, dataset.cameras[v])
        dets = [DetectionSet(d.frame_id, d.keypoints[:, [0, v]],
                             d.valid[:, [0, v]]) for d in dataset.detections]
        sub = subset_size if subset_size is not None else \
            default_subset_size(available_correspondences(dets).shape[0])
        hyps = generate_camera_pool(dets, pair, sub, pool_size,
                                    int(rng.integers(2**63)))
        pool = HypothesisPool(hyps)
        feats = np.stack([cam_feature(h.pose, pair, dets,
                                      width=cam_net.input_width)
                          for h in hyps])
        pool.scores = cam_net.forward(feats)
        pool.probs = tempered_softmax(pool.scores, temperature)
        blend = select(pool, "weight")
        direction = blend.translation / np.linalg.norm(blend.translation)
        unit_cam = compose_camera(ref, RelativePose(blend.rotation,
                                                    direction),
                                  dataset.cameras[v].intrinsics)
        scale = _self_calibrated_scale(dets, ref, unit_cam,
                                       dataset.skeleton)
        estimates.append(RelativePose(blend.rotation, direction * scale))
    return estimates


ABLATION_MODES = ("known", "est_r", "est_t", "est_rt")


def extrinsics_ablation(pose_net, cam_net, dataset, pool_size=200,
                        temperature=1.5, subset_size=None, cam_pool_size=100,
                        cam_temperature=1.2, seed=0, eval_frames=None):
    """Weight-strategy MPJPE under four extrinsics regimes.

    known: true cameras; est_r: estimated rotations with true
    translations; est_t: the reverse; est_rt: both estimated.  Estimates
    come from the camera pipeline, each view paired against reference
    camera 0, using every frame; estimated translations carry
    self-calibrated scale (direction from the blend, magnitude from the
    skeleton template).  The pose comparison runs on the first
    `eval_frames` frames (all of them when None).  Returns
    {mode: mean MPJPE}.
    """
    estimates = estimate_pairwise_extrinsics(
        cam_net, dataset, subset_size=subset_size, pool_size=cam_pool_size,
        temperature=cam_temperature, seed=seed)
    ref = dataset.cameras[0]
    true_rels = [relative_pose(ref, c) for c in dataset.cameras[1:]]
    regimes = {"known": dataset.cameras}
    for mode in ("est_r", "est_t", "est_rt"):
        cams = [ref]
        for cam, true_rel, est in zip(dataset.cameras[1:], true_rels,
                                      estimates):
            rot = est.rotation if mode in ("est_r", "est_rt") \
                else true_rel.rotation
            t = est.translation if mode in ("est_t", "est_rt") \
                else true_rel.translation
            cams.append(compose_camera(ref, RelativePose(rot, t),
                                       cam.intrinsics))
        regimes[mode] = cams
    rng = np.random.default_rng(seed)
    n_eval = dataset.frames if eval_frames is None \
        else min(eval_frames, dataset.frames)
    # one pool seed per frame, shared by all four regimes, so the columns
    # differ only through the camera sets
    pool_seeds = [int(rng.integers(2**63)) for _ in range(n_eval)]
    out = {}
    for mode in ABLATION_MODES:
        cams = regimes[mode]
        errs = []
        for f, det in enumerate(dataset.detections[:n_eval]):
            hyps = generate_pose_pool(det, cams, pool_size, pool_seeds[f])
            pool = HypothesisPool(hyps)
            feats = np.stack([pose_feature(h.joints, dataset.skeleton)
                              for h in hyps])
            pool.scores = pose_net.forward(feats)
            pool.probs = tempered_softmax(pool.scores, temperature)
            errs.append(mpjpe(select(pool, "weight"), dataset.poses[f]))
        out[mode] = float(np.mean(errs))
    return out


def _pyify(obj):
    if isinstance(obj, dict):
        return {k: _pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pyify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _pyify(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def write_report_json(report: dict, path) -> None:
    """Canonical JSON: sorted keys, repr-precision floats, no
    timestamps, newline-terminated."""
    with open(path, "w") as fh:
        json.dump(_pyify(report), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v
                        for v in row])


def write_gnuplot_dat(path, columns: dict) -> None:
    """Whitespace table with a `# name name ...` header, one row per
    index, ready for `plot "file" using 1:2`."""
    names = list(columns)
    cols = [np.asarray(columns[n], dtype=np.float64) for n in names]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns must share a length")
    with open(path, "w") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for i in range(n):
            fh.write(" ".join(f"{c[i]:.17g}" for c in cols) + "\n")
