"""Selection strategies over scored pools and the three-term training
loss.

A scored pool carries one probability per hypothesis; a strategy turns
that into a single estimate: either by blending (probability-weighted or
uniform average) or by picking an index (highest/lowest probability, a
draw from the distribution, a uniform draw, or the oracle best/worst by
true error, which exist only to bound the others during evaluation).

The training loss combines the expected error under the distribution, the
distribution's entropy (pressure toward committing), and the error of the
finally selected estimate, with per-task weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, MissingErrors
from .geometry import RelativePose, quat_weighted_average
from .hypotheses import PoseHypothesis

STRATEGIES = ("weight", "avg", "most", "least", "stoch", "random", "best",
              "worst")
ORACLE_STRATEGIES = ("best", "worst")
BLEND_STRATEGIES = ("weight", "avg")

ENTROPY_CLAMP = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the three loss terms (all nonnegative)."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("loss weights must be nonnegative")


POSE_LOSS_WEIGHTS = LossWeights(1.0, 0.01, 0.02)
CAMERA_LOSS_WEIGHTS = LossWeights(1.0, 0.01, 0.0)


def _is_pose_pool(pool) -> bool:
    return isinstance(pool.hypotheses[0], PoseHypothesis)


def blend_pose(pool, weights) -> np.ndarray:
    """Per-joint weighted coordinate average over a pose pool."""
    joints = np.stack([h.joints for h in pool.hypotheses])
    w = np.asarray(weights, dtype=np.float64)
    return np.einsum("i,ijk->jk", w, joints)


def blend_camera(pool, weights) -> RelativePose:
    """Weighted quaternion average for rotation, weighted arithmetic mean
    for translation."""
    w = np.asarray(weights, dtype=np.float64)
    rot = quat_weighted_average([h.pose.rotation for h in pool.hypotheses], w)
    t = w @ np.stack([h.pose.translation for h in pool.hypotheses])
    return RelativePose(rot, t)


def select_index(pool, strategy: str, errors=None, rng_seed=None) -> int:
    """Index-valued strategies; ties resolve to the lowest index."""
    if strategy in ("most", "least"):
        if pool.probs is None:
            raise ValueError(f"{strategy!r} needs a scored pool")
        return int(np.argmax(pool.probs) if strategy == "most"
                   else np.argmin(pool.probs))
    if strategy in ("stoch", "random"):
        if rng_seed is None:
            raise ValueError(f"{strategy!r} needs an rng seed")
        rng = np.random.default_rng(rng_seed)
        if strategy == "random":
            return int(rng.integers(len(pool)))
        if pool.probs is None:
            raise ValueError("'stoch' needs a scored pool")
        return int(rng.choice(len(pool), p=pool.probs))
    if strategy in ORACLE_STRATEGIES:
        if errors is None:
            raise MissingErrors(f"{strategy!r} needs per-hypothesis errors")
        e = np.asarray(errors, dtype=np.float64)
        if e.shape != (len(pool),):
            raise LengthMismatch(f"{e.shape[0]} errors for pool of {len(pool)}")
        return int(np.argmin(e) if strategy == "best" else np.argmax(e))
    raise ValueError(f"unknown or non-index strategy {strategy!r}")


def select(pool, strategy: str, errors=None, rng_seed=None):
    """Estimate from a scored pool: a (J, 3) pose for pose pools, a
    RelativePose for camera pools.

    weight/avg blend the pool; the rest pick one hypothesis.  best/worst
    require per-hypothesis errors and raise MissingErrors without them.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if len(pool) == 0:
        raise ValueError("empty pool")
    pose_pool = _is_pose_pool(pool)
    if strategy in BLEND_STRATEGIES:
        if strategy == "weight":
            if pool.probs is None:
                raise ValueError("'weight' needs a scored pool")
            w = pool.probs
        else:
            w = np.full(len(pool), 1.0 / len(pool))
        return blend_pose(pool, w) if pose_pool else blend_camera(pool, w)
    i = select_index(pool, strategy, errors=errors, rng_seed=rng_seed)
    h = pool.hypotheses[i]
    return h.joints if pose_pool else h.pose


def stochastic_loss(errors, probs) -> float:
    """Expected error under the pool distribution (dot product)."""
    e = np.asarray(errors, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if e.shape != p.shape or e.ndim != 1:
        raise LengthMismatch(f"errors {e.shape} vs probs {p.shape}")
    return float(e @ p)


def entropy_loss(probs) -> float:
    """-sum p log p; entries below 1e-12 contribute zero (x log x -> 0)."""
    p = np.asarray(probs, dtype=np.float64)
    big = p >= ENTROPY_CLAMP
    return float(-np.sum(p[big] * np.log(p[big])))


def estimation_loss(selected_error: float) -> float:
    """The selected estimate's own task error, passed through."""
    return float(selected_error)


def total_loss(l_stoch: float, l_entropy: float, l_est: float,
               w: LossWeights) -> float:
    return w.alpha * l_stoch + w.beta * l_entropy + w.gamma * l_est
