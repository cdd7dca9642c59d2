"""Pool scoring: a fully connected score network, tempered softmax with
optional Gumbel noise, and the optimizers used to fit the network.

The network maps one feature vector per hypothesis to one raw score; a
pool's scores become selection probabilities through a temperature softmax
that is perturbed with Gumbel noise while training so that low-scored
hypotheses keep getting explored.  The raw score is used directly as the
softmax logit.  All arithmetic is float64 and gradients are analytic: the
caller provides dL/dprobabilities, softmax_backward turns that into
dL/dscores, and ScoringNetwork.backward turns that into dL/dparameters.
"""

from __future__ import annotations

import numpy as np

from .errors import (NoCachedForward, ShapeMismatch, TaskMismatch,
                     WidthMismatch)

POSE_HIDDEN = (1000, 900, 900, 900, 700)
CAMERA_HIDDEN = (1000, 900, 900)
TASKS = ("pose", "camera")

# Millimetre-scaled features keep hidden activations O(1)
DEFAULT_INPUT_SCALE = 1e-3


def tempered_softmax(raw_scores, temperature: float) -> np.ndarray:
    """softmax(raw / temperature), stabilized by max subtraction."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(raw_scores, dtype=np.float64) / temperature
    e = np.exp(z - z.max())
    return e / e.sum()


def sample_gumbel(rng, size) -> np.ndarray:
    """Standard Gumbel draws g = -log(-log(u)), u clamped away from the
    endpoints so the double log stays finite."""
    u = np.clip(np.random.default_rng(rng).random(size), 1e-12, 1.0 - 1e-12)
    return -np.log(-np.log(u))


def gumbel_softmax(raw_scores, temperature: float, rng=None) -> np.ndarray:
    """Selection probabilities for a pool of raw scores.

    With an rng (Generator or seed) each score is perturbed by standard
    Gumbel noise, which makes the downstream argmax a sample instead of a
    fixed choice; with rng=None this is the plain tempered softmax used at
    evaluation time.
    """
    raw = np.asarray(raw_scores, dtype=np.float64)
    if rng is None:
        return tempered_softmax(raw, temperature)
    return tempered_softmax(raw + sample_gumbel(rng, raw.shape), temperature)


def softmax_backward(grad_probs, probs, temperature: float) -> np.ndarray:
    """Chain dL/dprobabilities back through the tempered softmax.

    Gumbel noise is additive in the logits, so the Jacobian is the plain
    softmax one over temperature:
    dL/draw_i = (1/T) * p_i * (dL/dp_i - sum_j p_j dL/dp_j).
    """
    p = np.asarray(probs, dtype=np.float64)
    g = np.asarray(grad_probs, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 1:
        raise ShapeMismatch(f"probs {p.shape} vs grads {g.shape}")
    return p * (g - float(p @ g)) / temperature


class ScoringNetwork:
    """ReLU multilayer perceptron with a scalar linear output.

    Parameters are He-uniform initialized (fan-in) from `seed`.  Inputs
    are multiplied by `input_scale` before the first layer; the scale is
    part of the model and is serialized with the weights.  `task` tags
    what the network scores ("pose" or "camera") so weights cannot be
    loaded into the wrong pipeline.
    """

    def __init__(self, input_width: int, hidden=POSE_HIDDEN,
                 task: str = "pose", seed=0,
                 input_scale: float = DEFAULT_INPUT_SCALE):
        if task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {task!r}")
        self.input_width = int(input_width)
        self.task = task
        self.input_scale = float(input_scale)
        rng = np.random.default_rng(seed)
        sizes = [self.input_width, *hidden, 1]
        self.layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            self.layers.append([rng.uniform(-limit, limit, (fan_out, fan_in)),
                                np.zeros(fan_out)])
        self._cache = None
        self._adam = None

    @classmethod
    def for_pose(cls, input_width, seed=0):
        return cls(input_width, POSE_HIDDEN, "pose", seed)

    @classmethod
    def for_camera(cls, input_width, seed=0):
        return cls(input_width, CAMERA_HIDDEN, "camera", seed)

    @property
    def hidden(self) -> tuple:
        return tuple(W.shape[0] for W, _ in self.layers[:-1])

    def forward(self, features) -> np.ndarray:
        """Raw scores (N,) for features (N, input_width); caches the
        activations so backward() can run."""
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats[None]
        if feats.ndim != 2 or feats.shape[1] != self.input_width:
            raise WidthMismatch(
                f"features {feats.shape} for input width {self.input_width}")
        a = feats * self.input_scale
        inputs, masks = [], []
        for i, (W, b) in enumerate(self.layers):
            inputs.append(a)
            z = a @ W.T + b
            if i < len(self.layers) - 1:
                mask = z > 0
                masks.append(mask)
                a = np.where(mask, z, 0.0)
            else:
                a = z
        self._cache = (inputs, masks)
        return a[:, 0]

    def backward(self, grad_scores) -> list:
        """dL/dparameters for the last forward() batch, given dL/dscores.

        Returns one (dW, db) pair per layer.  Raises NoCachedForward if no
        forward pass is cached.
        """
        if self._cache is None:
            raise NoCachedForward("backward() before forward()")
        inputs, masks = self._cache
        delta = np.asarray(grad_scores, dtype=np.float64)
        if delta.shape != (inputs[0].shape[0],):
            raise ShapeMismatch(
                f"grad_scores {delta.shape} for batch of {inputs[0].shape[0]}")
        delta = delta[:, None]
        grads = [None] * len(self.layers)
        for i in reversed(range(len(self.layers))):
            W, _ = self.layers[i]
            grads[i] = (delta.T @ inputs[i], delta.sum(axis=0))
            if i > 0:
                delta = (delta @ W) * masks[i - 1]
        return grads

    def _check_grads(self, grads):
        if len(grads) != len(self.layers):
            raise ShapeMismatch(f"{len(grads)} gradient pairs for "
                                f"{len(self.layers)} layers")

    def sgd_step(self, grads, lr: float) -> None:
        self._check_grads(grads)
        for (W, b), (dW, db) in zip(self.layers, grads):
            W -= lr * dW
            b -= lr * db

    def adam_step(self, grads, lr: float, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> None:
        """Adam update; moments persist on the network (and serialize),
        so training can resume from a checkpoint without a cold restart."""
        self._check_grads(grads)
        if self._adam is None:
            self._adam = {"t": 0,
                          "m": [np.zeros_like(p) for pair in self.layers
                                for p in pair],
                          "v": [np.zeros_like(p) for pair in self.layers
                                for p in pair]}
        st = self._adam
        st["t"] += 1
        t = st["t"]
        flat_params = [p for pair in self.layers for p in pair]
        flat_grads = [g for pair in grads for g in pair]
        for p, g, m, v in zip(flat_params, flat_grads, st["m"], st["v"]):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            mhat = m / (1.0 - beta1 ** t)
            vhat = v / (1.0 - beta2 ** t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)

    def save(self, path) -> None:
        """Write weights (and Adam moments, if any) to an npz file.
        float64 arrays round-trip bit-exactly."""
        arrays = {"version": np.int64(1),
                  "task": np.array(self.task),
                  "input_width": np.int64(self.input_width),
                  "input_scale": np.float64(self.input_scale),
                  "layer_count": np.int64(len(self.layers))}
        for i, (W, b) in enumerate(self.layers):
            arrays[f"W{i}"] = W
            arrays[f"b{i}"] = b
        if self._adam is not None:
            arrays["adam_t"] = np.int64(self._adam["t"])
            for k, m in enumerate(self._adam["m"]):
                arrays[f"adam_m{k}"] = m
            for k, v in enumerate(self._adam["v"]):
                arrays[f"adam_v{k}"] = v
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path, expect_task: str | None = None) -> "ScoringNetwork":
        with np.load(path, allow_pickle=False) as z:
            if int(z["version"]) != 1:
                raise ValueError(f"unsupported weights version {z['version']}")
            task = str(z["task"])
            if expect_task is not None and task != expect_task:
                raise TaskMismatch(
                    f"weights are for task {task!r}, expected {expect_task!r}")
            n = int(z["layer_count"])
            layers = [[z[f"W{i}"].copy(), z[f"b{i}"].copy()]
                      for i in range(n)]
            net = cls(int(z["input_width"]),
                      tuple(W.shape[0] for W, _ in layers[:-1]), task,
                      seed=0, input_scale=float(z["input_scale"]))
            net.layers = layers
            if "adam_t" in z:
                net._adam = {"t": int(z["adam_t"]),
                             "m": [z[f"adam_m{k}"].copy()
                                   for k in range(2 * n)],
                             "v": [z[f"adam_v{k}"].copy()
                                   for k in range(2 * n)]}
        return net
