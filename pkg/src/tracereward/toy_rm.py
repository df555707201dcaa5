"""A linear toy RM trained on synthetic reasoning groups.

Each synthetic candidate has a latent quality q. The features carry q along
one hidden direction and large nuisance noise elsewhere, then the whole space
is rotated, so the model has to find the direction by gradient descent on the
combined objective.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, softmax

from .errors import ArgumentError, TrainingError
from .groups import convert_rubric_labels
from .rm import (
    CLASS_VALUES,
    GROUP_SIZE,
    N_CLASSES,
    N_DIMS,
    DimensionWeights,
    LossConfig,
    RMOutputs,
    batched_combined_loss,
)

MAGIC = "tracereward-toy-rm"


@dataclass(frozen=True)
class SyntheticConfig:
    feature_dim: int = 16
    signal_scale: float = 3.0
    signal_noise: float = 0.05
    nuisance_scale: float = 6.0
    label_jitter: float = 0.5
    # the hidden rotation is shared by every split drawn with this config
    rotation_seed: int = 0


@dataclass
class SyntheticGroups:
    features: np.ndarray  # (G, 5, d)
    labels: np.ndarray  # (G, 5, 5)
    targets: np.ndarray  # (G, 5)
    quality: np.ndarray  # (G, 5)

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, idx) -> SyntheticGroups:
        return SyntheticGroups(self.features[idx], self.labels[idx],
                               self.targets[idx], self.quality[idx])


def synthetic_groups(n_groups: int, seed: int = 0,
                     config: SyntheticConfig = SyntheticConfig()) -> SyntheticGroups:
    """Reference quality in [0.7, 1], flawed quality in [0, 0.6]."""
    if n_groups < 1:
        raise ArgumentError("n_groups must be positive")
    rng = np.random.default_rng(seed)
    d = config.feature_dim
    q = np.empty((n_groups, GROUP_SIZE))
    q[:, 0] = rng.uniform(0.7, 1.0, size=n_groups)
    q[:, 1:] = rng.uniform(0.0, 0.6, size=(n_groups, GROUP_SIZE - 1))

    raw = rng.normal(0.0, config.nuisance_scale, size=(n_groups, GROUP_SIZE, d))
    raw[..., 0] = config.signal_scale * q + rng.normal(0.0, config.signal_noise, size=q.shape)
    rotation, _ = np.linalg.qr(np.random.default_rng(config.rotation_seed).normal(size=(d, d)))
    features = raw @ rotation.T

    scores = np.clip(10.0 * q[..., None] + rng.normal(0.0, config.label_jitter,
                                                      size=q.shape + (N_DIMS,)), 0.0, 10.0)
    labels = np.empty(q.shape + (N_DIMS,), dtype=int)
    for g in range(n_groups):
        for i in range(GROUP_SIZE):
            labels[g, i] = convert_rubric_labels(list(scores[g, i]), float(10.0 * q[g, i])).class_labels
    return SyntheticGroups(features, labels, q.copy(), q)


@dataclass(frozen=True)
class ToyRMConfig:
    steps: int = 500
    learning_rate: float = 0.5
    momentum: float = 0.9
    init_scale: float = 0.01
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)


class ToyRM:
    """Linear heads from features (plus a bias) to 25 class logits and one aggregate logit."""

    def __init__(self, feature_dim: int, w_dim: np.ndarray | None = None,
                 w_total: np.ndarray | None = None, weights: DimensionWeights | None = None):
        self.feature_dim = feature_dim
        self.weights = weights or DimensionWeights()
        self.w_dim = np.zeros((feature_dim + 1, N_DIMS * N_CLASSES)) if w_dim is None else np.asarray(w_dim, float)
        self.w_total = np.zeros(feature_dim + 1) if w_total is None else np.asarray(w_total, float)
        if self.w_dim.shape != (feature_dim + 1, N_DIMS * N_CLASSES) or self.w_total.shape != (feature_dim + 1,):
            raise ArgumentError("parameter shapes do not match feature_dim")
        self.history: list[float] = []

    @classmethod
    def initialize(cls, feature_dim: int, seed: int = 0, scale: float = 0.01) -> ToyRM:
        rng = np.random.default_rng(seed)
        return cls(feature_dim,
                   rng.normal(0.0, scale, size=(feature_dim + 1, N_DIMS * N_CLASSES)),
                   rng.normal(0.0, scale, size=feature_dim + 1))

    def _augment(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.shape[-1] != self.feature_dim:
            raise ArgumentError(f"expected {self.feature_dim} features, got {x.shape[-1]}")
        return np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)

    def logits(self, features) -> tuple[np.ndarray, np.ndarray]:
        xa = self._augment(features)
        z = (xa @ self.w_dim).reshape(xa.shape[:-1] + (N_DIMS, N_CLASSES))
        return z, xa @ self.w_total

    def forward(self, features) -> RMOutputs:
        z, zt = self.logits(features)
        if z.ndim != 2:
            raise ArgumentError("forward takes one feature vector; use score() for batches")
        return RMOutputs.from_logits(z, float(zt), self.weights)

    def score(self, features) -> np.ndarray:
        """Combined score s_rm for any batch of feature vectors."""
        z, zt = self.logits(features)
        s_dim = (softmax(z, axis=-1) @ CLASS_VALUES) @ self.weights.array()
        return 0.5 * np.clip(s_dim, 0.0, 1.0) + 0.5 * expit(zt)

    def loss(self, data: SyntheticGroups, config: LossConfig = LossConfig()):
        z, zt = self.logits(data.features)
        out = batched_combined_loss(z, zt, data.labels, data.targets, self.weights, config)
        xa = self._augment(data.features)
        g_z = out.grad_dim_logits.reshape(out.grad_dim_logits.shape[:2] + (-1,))
        g_w_dim = np.einsum("gnd,gnk->dk", xa, g_z)
        g_w_total = np.einsum("gnd,gn->d", xa, out.grad_total_logits)
        return out, g_w_dim, g_w_total

    def parameters(self) -> np.ndarray:
        return np.concatenate([self.w_dim.ravel(), self.w_total])

    def save(self, path: str | Path) -> None:
        header = {"format": MAGIC, "feature_dim": self.feature_dim,
                  "weights": list(self.weights.w), "dtype": "<f8",
                  "count": int(self.parameters().size)}
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
            fh.write(self.parameters().astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> ToyRM:
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            payload = fh.read()
        if header.get("format") != MAGIC:
            raise ArgumentError(f"{path} is not a toy RM parameter file")
        d = int(header["feature_dim"])
        count = int(header["count"])
        if len(payload) != count * struct.calcsize("<d"):
            raise ArgumentError(f"{path}: expected {count} parameters")
        flat = np.frombuffer(payload, dtype="<f8").astype(float)
        n_dim = (d + 1) * N_DIMS * N_CLASSES
        return cls(d, flat[:n_dim].reshape(d + 1, -1), flat[n_dim:],
                   DimensionWeights(tuple(header["weights"])))


def toy_rm_fit(data: SyntheticGroups, config: ToyRMConfig = ToyRMConfig()) -> ToyRM:
    """Full-batch gradient descent with heavy-ball momentum."""
    if config.steps < 0:
        raise ArgumentError("steps must be non-negative")
    model = ToyRM.initialize(data.features.shape[-1], config.seed, config.init_scale)
    v_dim = np.zeros_like(model.w_dim)
    v_tot = np.zeros_like(model.w_total)
    for step in range(config.steps):
        out, g_dim, g_tot = model.loss(data, config.loss)
        if not np.isfinite(out.value):
            raise TrainingError(f"loss became non-finite at step {step}")
        model.history.append(out.value)
        v_dim = config.momentum * v_dim - config.learning_rate * g_dim
        v_tot = config.momentum * v_tot - config.learning_rate * g_tot
        model.w_dim += v_dim
        model.w_total += v_tot
    return model


@dataclass(frozen=True)
class ToyEvaluation:
    pairwise_acc: float
    group_acc: float
    pairs: int
    groups: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(model: ToyRM, data: SyntheticGroups) -> ToyEvaluation:
    """Reference-vs-flawed accuracy; ties count as losses."""
    s = model.score(data.features)
    wins = s[:, :1] > s[:, 1:]
    return ToyEvaluation(float(wins.mean()), float(wins.all(axis=1).mean()),
                         int(wins.size), int(len(data)))
