"""Reasoning-RM score aggregation and training losses with analytic gradients.

The RM emits, per candidate, five rubric heads of five class logits each and
one aggregate logit. Scores:

    s_dim   = sum_k w_k sum_c p_kc * c/4
    s_total = sigmoid(z_total)
    s_rm    = (s_dim + s_total) / 2

Losses are written in log space and return their gradient with respect to
the logits, never the probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .errors import ArgumentError, ConfigError, DomainError

N_DIMS = 5
N_CLASSES = 5
GROUP_SIZE = 5
CLASS_VALUES = np.arange(N_CLASSES) / (N_CLASSES - 1)


@dataclass(frozen=True)
class DimensionWeights:
    w: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)

    def __post_init__(self):
        w = tuple(float(v) for v in self.w)
        if len(w) != N_DIMS:
            raise ConfigError(f"need {N_DIMS} dimension weights, got {len(w)}")
        if any(not np.isfinite(v) or v < 0 for v in w):
            raise ConfigError("dimension weights must be finite and non-negative")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ConfigError(f"dimension weights must sum to 1, got {sum(w)!r}")
        object.__setattr__(self, "w", w)

    def array(self) -> np.ndarray:
        return np.asarray(self.w)


UNIFORM_WEIGHTS = DimensionWeights()


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.5
    beta: float = 0.7
    huber_delta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be non-negative")
        if self.huber_delta <= 0:
            raise ConfigError("huber_delta must be positive")


def _weights(weights) -> np.ndarray:
    if weights is None:
        return UNIFORM_WEIGHTS.array()
    if isinstance(weights, DimensionWeights):
        return weights.array()
    return DimensionWeights(tuple(weights)).array()


def dim_score(dim_probs, weights=None) -> float:
    """Rubric-head score in [0, 1] from a 5x5 probability table."""
    p = np.asarray(dim_probs, dtype=float)
    if p.shape != (N_DIMS, N_CLASSES):
        raise ArgumentError(f"dim_probs must have shape (5, 5), got {p.shape}")
    return float(_weights(weights) @ (p @ CLASS_VALUES))


def combine_rm_score(s_dim: float, s_total: float) -> float:
    for name, v in (("s_dim", s_dim), ("s_total", s_total)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {v!r}")
    return 0.5 * s_dim + 0.5 * s_total


@dataclass(frozen=True)
class RMOutputs:
    dim_probs: np.ndarray
    total_logit: float
    s_dim: float
    s_total: float
    s_rm: float

    @classmethod
    def from_logits(cls, dim_logits, total_logit: float, weights=None) -> RMOutputs:
        z = np.asarray(dim_logits, dtype=float)
        if z.shape != (N_DIMS, N_CLASSES):
            raise ArgumentError(f"dim_logits must have shape (5, 5), got {z.shape}")
        probs = softmax(z, axis=-1)
        s_dim = min(1.0, max(0.0, dim_score(probs, weights)))
        s_total = float(expit(total_logit))
        return cls(probs, float(total_logit), s_dim, s_total, combine_rm_score(s_dim, s_total))

    def to_dict(self) -> dict:
        return {
            "dim_probs": self.dim_probs.tolist(),
            "total_logit": self.total_logit,
            "s_dim": self.s_dim,
            "s_total": self.s_total,
            "s_rm": self.s_rm,
        }


def _check_labels(labels, shape) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != shape:
        raise ArgumentError(f"labels must have shape {shape}, got {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ArgumentError("labels must be integer class indices")
        y = y.astype(int)
    if y.size and (y.min() < 0 or y.max() >= N_CLASSES):
        raise ArgumentError("labels must lie in {0, ..., 4}")
    return y


def dim_loss(dim_logits, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the five rubric heads.

    Returns the value and its gradient with respect to the 5x5 class logits.
    """
    z = np.asarray(dim_logits, dtype=float)
    if z.shape != (N_DIMS, N_CLASSES):
        raise ArgumentError(f"dim_logits must have shape (5, 5), got {z.shape}")
    y = _check_labels(labels, (N_DIMS,))
    logp = log_softmax(z, axis=-1)
    rows = np.arange(N_DIMS)
    value = -logp[rows, y].mean()
    grad = np.exp(logp)
    grad[rows, y] -= 1.0
    return float(value), grad / N_DIMS


def dim_loss_probs(dim_probs, labels) -> float:
    """Cross-entropy from probabilities; +inf if a target class has zero mass."""
    p = np.asarray(dim_probs, dtype=float)
    y = _check_labels(labels, (N_DIMS,))
    target = p[np.arange(N_DIMS), y]
    if np.any(target <= 0):
        return float("inf")
    return float(-np.log(target).mean())


def huber(residual, delta: float = 1.0):
    """Huber value and derivative with respect to the residual."""
    r = np.asarray(residual, dtype=float)
    a = np.abs(r)
    value = np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))
    deriv = np.where(a <= delta, r, delta * np.sign(r))
    return value, deriv


def total_loss(total_logit: float, target: float, huber_delta: float = 1.0) -> tuple[float, float]:
    """Huber loss between sigmoid(logit) and the clipped target; gradient wrt the logit."""
    s = float(expit(total_logit))
    t = min(1.0, max(0.0, float(target)))
    value, deriv = huber(s - t, huber_delta)
    return float(value), float(deriv) * s * (1.0 - s)


def rank_loss(s_pos: float, s_neg: float) -> tuple[float, tuple[float, float]]:
    """-log sigmoid(s_pos - s_neg) and its gradients wrt (s_pos, s_neg)."""
    d = float(s_pos) - float(s_neg)
    value = float(np.logaddexp(0.0, -d))
    g = -float(expit(-d))
    return value, (g, -g)


@dataclass
class GroupSample:
    """One reference (index 0) and its flawed candidates, as raw head logits."""

    dim_logits: np.ndarray  # (n, 5, 5)
    total_logits: np.ndarray  # (n,)
    labels: np.ndarray  # (n, 5) class indices
    targets: np.ndarray  # (n,) aggregate targets
    weights: DimensionWeights = field(default_factory=DimensionWeights)

    def __post_init__(self):
        self.dim_logits = np.asarray(self.dim_logits, dtype=float)
        self.total_logits = np.asarray(self.total_logits, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        n = self.dim_logits.shape[0] if self.dim_logits.ndim == 3 else -1
        if n != GROUP_SIZE or self.dim_logits.shape != (GROUP_SIZE, N_DIMS, N_CLASSES):
            raise ArgumentError(
                f"a group sample holds exactly {GROUP_SIZE} candidates of 5x5 logits, "
                f"got shape {self.dim_logits.shape}"
            )
        if self.total_logits.shape != (GROUP_SIZE,) or self.targets.shape != (GROUP_SIZE,):
            raise ArgumentError("total_logits and targets need one entry per candidate")
        self.labels = _check_labels(self.labels, (GROUP_SIZE, N_DIMS))

    def outputs(self) -> list[RMOutputs]:
        return [RMOutputs.from_logits(z, t, self.weights)
                for z, t in zip(self.dim_logits, self.total_logits)]


@dataclass(frozen=True)
class LossBreakdown:
    value: float
    dim: float
    total: float
    rank: float
    grad_dim_logits: np.ndarray
    grad_total_logits: np.ndarray


def batched_combined_loss(dim_logits, total_logits, labels, targets, weights=None,
                          config: LossConfig = LossConfig()) -> LossBreakdown:
    """Combined objective averaged over a batch of groups.

    Shapes: dim_logits (B, n, 5, 5), total_logits (B, n), labels (B, n, 5),
    targets (B, n). Candidate 0 of every group is the reference; the rank
    term averages over all (reference, flawed) pairs using s_rm on both sides.
    """
    z = np.asarray(dim_logits, dtype=float)
    zt = np.asarray(total_logits, dtype=float)
    y = np.asarray(labels, dtype=int)
    t = np.clip(np.asarray(targets, dtype=float), 0.0, 1.0)
    w = _weights(weights)
    B, n = zt.shape
    if n < 2:
        raise ArgumentError("a group needs a reference and at least one flawed candidate")

    # dimension cross-entropy, mean over heads and candidates
    logp = log_softmax(z, axis=-1)
    p = np.exp(logp)
    picked = np.take_along_axis(logp, y[..., None], axis=-1)[..., 0]
    l_dim = -picked.mean(axis=-1).mean(axis=-1)  # (B,)
    onehot = np.zeros_like(p)
    np.put_along_axis(onehot, y[..., None], 1.0, axis=-1)
    g_dim = (p - onehot) / (N_DIMS * n)

    # aggregate regression
    s_tot = expit(zt)
    h_val, h_der = huber(s_tot - t, config.huber_delta)
    sig_der = s_tot * (1.0 - s_tot)
    l_tot = h_val.mean(axis=-1)
    g_tot = config.alpha * h_der * sig_der / n

    # ranking on the combined score
    expect = p @ CLASS_VALUES  # (B, n, 5)
    s_dim = expect @ w  # (B, n)
    s_rm = 0.5 * s_dim + 0.5 * s_tot
    d = s_rm[:, :1] - s_rm[:, 1:]  # (B, n-1)
    l_rank = np.logaddexp(0.0, -d).mean(axis=-1)
    g_d = -expit(-d) / (n - 1)  # dL/dd per pair
    g_srm = np.concatenate([g_d.sum(axis=-1, keepdims=True), -g_d], axis=-1) * config.beta
    # ds_dim/dz_kc = w_k p_kc (c/4 - E_k)
    ds_dz = w[None, None, :, None] * p * (CLASS_VALUES - expect[..., None])
    g_dim = g_dim + (0.5 * g_srm)[..., None, None] * ds_dz
    g_tot = g_tot + 0.5 * g_srm * sig_der

    per_group = l_dim + config.alpha * l_tot + config.beta * l_rank
    return LossBreakdown(
        value=float(per_group.mean()),
        dim=float(l_dim.mean()),
        total=float(l_tot.mean()),
        rank=float(l_rank.mean()),
        grad_dim_logits=g_dim / B,
        grad_total_logits=g_tot / B,
    )


def combined_loss(sample: GroupSample, config: LossConfig = LossConfig()) -> LossBreakdown:
    """Combined objective for one 1+4 group sample."""
    out = batched_combined_loss(sample.dim_logits[None], sample.total_logits[None],
                                sample.labels[None], sample.targets[None],
                                sample.weights, config)
    return LossBreakdown(out.value, out.dim, out.total, out.rank,
                         out.grad_dim_logits[0], out.grad_total_logits[0])


# ---------------------------------------------------------------- gradcheck

def numeric_gradient(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn(x)
        flat[i] = orig - h
        down = fn(x)
        flat[i] = orig
        g[i] = (up - down) / (2 * h)
    return grad


def relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    a = np.asarray(analytic, dtype=float)
    b = np.asarray(numeric, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale))


@dataclass(frozen=True)
class GradcheckResult:
    loss: str
    points: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def to_dict(self) -> dict:
        return {"loss": self.loss, "points": self.points,
                "max_rel_error": self.max_rel_error, "tolerance": self.tolerance,
                "pass": self.passed}


def _random_group(rng: np.random.Generator) -> GroupSample:
    return GroupSample(
        dim_logits=rng.normal(0.0, 1.5, size=(GROUP_SIZE, N_DIMS, N_CLASSES)),
        total_logits=rng.normal(0.0, 1.5, size=GROUP_SIZE),
        labels=rng.integers(0, N_CLASSES, size=(GROUP_SIZE, N_DIMS)),
        targets=rng.uniform(0.0, 1.0, size=GROUP_SIZE),
    )


def gradcheck(points: int = 100, seed: int = 0, h: float = 1e-5,
              tolerance: float = 1e-4) -> list[GradcheckResult]:
    """Compare every analytic loss gradient with central differences at random points."""
    rng = np.random.default_rng(seed)
    worst = {"dim": 0.0, "total": 0.0, "rank": 0.0, "combined": 0.0}
    cfg = LossConfig()
    for _ in range(points):
        z = rng.normal(0.0, 1.5, size=(N_DIMS, N_CLASSES))
        y = rng.integers(0, N_CLASSES, size=N_DIMS)
        _, g = dim_loss(z, y)
        num = numeric_gradient(lambda v: dim_loss(v, y)[0], z, h)
        worst["dim"] = max(worst["dim"], relative_error(g, num))

        zt, tgt = rng.normal(0.0, 2.0), rng.uniform(0.0, 1.0)
        _, g = total_loss(zt, tgt)
        num = numeric_gradient(lambda v: total_loss(float(v[0]), tgt)[0], np.array([zt]), h)
        worst["total"] = max(worst["total"], relative_error([g], num))

        sp, sn = rng.uniform(0.0, 1.0, size=2)
        _, gr = rank_loss(sp, sn)
        num = numeric_gradient(lambda v: rank_loss(v[0], v[1])[0], np.array([sp, sn]), h)
        worst["rank"] = max(worst["rank"], relative_error(gr, num))

        s = _random_group(rng)
        out = combined_loss(s, cfg)

        def f_dim(v, s=s):
            return combined_loss(GroupSample(v, s.total_logits, s.labels, s.targets), cfg).value

        def f_tot(v, s=s):
            return combined_loss(GroupSample(s.dim_logits, v, s.labels, s.targets), cfg).value

        err = max(
            relative_error(out.grad_dim_logits, numeric_gradient(f_dim, s.dim_logits, h)),
            relative_error(out.grad_total_logits, numeric_gradient(f_tot, s.total_logits, h)),
        )
        worst["combined"] = max(worst["combined"], err)
    return [GradcheckResult(name, points, err, tolerance) for name, err in worst.items()]
