"""Frozen-executor simulation, uplift estimation, composite rewards and group advantages.

The executor is a pair of Bernoulli success rates: ``q_with`` when the trace
is supplied and ``q_without`` when the reasoning field is omitted. The
analytic helpers accept ``fractions.Fraction`` inputs and then stay exact.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, DomainError

VARIANTS = ("full", "exec_only", "no_uplift", "rm_uplift_only", "judge")
UPLIFT_VARIANTS = ("full", "rm_uplift_only", "judge")
DEFAULT_K = 3
MAX_K = 64
DEFAULT_DELTA = 1e-6


def _check_prob(name: str, v) -> None:
    if not 0 <= v <= 1:
        raise DomainError(f"{name} must lie in [0, 1], got {v!r}")


def _check_k(k) -> int:
    if isinstance(k, bool) or int(k) != k or not 1 <= k <= MAX_K:
        raise ArgumentError(f"k must be an integer in [1, {MAX_K}], got {k!r}")
    return int(k)


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ArgumentError(f"unknown reward variant {variant!r}; choose from {VARIANTS}")


@dataclass(frozen=True)
class ExecutorSpec:
    q_with: float
    q_without: float
    temperature_label: float = 0.5

    def __post_init__(self):
        _check_prob("q_with", self.q_with)
        _check_prob("q_without", self.q_without)


def sample_executor(spec: ExecutorSpec, with_reason: bool, rng: np.random.Generator) -> int:
    q = spec.q_with if with_reason else spec.q_without
    return int(rng.random() < q)


@dataclass(frozen=True)
class UpliftEstimate:
    k: int
    with_successes: int
    without_successes: int

    def __post_init__(self):
        _check_k(self.k)
        for n in (self.with_successes, self.without_successes):
            if not 0 <= n <= self.k:
                raise ArgumentError("success counts must lie in [0, k]")

    @property
    def p_hat(self) -> float:
        return self.with_successes / self.k

    @property
    def p0_hat(self) -> float:
        return self.without_successes / self.k

    @property
    def u_hat(self) -> float:
        # the clip never binds since both rates lie in [0, 1]
        return min(1.0, max(-1.0, (self.with_successes - self.without_successes) / self.k))

    def to_dict(self) -> dict:
        return {"k": self.k, "p_hat": self.p_hat, "p0_hat": self.p0_hat, "u_hat": self.u_hat}


def uplift_from_bits(with_bits: Sequence[int], without_bits: Sequence[int]) -> UpliftEstimate:
    if len(with_bits) != len(without_bits):
        raise ArgumentError("both branches need the same number of rollouts")
    k = _check_k(len(with_bits))
    for b in list(with_bits) + list(without_bits):
        if b not in (0, 1):
            raise ArgumentError(f"verifier bits must be 0 or 1, got {b!r}")
    return UpliftEstimate(k, int(sum(with_bits)), int(sum(without_bits)))


def estimate_uplift(spec: ExecutorSpec, k: int, rng: np.random.Generator,
                    paired: bool = False) -> UpliftEstimate:
    """Draw K rollouts with the trace and K without it.

    By default the branches are independent. ``paired=True`` drives both
    from common uniforms, a variance-reduction mode outside the theory checks.
    """
    k = _check_k(k)
    u_with = rng.random(k)
    u_without = u_with if paired else rng.random(k)
    return uplift_from_bits((u_with < spec.q_with).astype(int).tolist(),
                            (u_without < spec.q_without).astype(int).tolist())


def analytic_uplift(spec: ExecutorSpec):
    return spec.q_with - spec.q_without


def uplift_variance(spec: ExecutorSpec, k: int):
    k = _check_k(k)
    q, q0 = spec.q_with, spec.q_without
    return (q * (1 - q) + q0 * (1 - q0)) / k


@dataclass(frozen=True)
class RewardBreakdown:
    variant: str
    x: int
    m: float
    uplift: UpliftEstimate | float | None
    total: float

    def to_dict(self) -> dict:
        u = self.uplift
        if isinstance(u, UpliftEstimate):
            u = u.to_dict()
        elif u is not None:
            u = {"u_hat": u}
        return {"variant": self.variant, "x": self.x, "m": self.m, "uplift": u, "total": self.total}


def reward_formula(variant: str, x, m, u):
    """Per-variant reward as a plain function of (x, m, u_hat)."""
    if variant == "exec_only":
        return x
    if variant == "no_uplift":
        return x / 2 + m / 2
    if variant == "rm_uplift_only":
        return m * u
    # full, and judge with m read as the normalized judge score
    return x / 2 + m * u / 2


def compute_reward(variant: str, x: int, m: float,
                   uplift: UpliftEstimate | float | None = None) -> RewardBreakdown:
    """Reward for one sampled trace; ``uplift`` may be an estimate or a bare u_hat."""
    _check_variant(variant)
    if x not in (0, 1):
        raise ArgumentError(f"x must be 0 or 1, got {x!r}")
    _check_prob("m", m)
    if variant in UPLIFT_VARIANTS and uplift is None:
        raise ArgumentError(f"variant {variant!r} needs an uplift estimate")
    if isinstance(uplift, UpliftEstimate):
        u = uplift.u_hat
    elif uplift is None:
        u = 0.0
    else:
        u = float(uplift)
        if not -1.0 <= u <= 1.0:
            raise DomainError(f"u_hat must lie in [-1, 1], got {u!r}")
    return RewardBreakdown(variant, int(x), m, uplift, reward_formula(variant, x, m, u))


def expected_reward(variant: str, q, q0, m):
    """Expectation of the variant's reward over executor randomness.

    For ``judge`` the score m is a constant c, which gives the affine form
    (1+c)q/2 - c*q0/2.
    """
    _check_variant(variant)
    if any(isinstance(v, Fraction) for v in (q, q0, m)):
        # keep int arguments from falling back to float division
        q, q0, m = Fraction(q), Fraction(q0), Fraction(m)
    if variant == "exec_only":
        return q
    if variant == "no_uplift":
        return q0 / 2 + ((q - q0) + m) / 2
    if variant == "rm_uplift_only":
        return m * (q - q0)
    if variant == "judge":
        return (1 + m) * q / 2 - m * q0 / 2
    return q0 / 2 + (1 + m) * (q - q0) / 2


def reward_variance(spec: ExecutorSpec, m, k: int):
    """Exact variance of the full reward with X independent of the uplift rollouts."""
    q = spec.q_with
    return q * (1 - q) / 4 + m * m * uplift_variance(spec, k) / 4


def reward_variance_bound(m, k: int):
    base = Fraction(1, 16) if isinstance(m, Fraction) else 1 / 16
    return base + m * m / (8 * _check_k(k))


@dataclass(frozen=True)
class AdvantageGroup:
    rewards: tuple[float, ...]
    delta_norm: float
    advantages: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"rewards": list(self.rewards), "delta_norm": self.delta_norm,
                "advantages": list(self.advantages)}


def group_advantages(rewards: Sequence[float], delta_norm: float = DEFAULT_DELTA) -> AdvantageGroup:
    """(r_i - mean) / (population std + delta) within one problem's group."""
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise ArgumentError("group advantages need at least two rewards")
    if not delta_norm > 0:
        raise ArgumentError("delta_norm must be positive")
    if not np.all(np.isfinite(r)):
        raise DomainError("rewards must be finite")
    # equal rewards can leave a one-ulp residue after centring; delta would amplify it
    centered = np.zeros_like(r) if np.ptp(r) == 0 else r - r.mean()
    adv = centered / (np.sqrt(np.mean(centered**2)) + delta_norm)
    return AdvantageGroup(tuple(r.tolist()), float(delta_norm), tuple(adv.tolist()))


# ------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class Moments:
    """Power sums of a sample; merging is plain addition, so it is associative."""

    n: int = 0
    s1: float = 0.0
    s2: float = 0.0
    s3: float = 0.0
    s4: float = 0.0

    @classmethod
    def of(cls, values) -> Moments:
        v = np.asarray(values, dtype=float)
        v2 = v * v
        return cls(int(v.size), float(v.sum()), float(v2.sum()),
                   float((v2 * v).sum()), float((v2 * v2).sum()))

    def merge(self, other: Moments) -> Moments:
        return Moments(self.n + other.n, self.s1 + other.s1, self.s2 + other.s2,
                       self.s3 + other.s3, self.s4 + other.s4)

    @property
    def mean(self) -> float:
        return self.s1 / self.n

    @property
    def variance(self) -> float:
        """Population variance."""
        mu = self.mean
        return max(0.0, self.s2 / self.n - mu * mu)

    @property
    def fourth_central(self) -> float:
        mu = self.mean
        e2, e3, e4 = self.s2 / self.n, self.s3 / self.n, self.s4 / self.n
        return max(0.0, e4 - 4 * mu * e3 + 6 * mu * mu * e2 - 3 * mu**4)

    @property
    def mean_se(self) -> float:
        return float(np.sqrt(self.variance / self.n))

    @property
    def variance_se(self) -> float:
        """Large-sample standard error of the sample variance."""
        return float(np.sqrt(max(0.0, self.fourth_central - self.variance**2) / self.n))


Sampler = Callable[[np.random.Generator, int], np.ndarray]


def monte_carlo(sampler: Sampler, trials: int, seed: int, shards: int = 1,
                workers: int = 1) -> Moments:
    """Run ``trials`` draws split over shards with seeds spawned from ``seed``.

    The result depends only on (seed, trials, shards); ``workers`` just
    changes how many shards run at once.
    """
    if trials < 1 or shards < 1:
        raise ArgumentError("trials and shards must be positive")
    seqs = np.random.SeedSequence(seed).spawn(shards)
    sizes = [trials // shards + (1 if i < trials % shards else 0) for i in range(shards)]

    def run(i: int) -> Moments:
        if sizes[i] == 0:
            return Moments()
        return Moments.of(sampler(np.random.default_rng(seqs[i]), sizes[i]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(shards)))
    else:
        parts = [run(i) for i in range(shards)]
    total = Moments()
    for part in parts:
        total = total.merge(part)
    return total


def sample_uplifts(spec: ExecutorSpec, k: int, rng: np.random.Generator, n: int,
                   drop_baseline: bool = False) -> np.ndarray:
    """n independent uplift estimates; binomial counts equal summed Bernoulli bits in law."""
    k = _check_k(k)
    p = rng.binomial(k, spec.q_with, size=n) / k
    p0 = rng.binomial(k, spec.q_without, size=n) / k
    return p if drop_baseline else p - p0


def sample_rewards(variant: str, spec: ExecutorSpec, m: float, k: int,
                   rng: np.random.Generator, n: int, share_x: bool = False,
                   formula: Callable = reward_formula) -> np.ndarray:
    """n sampled rewards for a fixed trace.

    X is an extra independent rollout unless ``share_x`` reuses the first
    with-trace uplift rollout.
    """
    _check_variant(variant)
    k = _check_k(k)
    bits = rng.random((n, k)) < spec.q_with
    p0 = rng.binomial(k, spec.q_without, size=n) / k
    u = bits.mean(axis=1) - p0
    x = bits[:, 0] if share_x else rng.random(n) < spec.q_with
    return np.asarray(formula(variant, x.astype(float), m, u), dtype=float)
