"""Executable checks of the reward-design claims.

Exact claims run in ``fractions.Fraction`` arithmetic. Statistical claims run
seeded Monte Carlo with bands of at most four standard errors. Every check
reads its formulas from a :class:`Formulas` bundle, so the mutation harness
can swap in a broken formula and confirm that some check notices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, InconclusiveError, PreconditionError
from .reward import (
    ExecutorSpec,
    expected_reward,
    group_advantages,
    monte_carlo,
    reward_formula,
    reward_variance,
    reward_variance_bound,
    sample_rewards,
    sample_uplifts,
    uplift_variance,
)

EXACT_TOL = 1e-12
Z_BAND = 4.0
REL_VAR_TOL = 0.05
MIN_TRIALS_MEAN = 10_000
MIN_TRIALS_VARIANCE = 100_000

CLAIM_IDS = (
    "uplift_unbiased",
    "uplift_variance",
    "constant_cancellation",
    "expected_reward",
    "pairwise_preference",
    "no_uplift_counterexample",
    "reward_derivatives",
    "constant_judge",
    "reward_variance_bound",
    "sign_reliability",
    "rm_error_bound",
)


@dataclass
class VerificationReport:
    claim_id: str
    mode: str  # "exact" or "statistical"
    observed: list
    bound_or_target: list
    z_or_margin: float
    passed: bool
    trials: int = 0
    seed: int | None = None
    tolerance: float | None = None
    notes: list[str] = field(default_factory=list)
    counterexamples: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "mode": self.mode,
            "observed": [_jsonable(v) for v in self.observed],
            "bound_or_target": [_jsonable(v) for v in self.bound_or_target],
            "z_or_margin": _jsonable(self.z_or_margin),
            "pass": self.passed,
            "trials": self.trials,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "notes": list(self.notes),
            "counterexamples": [[_jsonable(v) for v in c] for c in self.counterexamples[:20]],
        }


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# ---------------------------------------------------------------- formulas

def pairwise_delta(variant: str, u_a, u_b, m_a, m_b):
    """Expected-reward gap between two traces of one problem (q0 cancels)."""
    if variant == "full":
        return ((1 + m_a) * u_a - (1 + m_b) * u_b) / 2
    if variant in ("exec", "exec_only"):
        return u_a - u_b
    if variant == "no_uplift":
        return (u_a + m_a) - (u_b + m_b)
    raise ArgumentError(f"no pairwise gap defined for variant {variant!r}")


def advantages_array(rewards, delta_norm: float = 1e-6) -> np.ndarray:
    return np.asarray(group_advantages(rewards, delta_norm).advantages)


@dataclass(frozen=True)
class Formulas:
    """The formulas under test; the default bundle is the reference implementation."""

    name: str = "reference"
    reward: Callable = reward_formula  # (variant, x, m, u)
    uplifts: Callable = sample_uplifts  # (spec, k, rng, n) -> array
    advantages: Callable = advantages_array  # (rewards, delta) -> array
    expected: Callable = expected_reward  # (variant, q, q0, m)
    pairwise: Callable = pairwise_delta  # (variant, u_a, u_b, m_a, m_b)


REFERENCE = Formulas()


def _require_trials(trials: int, minimum: int) -> None:
    if trials < minimum:
        raise InconclusiveError(f"need at least {minimum} trials, got {trials}")


def _as_spec(spec) -> ExecutorSpec:
    return spec if isinstance(spec, ExecutorSpec) else ExecutorSpec(*spec)


def _binom_pmf(k: int, p) -> list:
    return [math.comb(k, i) * p**i * (1 - p) ** (k - i) for i in range(k + 1)]


def exact_expected_reward(variant: str, q, q0, m, k: int, formulas: Formulas = REFERENCE):
    """E[reward] by enumerating X and both binomial rollout counts.

    With Fraction inputs the result is exact.
    """
    pw, p0 = _binom_pmf(k, q), _binom_pmf(k, q0)
    total = 0
    for x, px in ((Fraction(1), q), (Fraction(0), 1 - q)):
        for a in range(k + 1):
            for b in range(k + 1):
                weight = px * pw[a] * p0[b]
                if weight:
                    total += weight * formulas.reward(variant, x, m, Fraction(a - b, k))
    return total


# ------------------------------------------------------------ uplift claims

def verify_uplift_unbiasedness(spec, k: int = 3, trials: int = 100_000, seed: int = 0,
                               formulas: Formulas = REFERENCE, shards: int = 4) -> VerificationReport:
    _require_trials(trials, MIN_TRIALS_MEAN)
    spec = _as_spec(spec)
    target = spec.q_with - spec.q_without
    var = uplift_variance(spec, k)
    mom = monte_carlo(lambda rng, n: formulas.uplifts(spec, k, rng, n), trials, seed, shards)
    err = abs(mom.mean - target)
    se = math.sqrt(var / trials)
    passed = err <= EXACT_TOL if se == 0 else err <= Z_BAND * se
    return VerificationReport("uplift_unbiased", "statistical", [mom.mean], [target],
                              err / se if se else err, passed, trials, seed, Z_BAND)


def verify_uplift_variance(spec, k: int = 3, trials: int = 100_000, seed: int = 0,
                           formulas: Formulas = REFERENCE, shards: int = 4) -> VerificationReport:
    _require_trials(trials, MIN_TRIALS_VARIANCE)
    spec = _as_spec(spec)
    analytic = uplift_variance(spec, k)
    bound = 1 / (2 * k)
    mom = monte_carlo(lambda rng, n: formulas.uplifts(spec, k, rng, n), trials, seed, shards)
    emp = mom.variance
    if analytic == 0:
        rel = emp
        passed = emp <= EXACT_TOL
    else:
        rel = abs(emp - analytic) / analytic
        passed = rel <= REL_VAR_TOL
    passed = passed and emp <= bound * (1 + REL_VAR_TOL)
    return VerificationReport("uplift_variance", "statistical", [emp], [analytic, bound],
                              rel, passed, trials, seed, REL_VAR_TOL)


def uplift_grid(step: Fraction = Fraction(1, 10), ks: Sequence[int] = (1, 3, 5)):
    n = int(1 / step)
    probs = [float(step * i) for i in range(n + 1)]
    return [(ExecutorSpec(q, q0), k) for q in probs for q0 in probs for k in ks]


# --------------------------------------------------- advantage / constants

def verify_constant_cancellation(rewards: Sequence[float], constant: float,
                                 delta_norm: float = 1e-6,
                                 formulas: Formulas = REFERENCE) -> VerificationReport:
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise ArgumentError("need at least two rewards")
    a = formulas.advantages(r, delta_norm)
    b = formulas.advantages(r + constant, delta_norm)
    dev = float(np.max(np.abs(a - b)))
    notes = []
    if np.ptp(r) == 0:
        notes.append("zero spread: advantages are identically zero, check is vacuous")
    scaled = float(np.max(np.abs(a - formulas.advantages(2 * r, delta_norm))))
    notes.append(f"informational: max deviation under doubling the rewards = {scaled:.3g}")
    return VerificationReport("constant_cancellation", "exact", [dev], [EXACT_TOL],
                              dev, dev <= EXACT_TOL, tolerance=EXACT_TOL, notes=notes)


def verify_constant_cancellation_random(groups: int = 1000, seed: int = 0,
                                        formulas: Formulas = REFERENCE) -> VerificationReport:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(groups):
        size = int(rng.integers(4, 17))
        rewards = rng.uniform(-0.5, 1.0, size=size)
        constant = float(rng.uniform(-10.0, 10.0))
        rep = verify_constant_cancellation(rewards, constant, formulas=formulas)
        worst = max(worst, rep.observed[0])
    return VerificationReport("constant_cancellation", "exact", [worst], [EXACT_TOL], worst,
                              worst <= EXACT_TOL, trials=groups, seed=seed, tolerance=EXACT_TOL)


# ------------------------------------------------------ expected reward

def verify_expected_reward(spec, m: float, k: int = 3, trials: int = 100_000, seed: int = 0,
                           formulas: Formulas = REFERENCE, shards: int = 4) -> VerificationReport:
    """Sampled full rewards against the closed-form expectation.

    The standard error comes from the analytic reward variance. An exact
    enumeration of the same expectation runs alongside.
    """
    _require_trials(trials, MIN_TRIALS_VARIANCE)
    spec = _as_spec(spec)
    target = formulas.expected("full", spec.q_with, spec.q_without, m)
    mom = monte_carlo(lambda rng, n: sample_rewards("full", spec, m, k, rng, n,
                                                    formula=formulas.reward),
                      trials, seed, shards)
    se = math.sqrt(reward_variance(spec, m, k) / trials)
    err = abs(mom.mean - target)
    z = err / se if se else err
    within = err <= EXACT_TOL if se == 0 else z <= Z_BAND
    q, q0, mf = (Fraction(v).limit_denominator(10**6) for v in (spec.q_with, spec.q_without, m))
    exact = exact_expected_reward("full", q, q0, mf, k, formulas)
    closed = formulas.expected("full", q, q0, mf)
    exact_ok = abs(exact - closed) <= EXACT_TOL
    notes = [] if exact_ok else [f"exact enumeration {float(exact):.6g} != closed form {float(closed):.6g}"]
    return VerificationReport("expected_reward", "statistical", [mom.mean, float(exact)], [target],
                              z, within and exact_ok, trials, seed, Z_BAND, notes)


# ------------------------------------------------------ pairwise claims

def _frange(lo: Fraction, hi: Fraction, step: Fraction) -> list[Fraction]:
    n = int((hi - lo) / step)
    return [lo + step * i for i in range(n + 1)]


def scan_pairwise_propositions(grid_step=Fraction(1, 10),
                               formulas: Formulas = REFERENCE) -> VerificationReport:
    """Exhaustive exact scan of the pairwise preference claims.

    For the full reward: (i) u_a >= u_b >= 0 and m_a >= m_b give a
    non-negative gap, strictly positive when u_a > u_b or when m_a > m_b with
    u_b > 0; (ii) tied uplift u > 0 gives gap u(m_a - m_b)/2; (iii) u_a > 0 >= u_b
    gives a positive gap.
    """
    step = Fraction(grid_step).limit_denominator(10**6)
    if not 0 < step <= Fraction(1, 2):
        raise ArgumentError("grid_step must lie in (0, 0.5]")
    us = _frange(Fraction(-1), Fraction(1), step)
    ms = _frange(Fraction(0), Fraction(1), step)
    bad = []
    cells = 0
    for u_a, u_b, m_a, m_b in itertools.product(us, us, ms, ms):
        cells += 1
        d = formulas.pairwise("full", u_a, u_b, m_a, m_b)
        if u_a >= u_b >= 0 and m_a >= m_b:
            strict = u_a > u_b or (m_a > m_b and u_b > 0)
            if d < 0 or (strict and d <= 0):
                bad.append(("aligned", u_a, u_b, m_a, m_b, d))
        if u_a == u_b and u_a > 0 and d != u_a * (m_a - m_b) / 2:
            bad.append(("tied", u_a, u_b, m_a, m_b, d))
        if u_a > 0 >= u_b and d <= 0:
            bad.append(("separation", u_a, u_b, m_a, m_b, d))
    return VerificationReport("pairwise_preference", "exact", [len(bad)], [0], float(len(bad)),
                              not bad, trials=cells, tolerance=0.0, counterexamples=bad)


def verify_no_uplift_counterexample(u_a=Fraction(1, 10), u_b=Fraction(3, 10), m_a=Fraction(9, 10),
                                    m_b=Fraction(1, 10), formulas: Formulas = REFERENCE) -> VerificationReport:
    """No-uplift prefers a lower-uplift trace once its RM margin exceeds the uplift deficit."""
    d_full = formulas.pairwise("full", u_a, u_b, m_a, m_b)
    d_no = formulas.pairwise("no_uplift", u_a, u_b, m_a, m_b)
    condition = m_a - m_b > u_b - u_a
    passed = condition and d_no > 0 and d_full < 0
    return VerificationReport("no_uplift_counterexample", "exact", [d_full, d_no], [0, 0],
                              d_no, passed, tolerance=0.0,
                              notes=[f"m_a - m_b = {m_a - m_b}, u_b - u_a = {u_b - u_a}"])


# ---------------------------------------------------------- derivatives

def verify_derivative_claims(formulas: Formulas = REFERENCE) -> VerificationReport:
    """Exact finite differences of the expected reward in m and in u."""
    f = formulas.expected
    grid = [Fraction(i, 4) for i in range(5)]
    h = Fraction(1, 8)
    bad = []
    for q0 in grid:
        for u in [Fraction(i, 4) for i in range(-4, 5)]:
            q = q0 + u
            if not 0 <= q <= 1:
                continue
            for m in grid:
                m2 = m + h if m + h <= 1 else m - h
                slope_m = (f("full", q, q0, m2) - f("full", q, q0, m)) / (m2 - m)
                if slope_m != u / 2:
                    bad.append(("full_dm", q, q0, m, slope_m))
                q2 = q + h if q + h <= 1 else q - h
                slope_u = (f("full", q2, q0, m) - f("full", q, q0, m)) / (q2 - q)
                if slope_u != (1 + m) / 2 or not Fraction(1, 2) <= slope_u <= 1:
                    bad.append(("full_du", q, q0, m, slope_u))
                slope_r = (f("rm_uplift_only", q2, q0, m) - f("rm_uplift_only", q, q0, m)) / (q2 - q)
                if slope_r != m or not 0 <= slope_r <= 1:
                    bad.append(("rm_uplift_only_du", q, q0, m, slope_r))
    return VerificationReport("reward_derivatives", "exact", [len(bad)], [0], float(len(bad)),
                              not bad, tolerance=0.0, counterexamples=bad)


# ------------------------------------------------------- constant judge

def verify_constant_judge(qs: Sequence, q0, c, k: int = 3,
                          formulas: Formulas = REFERENCE) -> VerificationReport:
    """A constant judge score leaves an affine reward in q with slope (1+c)/2.

    Expected rewards come from exact enumeration of the sampled judge reward
    and must equal the affine form exactly; their group ordering must match
    the ordering of q.
    """
    if len(qs) < 2:
        raise ArgumentError("need at least two q values")
    qs = [Fraction(q).limit_denominator(10**6) for q in qs]
    q0 = Fraction(q0).limit_denominator(10**6)
    c = Fraction(c).limit_denominator(10**6)
    rewards = [exact_expected_reward("judge", q, q0, c, k, formulas) for q in qs]
    affine = [(1 + c) * q / 2 - c * q0 / 2 for q in qs]
    mismatches = [(q, r, a) for q, r, a in zip(qs, rewards, affine) if r != a]
    closed = [formulas.expected("judge", q, q0, c) for q in qs]
    mismatches += [(q, r, a) for q, r, a in zip(qs, closed, affine) if r != a]
    adv_r = formulas.advantages([float(r) for r in rewards], 1e-6)
    adv_q = formulas.advantages([float(q) for q in qs], 1e-6)
    same_order = (np.argsort(adv_r, kind="stable").tolist() == np.argsort(adv_q, kind="stable").tolist()
                  and np.argsort([float(r) for r in rewards], kind="stable").tolist()
                  == np.argsort([float(q) for q in qs], kind="stable").tolist())
    passed = not mismatches and same_order
    notes = [] if same_order else ["ordering differs from the ordering of q"]
    return VerificationReport("constant_judge", "exact", [float(r) for r in rewards],
                              [float(a) for a in affine], float(len(mismatches)), passed,
                              tolerance=0.0, notes=notes, counterexamples=mismatches)


def verify_constant_judge_random(cs=(0, 0.25, 0.5, 0.75, 1), groups: int = 50, seed: int = 0,
                                 formulas: Formulas = REFERENCE) -> VerificationReport:
    rng = np.random.default_rng(seed)
    failures = []
    for c in cs:
        for _ in range(groups):
            qs = [Fraction(int(v), 100) for v in rng.choice(101, size=6, replace=False)]
            q0 = Fraction(int(rng.integers(0, 101)), 100)
            rep = verify_constant_judge(qs, q0, c, formulas=formulas)
            if not rep.passed:
                failures.append((c, [float(q) for q in qs], float(q0)))
    return VerificationReport("constant_judge", "exact", [len(failures)], [0], float(len(failures)),
                              not failures, trials=len(cs) * groups, seed=seed, tolerance=0.0,
                              counterexamples=failures)


# ---------------------------------------------------- variance / signs

def variance_grid(qs=(0, 0.5, 1), q0s=(0, 0.5, 1), ms=(0, 0.5, 1), ks=(1, 3, 64)):
    return [(ExecutorSpec(q, q0), m, k) for q in qs for q0 in q0s for m in ms for k in ks]


def verify_reward_variance_bound(grid=None, trials: int = 100_000, seed: int = 0,
                                 formulas: Formulas = REFERENCE, shards: int = 4) -> VerificationReport:
    """Empirical variance of the sampled full reward against 1/16 + m^2/(8K).

    Each cell gets slack of four standard errors of its sample variance.
    """
    _require_trials(trials, MIN_TRIALS_VARIANCE)
    grid = variance_grid() if grid is None else grid
    bad = []
    worst = -math.inf
    seeds = np.random.SeedSequence(seed).generate_state(len(grid))
    for (spec, m, k), cell_seed in zip(grid, seeds):
        mom = monte_carlo(lambda rng, n: sample_rewards("full", spec, m, k, rng, n,
                                                        formula=formulas.reward),
                          trials, int(cell_seed), shards)
        bound = reward_variance_bound(m, k)
        slack = Z_BAND * mom.variance_se
        margin = mom.variance - bound - slack
        worst = max(worst, margin)
        if margin > 0:
            bad.append((spec.q_with, spec.q_without, m, k, mom.variance, bound))
    return VerificationReport("reward_variance_bound", "statistical", [len(bad)], [0], worst,
                              not bad, trials * len(grid), seed, Z_BAND, counterexamples=bad)


def verify_sign_reliability(a: tuple, b: tuple, k: int = 3, trials: int = 100_000, seed: int = 0,
                            shared_samples: bool = False, formulas: Formulas = REFERENCE,
                            shards: int = 4) -> VerificationReport:
    """Flip rate of a one-draw reward comparison against the Chebyshev bound.

    ``a`` and ``b`` are (ExecutorSpec, m) pairs. The gap and the variances use
    the reference formulas; the sampled rewards use the formulas under test.
    """
    if shared_samples:
        raise PreconditionError("the sign bound needs independent reward estimates")
    _require_trials(trials, MIN_TRIALS_MEAN)
    (spec_a, m_a), (spec_b, m_b) = (_as_spec(a[0]), a[1]), (_as_spec(b[0]), b[1])
    gap = (expected_reward("full", spec_a.q_with, spec_a.q_without, m_a)
           - expected_reward("full", spec_b.q_with, spec_b.q_without, m_b))
    if not gap > 0:
        raise PreconditionError(f"population gap must be positive, got {gap!r}")
    bound = (reward_variance(spec_a, m_a, k) + reward_variance(spec_b, m_b, k)) / gap**2

    def flips(rng, n):
        ra = sample_rewards("full", spec_a, m_a, k, rng, n, formula=formulas.reward)
        rb = sample_rewards("full", spec_b, m_b, k, rng, n, formula=formulas.reward)
        return (ra - rb <= 0).astype(float)

    mom = monte_carlo(flips, trials, seed, shards)
    rate = mom.mean
    notes = []
    if bound >= 1:
        notes.append("bound >= 1, the inequality is vacuous")
        passed = True
    else:
        slack = Z_BAND * math.sqrt(bound * (1 - bound) / trials)
        passed = rate <= bound + slack
    return VerificationReport("sign_reliability", "statistical", [rate], [bound],
                              bound - rate, passed, trials, seed, Z_BAND, notes)


# ------------------------------------------------------------ RM error

def verify_rm_error_bound(u, eta, formulas: Formulas = REFERENCE) -> VerificationReport:
    """Perturbing m by at most eta moves the expected full reward by |u| * |dm| / 2 <= eta / 2."""
    u = Fraction(u).limit_denominator(10**6)
    eta = Fraction(eta).limit_denominator(10**6)
    if not 0 <= eta <= 1:
        raise ArgumentError("eta must lie in [0, 1]")
    if not -1 <= u <= 1:
        raise ArgumentError("u must lie in [-1, 1]")
    q0 = max(Fraction(0), -u)
    q = q0 + u
    bad = []
    worst = Fraction(0)
    for m in [Fraction(i, 10) for i in range(11)]:
        for mt in (m - eta, m + eta):
            if not 0 <= mt <= 1:
                continue
            diff = abs(formulas.expected("full", q, q0, mt) - formulas.expected("full", q, q0, m))
            worst = max(worst, diff)
            if diff != abs(mt - m) * abs(u) / 2 or diff > eta / 2:
                bad.append((m, mt, diff))
    return VerificationReport("rm_error_bound", "exact", [worst], [eta / 2], eta / 2 - worst,
                              not bad, tolerance=0.0, counterexamples=bad)


# --------------------------------------------------------------- suite

def run_claim(claim_id: str, seed: int = 0, trials: int = 100_000,
              formulas: Formulas = REFERENCE) -> VerificationReport:
    """Run one claim with its default configuration."""
    if claim_id == "uplift_unbiased":
        rep = verify_uplift_unbiasedness(ExecutorSpec(0.7, 0.4), 3, trials, seed, formulas)
    elif claim_id == "uplift_variance":
        rep = verify_uplift_variance(ExecutorSpec(0.7, 0.4), 3, trials, seed, formulas)
    elif claim_id == "constant_cancellation":
        rep = verify_constant_cancellation_random(1000, seed, formulas)
    elif claim_id == "expected_reward":
        rep = verify_expected_reward(ExecutorSpec(0.7, 0.4), 0.8, 3, trials, seed, formulas)
    elif claim_id == "pairwise_preference":
        rep = scan_pairwise_propositions(Fraction(1, 10), formulas)
    elif claim_id == "no_uplift_counterexample":
        rep = verify_no_uplift_counterexample(formulas=formulas)
    elif claim_id == "reward_derivatives":
        rep = verify_derivative_claims(formulas)
    elif claim_id == "constant_judge":
        rep = verify_constant_judge_random(seed=seed, formulas=formulas)
    elif claim_id == "reward_variance_bound":
        rep = verify_reward_variance_bound(None, trials, seed, formulas)
    elif claim_id == "sign_reliability":
        rep = verify_sign_reliability((ExecutorSpec(0.9, 0.1), 1.0), (ExecutorSpec(0.2, 0.1), 0.5),
                                      3, trials, seed, formulas=formulas)
    elif claim_id == "rm_error_bound":
        reps = [verify_rm_error_bound(u, eta, formulas)
                for u in (-1, -0.5, 0, 0.5, 1) for eta in (0, 0.1, 0.2, 0.5, 1)]
        bad = [c for r in reps for c in r.counterexamples]
        worst = min(float(r.z_or_margin) for r in reps)
        rep = VerificationReport("rm_error_bound", "exact", [len(bad)], [0], worst,
                                 not bad, tolerance=0.0, counterexamples=bad)
    else:
        raise ArgumentError(f"unknown claim {claim_id!r}; choose from {CLAIM_IDS}")
    if rep.seed is None and rep.mode == "statistical":
        rep.seed = seed
    return rep


def run_suite(seed: int = 0, trials: int = 100_000, claims: Sequence[str] | None = None,
              formulas: Formulas = REFERENCE) -> list[VerificationReport]:
    return [run_claim(c, seed, trials, formulas) for c in (claims or CLAIM_IDS)]


# ------------------------------------------------------------- mutants

def _mut_reward(kind: str):
    def reward(variant, x, m, u):
        if variant not in ("full", "judge"):
            return reward_formula(variant, x, m, u)
        if kind == "uplift_term_sign":
            return x / 2 - m * u / 2
        if kind == "drop_verifier":
            return m * u / 2
        if kind == "exec_weight_one":
            return x + m * u / 2
        raise AssertionError(kind)
    return reward


def _uplift_no_baseline(spec, k, rng, n):
    return sample_uplifts(spec, k, rng, n, drop_baseline=True)


def _uplift_flipped(spec, k, rng, n):
    return -sample_uplifts(spec, k, rng, n)


def _advantages_uncentered(rewards, delta_norm=1e-6):
    r = np.asarray(rewards, dtype=float)
    return r / (r.std() + delta_norm)


def _pairwise_flipped(variant, u_a, u_b, m_a, m_b):
    return -pairwise_delta(variant, u_a, u_b, m_a, m_b)


def _expected_without_uplift_one(variant, q, q0, m):
    if variant == "full":
        return q0 / 2 + m * (q - q0) / 2
    return expected_reward(variant, q, q0, m)


MUTANTS: dict[str, Formulas] = {
    name: replace(REFERENCE, name=name, **changes)
    for name, changes in {
        "uplift_term_sign": {"reward": _mut_reward("uplift_term_sign")},
        "drop_verifier": {"reward": _mut_reward("drop_verifier")},
        "exec_weight_one": {"reward": _mut_reward("exec_weight_one")},
        "drop_baseline_branch": {"uplifts": _uplift_no_baseline},
        "uplift_sign_flip": {"uplifts": _uplift_flipped},
        "advantage_uncentered": {"advantages": _advantages_uncentered},
        "pairwise_sign_flip": {"pairwise": _pairwise_flipped},
        "expected_drops_exec_slope": {"expected": _expected_without_uplift_one},
    }.items()
}


def mutation_harness(seed: int = 0, trials: int = 100_000) -> dict[str, list[str]]:
    """Claims each mutant fails; every list should be non-empty."""
    return {name: [r.claim_id for r in run_suite(seed, trials, formulas=f) if not r.passed]
            for name, f in MUTANTS.items()}
