from __future__ import annotations

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tracereward.errors import ArgumentError, ConfigError, DomainError
from tracereward.rm import (
    DimensionWeights,
    GroupSample,
    LossConfig,
    RMOutputs,
    batched_combined_loss,
    combine_rm_score,
    combined_loss,
    dim_loss,
    dim_loss_probs,
    dim_score,
    gradcheck,
    huber,
    numeric_gradient,
    rank_loss,
    relative_error,
    total_loss,
)

LOGITS = arrays(np.float64, (5, 5), elements=st.floats(-30, 30))


def one_hot(classes):
    p = np.zeros((5, 5))
    p[np.arange(5), classes] = 1.0
    return p


def oracle_combined(dim_logits, total_logits, labels, targets, alpha=0.5, beta=0.7):
    """Scalar loop version of the combined objective."""
    n = len(total_logits)
    l_dim = l_tot = 0.0
    s_rm = []
    for i in range(n):
        s_dim = 0.0
        for k in range(5):
            row = [float(v) for v in dim_logits[i][k]]
            top = max(row)
            lse = top + math.log(sum(math.exp(v - top) for v in row))
            l_dim += -(row[int(labels[i][k])] - lse) / 5
            probs = [math.exp(v - lse) for v in row]
            s_dim += 0.2 * sum(p * c / 4 for c, p in enumerate(probs))
        s_tot = 1 / (1 + math.exp(-float(total_logits[i])))
        l_tot += 0.5 * (s_tot - min(1.0, max(0.0, float(targets[i])))) ** 2
        s_rm.append(0.5 * s_dim + 0.5 * s_tot)
    l_rank = sum(math.log1p(math.exp(-(s_rm[0] - s))) for s in s_rm[1:]) / (n - 1)
    return l_dim / n + alpha * l_tot / n + beta * l_rank


def random_sample(rng):
    return GroupSample(rng.normal(0, 2, (5, 5, 5)), rng.normal(0, 2, 5),
                       rng.integers(0, 5, (5, 5)), rng.uniform(0, 1, 5))


# ------------------------------------------------------------ scores

def test_dim_score_examples():
    assert dim_score(one_hot([4] * 5)) == 1.0
    assert dim_score(one_hot([0] * 5)) == 0.0
    assert dim_score(one_hot([4, 4, 4, 4, 2])) == pytest.approx(0.9, abs=1e-15)


def test_dim_score_custom_weights():
    w = DimensionWeights((1.0, 0, 0, 0, 0))
    assert dim_score(one_hot([2, 0, 0, 0, 0]), w) == 0.5
    assert dim_score(one_hot([2, 0, 0, 0, 0]), (0, 0, 0, 0, 1)) == 0.0


@pytest.mark.parametrize("w", [(0.2,) * 4, (0.3,) * 5, (0.5, 0.5, 0.1, -0.1, 0), (np.nan,) * 5])
def test_bad_weights(w):
    with pytest.raises(ConfigError):
        DimensionWeights(w)


def test_combine_rm_score():
    assert combine_rm_score(1, 1) == 1
    assert combine_rm_score(0, 0) == 0
    assert combine_rm_score(0.9, 0.5) == pytest.approx(0.7)
    with pytest.raises(DomainError):
        combine_rm_score(1.1, 0.5)
    with pytest.raises(DomainError):
        combine_rm_score(0.5, -0.01)


@settings(max_examples=200, deadline=None)
@given(LOGITS, st.floats(-50, 50))
def test_outputs_invariants(z, zt):
    out = RMOutputs.from_logits(z, zt)
    assert np.allclose(out.dim_probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(out.dim_probs >= 0)
    for s in (out.s_dim, out.s_total, out.s_rm):
        assert 0.0 <= s <= 1.0
    assert out.s_total == pytest.approx(1 / (1 + math.exp(-zt)), rel=1e-12, abs=1e-300)
    assert out.s_rm == pytest.approx(0.5 * out.s_dim + 0.5 * out.s_total)


@settings(max_examples=200, deadline=None)
@given(LOGITS, st.integers(0, 4), st.floats(0, 10))
def test_more_top_class_mass_never_lowers_s_dim(z, k, bump):
    raised = z.copy()
    raised[k, 4] += bump
    assert RMOutputs.from_logits(raised, 0).s_dim >= RMOutputs.from_logits(z, 0).s_dim - 1e-12


# ------------------------------------------------------------ losses

def test_dim_loss_examples():
    assert dim_loss_probs(one_hot([1, 2, 3, 4, 0]), [1, 2, 3, 4, 0]) == 0.0
    assert dim_loss_probs(np.full((5, 5), 0.2), [0] * 5) == pytest.approx(-math.log(0.2))
    assert dim_loss(np.zeros((5, 5)), [0, 1, 2, 3, 4])[0] == pytest.approx(1.6094379124341003)
    assert dim_loss_probs(one_hot([0] * 5), [1, 0, 0, 0, 0]) == math.inf


def test_dim_loss_is_finite_at_extreme_logits():
    z = np.full((5, 5), -1e4)
    z[:, 0] = 1e4
    value, grad = dim_loss(z, [4] * 5)
    assert math.isfinite(value) and value == pytest.approx(2e4)
    assert np.all(np.isfinite(grad))


@pytest.mark.parametrize("labels", [[0, 1, 2, 3], [0, 1, 2, 3, 5], [0, 1, 2, 3, 1.5]])
def test_dim_loss_label_validation(labels):
    with pytest.raises(ArgumentError):
        dim_loss(np.zeros((5, 5)), labels)


def test_total_loss_examples():
    assert total_loss(0.0, 0.5)[0] == 0.0
    value, _ = total_loss(math.log(3), 0.25)  # sigmoid(ln 3) = 0.75
    assert value == pytest.approx(0.125)
    # targets are clipped to [0, 1]
    assert total_loss(0.0, 3.0)[0] == total_loss(0.0, 1.0)[0]


def test_huber_branches():
    value, deriv = huber(np.array([0.5, -2.0, 3.0]), 1.0)
    assert value.tolist() == [0.125, 1.5, 2.5]
    assert deriv.tolist() == [0.5, -1.0, 1.0]


def test_rank_loss_examples():
    assert rank_loss(0.4, 0.4)[0] == pytest.approx(math.log(2))
    assert rank_loss(1.0, 0.0)[0] == pytest.approx(0.31326168751822286)
    grid = np.linspace(-1, 1, 41)
    values = [rank_loss(d, 0.0)[0] for d in grid]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_combined_loss_perfect_group():
    labels = np.array([[4] * 5] + [[0] * 5] * 4)
    z = np.where(np.arange(5)[None, None, :] == labels[..., None], 100.0, -100.0)
    zt = np.array([100.0, -100, -100, -100, -100])
    out = combined_loss(GroupSample(z, zt, labels, [1, 0, 0, 0, 0]))
    assert out.dim == pytest.approx(0, abs=1e-12)
    assert out.total == pytest.approx(0, abs=1e-12)
    assert out.rank == pytest.approx(0.31326168751822286)
    assert out.value == pytest.approx(0.7 * 0.31326168751822286)
    assert f"{out.value:.4f}" == "0.2193"


def test_combined_loss_without_weights_is_mean_dim_loss():
    s = random_sample(np.random.default_rng(1))
    out = combined_loss(s, LossConfig(alpha=0, beta=0))
    expected = np.mean([dim_loss(z, y)[0] for z, y in zip(s.dim_logits, s.labels)])
    assert out.value == pytest.approx(expected, rel=1e-12)


def test_combined_loss_matches_loop_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        s = random_sample(rng)
        out = combined_loss(s)
        assert out.value == pytest.approx(
            oracle_combined(s.dim_logits, s.total_logits, s.labels, s.targets), rel=1e-12)


def test_batched_loss_is_mean_of_groups():
    rng = np.random.default_rng(3)
    samples = [random_sample(rng) for _ in range(4)]
    batch = batched_combined_loss(np.stack([s.dim_logits for s in samples]),
                                  np.stack([s.total_logits for s in samples]),
                                  np.stack([s.labels for s in samples]),
                                  np.stack([s.targets for s in samples]))
    singles = [combined_loss(s) for s in samples]
    assert batch.value == pytest.approx(np.mean([o.value for o in singles]), rel=1e-12)
    assert np.allclose(batch.grad_dim_logits, np.stack([o.grad_dim_logits for o in singles]) / 4)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2), st.floats(0, 2))
def test_combined_loss_is_strictly_positive(seed, alpha, beta):
    out = combined_loss(random_sample(np.random.default_rng(seed)), LossConfig(alpha, beta))
    assert out.value > 0


def test_group_size_is_enforced():
    rng = np.random.default_rng(0)
    with pytest.raises(ArgumentError):
        GroupSample(rng.normal(size=(4, 5, 5)), np.zeros(4), np.zeros((4, 5), int), np.zeros(4))
    with pytest.raises(ArgumentError):
        GroupSample(rng.normal(size=(5, 5, 5)), np.zeros(4), np.zeros((5, 5), int), np.zeros(5))


def test_loss_config_validation():
    with pytest.raises(ConfigError):
        LossConfig(alpha=-1)
    with pytest.raises(ConfigError):
        LossConfig(huber_delta=0)


# ------------------------------------------------------------ gradients

def test_numeric_gradient_of_quadratic():
    x = np.array([1.0, -2.0, 3.0])
    assert np.allclose(numeric_gradient(lambda v: float(v @ v), x), 2 * x)


def test_relative_error_floor():
    assert relative_error([0.0], [1e-12]) == pytest.approx(1e-4)
    assert relative_error([1.0], [1.0]) == 0.0


def test_dim_gradient_at_random_logits():
    rng = np.random.default_rng(11)
    z, y = rng.normal(size=(5, 5)), rng.integers(0, 5, 5)
    _, g = dim_loss(z, y)
    assert relative_error(g, numeric_gradient(lambda v: dim_loss(v, y)[0], z)) <= 1e-5


def test_gradcheck_all_losses():
    start = time.perf_counter()
    results = gradcheck(points=100, seed=0)
    elapsed = time.perf_counter() - start
    assert [r.loss for r in results] == ["dim", "total", "rank", "combined"]
    assert all(r.passed for r in results), [r.to_dict() for r in results]
    assert elapsed < 10
