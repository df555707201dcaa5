"""One test per acceptance criterion; results are summarised at the end of the run."""

from __future__ import annotations

import json
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from tracereward.cleaning import SPAN_KINDS, clean_code_reason, clean_math_reason
from tracereward.cli import EXIT_OK, main
from tracereward.groups import convert_rubric_labels
from tracereward.reports import saturation_diagnostic
from tracereward.reward import ExecutorSpec
from tracereward.rm import gradcheck
from tracereward.theory import (
    MUTANTS,
    mutation_harness,
    scan_pairwise_propositions,
    uplift_grid,
    verify_constant_cancellation_random,
    verify_constant_judge_random,
    verify_expected_reward,
    verify_no_uplift_counterexample,
    verify_reward_variance_bound,
    verify_sign_reliability,
    verify_uplift_unbiasedness,
    verify_uplift_variance,
)
from tracereward.toy_rm import ToyRMConfig, evaluate, synthetic_groups, toy_rm_fit

FIXTURES = Path(__file__).parent / "fixtures"
STATS_HEADER = "Split,Seed problems,Kept groups,Reference traces,Flawed traces,Avg. ref len.,Avg. flawed len."


def _interval_label(tenths: int) -> int:
    # classes are [0,2), [2,4), [4,6), [6,8), [8,10]
    return min(Fraction(tenths, 10) // 2, 4)


def test_01_label_conversion_table(acceptance):
    start = time.perf_counter()
    mismatches = []
    for tenths in range(101):
        score = tenths / 10
        got = convert_rubric_labels([score] * 5, score).class_labels
        if got != (_interval_label(tenths),) * 5:
            mismatches.append((score, got))
    elapsed = time.perf_counter() - start
    acceptance(1, "label-conversion table", not mismatches and elapsed < 1,
               f"101 scores, {len(mismatches)} mismatches, {elapsed * 1000:.1f} ms")


def test_02_cleaning_fixtures(acceptance):
    cases = json.loads((FIXTURES / "cleaning_cases.json").read_text(encoding="utf-8"))
    wrong, unstable, kinds = [], [], set()
    for case in cases:
        if case["domain"] == "code":
            def clean(text, ref=case["reference_action"]):
                return clean_code_reason(text, ref)
        else:
            clean = clean_math_reason
        result = clean(case["raw"])
        kinds.update(s.kind for s in result.removed_spans)
        if result.text.encode("utf-8") != case["expected"].encode("utf-8"):
            wrong.append(case["name"])
        if clean(result.text).text != result.text:
            unstable.append(case["name"])
    missing = sorted(set(SPAN_KINDS) - kinds)
    ok = len(cases) >= 30 and not wrong and not unstable and not missing
    acceptance(2, "cleaning fixtures", ok,
               f"{len(cases)} cases, {len(wrong)} wrong, {len(unstable)} not idempotent, "
               f"rules not exercised: {missing or 'none'}")


def test_03_rm_loss_gradients(acceptance):
    start = time.perf_counter()
    results = gradcheck(points=100, seed=0)
    elapsed = time.perf_counter() - start
    worst = max(r.max_rel_error for r in results)
    ok = all(r.passed for r in results) and worst <= 1e-4 and elapsed < 10
    acceptance(3, "RM loss gradients", ok,
               f"{[r.loss for r in results]}, max rel. error {worst:.2e}, {elapsed:.1f} s")


def test_04_toy_rm(acceptance):
    start = time.perf_counter()
    train, held = synthetic_groups(200, seed=0), synthetic_groups(50, seed=1)
    steps = 500
    model = toy_rm_fit(train, ToyRMConfig(steps=steps, seed=0))
    ev = evaluate(model, held)
    elapsed = time.perf_counter() - start
    ok = ev.pairwise_acc >= 0.95 and ev.group_acc >= 0.90 and steps <= 2000 and elapsed < 60
    acceptance(4, "toy RM", ok,
               f"held-out pairwise {100 * ev.pairwise_acc:.2f}%, group {100 * ev.group_acc:.2f}%, "
               f"{steps} steps, {elapsed:.1f} s")


def test_05_uplift_estimator(acceptance):
    start = time.perf_counter()
    grid = uplift_grid(Fraction(1, 10), (1, 3, 5))
    seeds = np.random.SeedSequence(5).generate_state(len(grid))
    bad = []
    for (spec, k), seed in zip(grid, seeds):
        mean = verify_uplift_unbiasedness(spec, k, 100_000, int(seed))
        var = verify_uplift_variance(spec, k, 100_000, int(seed))
        if not (mean.passed and var.passed):
            bad.append((spec.q_with, spec.q_without, k))
    elapsed = time.perf_counter() - start
    acceptance(5, "uplift estimator", not bad and elapsed < 300,
               f"{len(grid)} cells x 1e5 trials, {len(bad)} failing {bad[:3]}, {elapsed:.1f} s")


def test_06_constant_cancellation(acceptance):
    rep = verify_constant_cancellation_random(groups=1000, seed=6)
    acceptance(6, "constant cancellation", rep.passed and rep.observed[0] <= 1e-12,
               f"1000 groups, max deviation {rep.observed[0]:.2e}")


def test_07_expected_reward_identity(acceptance):
    levels = (0.0, 0.25, 0.5, 0.75, 1.0)
    cells = [(q, q0, m) for q in levels for q0 in levels for m in levels]
    seeds = np.random.SeedSequence(7).generate_state(len(cells))
    bad, worst = [], 0.0
    for (q, q0, m), seed in zip(cells, seeds):
        rep = verify_expected_reward(ExecutorSpec(q, q0), m, 3, 100_000, int(seed))
        worst = max(worst, rep.z_or_margin)
        if not rep.passed:
            bad.append((q, q0, m))
    acceptance(7, "expected-reward identity", not bad,
               f"{len(cells)} cells x 1e5 trials, worst |z| {worst:.2f}, {len(bad)} failing")


def test_08_pairwise_propositions(acceptance):
    scan = scan_pairwise_propositions(Fraction(1, 10))
    counter = verify_no_uplift_counterexample(Fraction(1, 10), Fraction(3, 10), Fraction(9, 10), Fraction(1, 10))
    d_full, d_no = counter.observed
    ok = scan.passed and counter.passed and d_no > 0 and d_full < 0
    acceptance(8, "pairwise proposition scan", ok,
               f"{scan.trials} grid points, {len(scan.counterexamples)} counterexamples; "
               f"no-uplift gap {float(d_no):+.2f}, full gap {float(d_full):+.2f}")


def test_09_variance_bound_sign_reliability_and_mutants(acceptance):
    variance = verify_reward_variance_bound(trials=100_000, seed=9)
    pairs = [((ExecutorSpec(0.9, 0.1), 1.0), (ExecutorSpec(0.2, 0.1), 0.5)),
             ((ExecutorSpec(0.8, 0.3), 0.9), (ExecutorSpec(0.5, 0.3), 0.6)),
             ((ExecutorSpec(1.0, 0.0), 1.0), (ExecutorSpec(0.0, 0.0), 0.0))]
    signs = [verify_sign_reliability(a, b, 3, 100_000, seed=90 + i) for i, (a, b) in enumerate(pairs)]
    caught = mutation_harness(seed=0)
    uncaught = [name for name, claims in caught.items() if not claims]
    ok = variance.passed and all(s.passed for s in signs) and len(MUTANTS) >= 6 and not uncaught
    acceptance(9, "variance bound, sign reliability, mutants", ok,
               f"{len(variance.counterexamples)} variance violations, "
               f"{sum(not s.passed for s in signs)} sign violations, "
               f"{len(caught) - len(uncaught)}/{len(caught)} mutants caught")


def test_10_constant_judge(acceptance):
    cs = (0, 0.25, 0.5, 0.75, 1)
    rep = verify_constant_judge_random(cs, groups=50, seed=10)
    acceptance(10, "constant-judge lemma", rep.passed,
               f"{len(cs)} constants x 50 groups, {len(rep.counterexamples)} failures")


def test_11_saturation(acceptance):
    scores = [float(v) for v in (FIXTURES / "saturation600.txt").read_text().split()]
    rate = saturation_diagnostic(scores).table()[1][0][2]
    acceptance(11, "saturation diagnostic", len(scores) == 600 and rate == "95.50%",
               f"{len(scores)} samples, rate {rate}")


def _cli_round_trip(work: Path) -> str:
    valid, kept, stats = work / "valid.jsonl", work / "kept.jsonl", work / "stats.csv"
    codes = [
        main(["groups", "validate", "--in", str(FIXTURES / "groups10.jsonl"), "--out", str(valid)]),
        main(["groups", "filter", "--in", str(valid), "--out", str(kept)]),
        main(["groups", "stats", "--in", str(kept), "--seeds", "10", "--format", "csv", "--out", str(stats)]),
    ]
    assert codes == [EXIT_OK] * 3, codes
    return stats.read_text(encoding="utf-8")


def test_12_cli_round_trip(acceptance, tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first, second = _cli_round_trip(tmp_path / "a"), _cli_round_trip(tmp_path / "b")
    header = first.splitlines()[0]
    ok = header == STATS_HEADER and first == second and len(first.splitlines()) == 2
    acceptance(12, "CLI round trip", ok, f"header {header!r}, identical across runs: {first == second}")
