"""Perturbation kinds and rubric dimensions for the two domains."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ArgumentError


@dataclass(frozen=True)
class PerturbationKind:
    slug: str
    domain: str
    display_name: str
    definition: str


_CODE = [
    ("wrong_algorithm_choice", "Wrong algorithm choice",
     "Mutate the high-level algorithm or problem decomposition."),
    ("missing_edge_case", "Missing edge case",
     "Remove or weaken boundary handling and case coverage."),
    ("off_by_one", "Off-by-one",
     "Corrupt index arithmetic or inclusive/exclusive range reasoning."),
    ("incorrect_invariant", "Incorrect invariant",
     "Corrupt a maintained state assumption, loop invariant, or proof invariant."),
    ("complexity_unaware_plan", "Complexity-unaware plan",
     "Ignore input-scale constraints or propose an infeasible plan."),
    ("pseudo_solution_without_executable_detail", "Pseudo-solution without executable detail",
     "Replace actionable details with vague pseudo-solution text."),
    ("verbose_irrelevant_explanation", "Verbose irrelevant explanation",
     "Replace useful reasoning with verbose off-target discussion."),
]

_MATH = [
    ("arithmetic_slip", "Arithmetic slip",
     "Corrupt a small but consequential numeric calculation."),
    ("wrong_operation", "Wrong operation",
     "Use the wrong operation, formula, or equation setup."),
    ("dropped_case", "Dropped case",
     "Omit a required condition, case, entity, or final step."),
    ("unit_mismatch", "Unit mismatch",
     "Confuse units, rates, time spans, or quantities."),
    ("unsupported_jump", "Unsupported jump",
     "Jump to a conclusion without the needed intermediate support."),
    ("premature_answer", "Premature answer",
     "Stop at an intermediate value and treat it as the final result."),
    ("verbose_content_free", "Verbose content-free",
     "Add generic filler instead of mathematically useful content."),
]

PERTURBATION_KINDS: dict[str, PerturbationKind] = {
    slug: PerturbationKind(slug, domain, name, definition)
    for domain, rows in (("code", _CODE), ("math", _MATH))
    for slug, name, definition in rows
}

CODE_KINDS = tuple(s for s, _, _ in _CODE)
MATH_KINDS = tuple(s for s, _, _ in _MATH)

CODE_DIMENSIONS = (
    "task_understanding",
    "plan_quality",
    "step_coherence",
    "action_support",
    "non_leakage",
)
MATH_DIMENSIONS = (
    "problem_understanding",
    "solution_strategy",
    "step_coherence",
    "calculation_correctness",
    "answer_support",
)

JUDGE_LABELS = ("strong", "acceptable", "weak", "bad")


def kinds_for(domain: str) -> tuple[str, ...]:
    """Kinds for a domain; accepts the dataset source name ``gsm8k`` as math."""
    if domain == "code":
        return CODE_KINDS
    if domain in ("math", "gsm8k"):
        return MATH_KINDS
    raise ArgumentError(f"unknown domain {domain!r}")


def dimensions_for(domain: str) -> tuple[str, ...]:
    if domain == "code":
        return CODE_DIMENSIONS
    if domain in ("math", "gsm8k"):
        return MATH_DIMENSIONS
    raise ArgumentError(f"unknown domain {domain!r}")


def get_kind(slug: str) -> PerturbationKind:
    try:
        return PERTURBATION_KINDS[slug]
    except KeyError:
        raise ArgumentError(f"unknown perturbation kind {slug!r}") from None
