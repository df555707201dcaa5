"""Regenerate the committed test fixtures.

Run from the repository root: ``python3 tests/fixtures/build_fixtures.py``.
Every output is a pure function of this script.
"""

from __future__ import annotations

import json
from pathlib import Path

from tracereward.prompts import (
    MathExtras,
    render_flaw_prompt,
    render_rubric_prompt,
    write_fixture,
    prompt_hash,
)
from tracereward.taxonomy import CODE_DIMENSIONS, CODE_KINDS, MATH_DIMENSIONS, MATH_KINDS

HERE = Path(__file__).resolve().parent

CODE_PROBLEMS = [
    ("Given an array of integers, return the length of the longest strictly increasing subsequence.",
     "Keep a list tails where tails[i] is the smallest tail of an increasing subsequence of length i+1. "
     "For each value, binary search the first tail that is not smaller and replace it, or append when none exists. "
     "The answer is the final length of tails, which runs in O(n log n)."),
    ("Count the number of islands in a grid of '1' (land) and '0' (water) cells.",
     "Scan every cell; when an unvisited land cell appears, start a breadth-first search that marks the whole "
     "connected component as visited and add one to the island count. Each cell is visited once, so the cost is "
     "linear in the grid size."),
    ("Return the minimum number of coins needed to make amount A from unlimited coins of given denominations, or -1.",
     "Use a table best[0..A] with best[0] = 0 and every other entry set to infinity. For each amount from 1 to A, "
     "try every coin that fits and take one plus the best value of the remainder. Report -1 when best[A] stays infinite."),
    ("Merge overlapping intervals and return the merged list sorted by start.",
     "Sort intervals by their start point. Walk through them keeping the current merged interval; if the next one "
     "starts before or at the current end, extend the end to the larger of the two ends, otherwise emit the current "
     "interval and start a new one. Emit the last interval at the end."),
    ("Check whether a string of brackets '()[]{}' is balanced.",
     "Push every opening bracket onto a stack. On a closing bracket, the stack must be non-empty and its top must be "
     "the matching opener, which is then popped. The string is balanced exactly when the stack is empty after the scan."),
]

MATH_PROBLEMS = [
    ("A baker sells 24 muffins in the morning and twice as many in the afternoon. How many muffins does he sell?",
     "In the afternoon the baker sells 2 * 24 = 48 muffins. Together with the morning that is 24 + 48 = 72 muffins.",
     "72"),
    ("Tom reads 15 pages a day for 6 days and then 20 pages on the seventh day. How many pages did he read?",
     "Over six days Tom reads 15 * 6 = 90 pages. Adding the seventh day gives 90 + 20 = 110 pages in total.",
     "110"),
    ("A shirt costs $40 and is discounted by 25%. What is the sale price?",
     "The discount is 25% of 40, which is 0.25 * 40 = 10 dollars. The sale price is 40 - 10 = 30 dollars.",
     "30"),
    ("Sara has 3 boxes with 12 pencils each and gives away 9 pencils. How many pencils remain?",
     "Sara starts with 3 * 12 = 36 pencils. After giving away 9 she has 36 - 9 = 27 pencils left.",
     "27"),
    ("A car travels 180 miles in 3 hours. At the same speed, how far does it travel in 5 hours?",
     "The speed is 180 / 3 = 60 miles per hour. In 5 hours the car covers 60 * 5 = 300 miles.",
     "300"),
]

FLAWED_CODE = {
    "wrong_algorithm_choice": "Try every subset of the input, check each one, and keep the best result found; this "
                              "exhaustive search covers all possibilities so it must be correct.",
    "missing_edge_case": "Walk through the input once and update the running answer at each step; there is no need "
                         "to think about empty input or a single element because the loop handles everything.",
    "off_by_one": "Loop the index from 1 to n inclusive and compare each element with the one at index i+1, "
                  "updating the answer whenever the comparison succeeds.",
    "incorrect_invariant": "Maintain the structure so that it always holds the largest values seen so far, and "
                           "assume it stays sorted in decreasing order after every update.",
    "complexity_unaware_plan": "For every element, rescan the entire input from the beginning and recompute the "
                               "answer from scratch, which is simple and fast enough for any input size.",
    "pseudo_solution_without_executable_detail": "Process the data in a smart way, handle the important cases "
                                                 "carefully, and combine the partial results into the final answer.",
    "verbose_irrelevant_explanation": "Algorithms have a long history in computer science, and many famous "
                                      "researchers studied problems like this one in great depth over decades.",
}

FLAWED_MATH = {
    "arithmetic_slip": "In the second part the quantity is 2 * 24 = 46, and adding the first part gives 24 + 46 = 70.",
    "wrong_operation": "Divide the first amount by the second amount and subtract the result from the total to get "
                       "the answer.",
    "dropped_case": "Compute the first part of the quantity carefully and report that value as the answer without "
                    "including the remaining part.",
    "unit_mismatch": "Treat the hourly amount as a daily amount and multiply by the number of minutes in the period.",
    "unsupported_jump": "Looking at the numbers, the answer is clearly the larger value without any further steps "
                        "needed here.",
    "premature_answer": "First compute the intermediate amount from the given numbers and stop there, treating it "
                        "as the final result.",
    "verbose_content_free": "Math problems like this require careful thinking, and it is always important to read "
                            "the question twice before answering it.",
}


def _candidate(reasoning, label, dims, level, total, kind=None, index=None, rubric_label=None):
    rubric = {name: level for name in dims}
    rubric["total"] = total
    out = {
        "reasoning": reasoning,
        "label": label,
        "rubric": rubric,
        "rubric_label": rubric_label or ("strong" if label == "positive" else "weak"),
        "rubric_score_raw": round(total * 10, 2),
        "rubric_reason": "fixture",
        "raw_reason_length": len(reasoning.split()) + 7,
        "clean_reason_length": len(reasoning.split()),
    }
    if kind is not None:
        out["negative_kind"] = kind
        out["negative_index"] = index
    return out


def build_groups() -> list[dict]:
    records = []
    for i, (problem, reason) in enumerate(CODE_PROBLEMS):
        kinds = [CODE_KINDS[(i + j) % len(CODE_KINDS)] for j in range(5)]
        negs = []
        for j, kind in enumerate(kinds):
            text = FLAWED_CODE[kind]
            if i == 1 and j == 0:
                text = "Write def solve(grid) that flood fills every island and returns the count."  # leaks code
            if i == 1 and j == 1:
                text = "N/A"  # placeholder
            negs.append(_candidate(text, "negative", CODE_DIMENSIONS, 1 + (j % 2),
                                   round(0.2 + 0.05 * j, 2), kind, j))
        records.append({
            "problem_id": f"code-{i:03d}",
            "source": "code",
            "task_type": "code",
            "problem": problem,
            "reference_solution": "def solve(*args):\n    ...\n",
            "positive_pool": [_candidate(reason, "positive", CODE_DIMENSIONS, 4, 0.9)],
            "negative_bank": negs,
            "metadata": {"source_dataset": "fixture-code", "source_row_index": i,
                         "negative_count": len(negs), "dimension_names": list(CODE_DIMENSIONS)},
        })
    for i, (problem, reason, answer) in enumerate(MATH_PROBLEMS):
        kinds = [MATH_KINDS[(i + j) % len(MATH_KINDS)] for j in range(5)]
        negs = []
        for j, kind in enumerate(kinds):
            text = FLAWED_MATH[kind]
            if i == 3 and j == 4:
                text = FLAWED_MATH[kinds[0]]  # duplicate of the first negative
            if i == 4 and j in (0, 1):
                text = "too short"
            negs.append(_candidate(text, "negative", MATH_DIMENSIONS, j % 3,
                                   round(0.1 + 0.1 * j, 2), kind, j))
        records.append({
            "problem_id": f"gsm8k-{i:03d}",
            "source": "gsm8k",
            "task_type": "math",
            "problem": problem,
            "reference_solution": f"{reason}\n#### {answer}",
            "positive_pool": [_candidate(reason, "positive", MATH_DIMENSIONS, 3 + (i % 2), 0.85)],
            "negative_bank": negs,
            "metadata": {"source_dataset": "fixture-gsm8k", "source_row_index": i,
                         "negative_count": len(negs), "dimension_names": list(MATH_DIMENSIONS)},
        })
    return records


JUDGE_REPLIES = {
    "code_judge_clean": {
        "prompt": lambda: render_rubric_prompt("code", CODE_PROBLEMS[0][0], CODE_PROBLEMS[0][1],
                                               "def lis(a): ..."),
        "reply": json.dumps({"task_understanding": 9, "plan_quality": 8, "step_coherence": 8,
                             "action_support": 9, "non_leakage": 10, "rubric_score": 8.5,
                             "rubric_label": "strong", "rubric_reason": "Plan matches the reference."}),
    },
    "math_judge_fenced": {
        "prompt": lambda: render_rubric_prompt("math", MATH_PROBLEMS[0][0], MATH_PROBLEMS[0][1], "72"),
        "reply": "Here is my assessment:\n```json\n" + json.dumps(
            {"problem_understanding": 10, "solution_strategy": 9, "step_coherence": 9,
             "calculation_correctness": 10, "answer_support": 9, "rubric_score": 9.4,
             "rubric_label": "strong", "rubric_reason": "All steps are correct."}) + "\n```",
    },
    "math_flaw_arithmetic": {
        "prompt": lambda: render_flaw_prompt("arithmetic_slip", MATH_PROBLEMS[0][1], MathExtras("72")),
        "reply": FLAWED_MATH["arithmetic_slip"],
    },
}


def build_judge_store(store: Path) -> dict[str, str]:
    store.mkdir(parents=True, exist_ok=True)
    for old in store.glob("*.txt"):
        old.unlink()
    index = {}
    for name, entry in JUDGE_REPLIES.items():
        prompt = entry["prompt"]()
        write_fixture(store, prompt, entry["reply"])
        index[name] = prompt_hash(prompt)
    (store / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return index


def saturation_scores() -> list[float]:
    """600 judge scores: 573 at 1.0, the rest chosen so the mean is exactly 0.990."""
    return [1.0] * 573 + [0.9] * 6 + [0.8] * 15 + [0.6] * 6


def length_counts() -> list[int]:
    """300 token counts: mean 136.3, 161 below 128, 15 at or above 256, median 125.5."""
    short = [100] * 149 + [125, 126] + [127] * 10
    mid = [161] * 123 + [166]
    long = [300] * 15
    return short + mid + long


def main() -> None:
    (HERE / "groups10.jsonl").write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in build_groups()), encoding="utf-8")
    build_judge_store(HERE / "judge_store")
    (HERE / "saturation600.txt").write_text("\n".join(repr(s) for s in saturation_scores()) + "\n")
    (HERE / "lengths300.txt").write_text("\n".join(str(n) for n in length_counts()) + "\n")


if __name__ == "__main__":
    main()
