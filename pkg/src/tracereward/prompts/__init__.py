"""Flaw-generation and rubric-judge prompts, judge-response parsing and the
acceptance filter for generated flawed traces."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable

from ..cleaning import detect_code_leakage, whitespace_token_count
from ..errors import ArgumentError, ParseError, SchemaError
from ..groups import LabelConversion, convert_rubric_labels
from ..taxonomy import JUDGE_LABELS, PerturbationKind, dimensions_for, get_kind
from .backend import AnnotationBackend, HttpBackend, StubBackend, prompt_hash, write_fixture

__all__ = [
    "AnnotationBackend",
    "HttpBackend",
    "JudgeResponse",
    "MathExtras",
    "RenderedPrompt",
    "StubBackend",
    "accept_flawed_trace",
    "load_template",
    "parse_rubric_response",
    "prompt_hash",
    "render_flaw_prompt",
    "render_rubric_prompt",
    "write_fixture",
]

TEMPLATE_VERSION = "v1"
_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


@lru_cache(maxsize=None)
def load_template(name: str, version: str = TEMPLATE_VERSION) -> str:
    path = resources.files(__package__).joinpath("templates", version, f"{name}.txt")
    text = path.read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


def template_placeholders(template: str) -> set[str]:
    return set(_PLACEHOLDER_RE.findall(template))


def fill(template: str, values: dict[str, str]) -> str:
    """Substitute ``{name}`` tokens in a single pass.

    Payload text is inserted verbatim and never rescanned, so a payload that
    itself contains ``{problem}`` stays as written.
    """
    missing = template_placeholders(template) - set(values)
    if missing:
        raise ArgumentError(f"template placeholders left unfilled: {sorted(missing)}")
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template)


@dataclass(frozen=True)
class RenderedPrompt:
    system: str
    user: str
    placeholders_filled: dict[str, str] = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {"system": self.system, "user": self.user,
                "placeholders_filled": dict(self.placeholders_filled)}


@dataclass(frozen=True)
class MathExtras:
    action_gt: str
    negative_kind: str | None = None
    mutation_target: str | None = None


def render_flaw_prompt(kind: PerturbationKind | str, raw_reason: str,
                       math_extras: MathExtras | None = None) -> RenderedPrompt:
    if isinstance(kind, str):
        kind = get_kind(kind)
    values = {
        "display_name": kind.display_name,
        "definition": kind.definition,
        "raw_reason": raw_reason,
    }
    if kind.domain == "math":
        if math_extras is None:
            raise ArgumentError(f"math kind {kind.slug!r} needs math extras (action_gt)")
        values.update(
            negative_kind=math_extras.negative_kind or kind.slug,
            mutation_target=math_extras.mutation_target or kind.definition,
            action_gt=math_extras.action_gt,
        )
    elif math_extras is not None:
        raise ArgumentError(f"code kind {kind.slug!r} does not take math extras")
    prefix = kind.domain
    system = load_template(f"{prefix}_flaw_system")
    user = fill(load_template(f"{prefix}_flaw_user"), values)
    return RenderedPrompt(system, user, values)


def render_rubric_prompt(domain: str, problem: str, reason_clean: str, action_gt: str) -> RenderedPrompt:
    if domain not in ("code", "math"):
        raise ArgumentError(f"domain must be 'code' or 'math', got {domain!r}")
    values = {"problem": problem, "reason_clean": reason_clean, "action_gt": action_gt}
    # the code judge listing is a single prompt with no separate system part
    system = load_template("math_judge_system") if domain == "math" else ""
    user = fill(load_template(f"{domain}_judge_user"), values)
    return RenderedPrompt(system, user, values)


@dataclass(frozen=True)
class JudgeResponse:
    domain: str
    dims: dict[str, float]
    rubric_score: float
    rubric_label: str
    rubric_reason: str
    lenient: bool = False

    @property
    def normalized_score(self) -> float:
        return self.rubric_score / 10.0

    def labels(self) -> LabelConversion:
        return convert_rubric_labels(list(self.dims.values()), self.rubric_score)

    def to_dict(self) -> dict:
        out = dict(self.dims)
        out.update(rubric_score=self.rubric_score, rubric_label=self.rubric_label,
                   rubric_reason=self.rubric_reason)
        return out


def _first_balanced_object(text: str) -> str | None:
    start = text.find("{")
    while start >= 0:
        depth = 0
        in_str = escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        start = text.find("{", start + 1)
    return None


def _reject_constant(name: str):
    raise ValueError(f"non-finite constant {name}")


def _loads_object(text: str):
    obj = json.loads(text, parse_constant=_reject_constant)
    if not isinstance(obj, dict):
        raise ValueError("judge output is not a JSON object")
    return obj


def parse_rubric_response(text: str, domain: str) -> JudgeResponse:
    """Parse a strict-JSON judge reply.

    If strict parsing fails, the first balanced ``{...}`` block is tried once
    and the result is marked ``lenient``.
    """
    dims_names = dimensions_for(domain)
    lenient = False
    try:
        obj = _loads_object(text)
    except ValueError as strict_exc:
        block = _first_balanced_object(text)
        if block is None:
            raise ParseError(f"judge output is not JSON: {strict_exc}") from None
        try:
            obj = _loads_object(block)
        except ValueError as exc:
            raise ParseError(f"judge output is not JSON: {exc}") from None
        lenient = True

    def number(name: str) -> float:
        if name not in obj:
            raise ParseError(f"judge output missing field {name}", field=name)
        value = obj[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ParseError(f"judge field {name} is not a finite number", field=name)
        return min(10.0, max(0.0, float(value)))

    dims = {name: number(name) for name in dims_names}
    score = number("rubric_score")
    for name in ("rubric_label", "rubric_reason"):
        if name not in obj:
            raise ParseError(f"judge output missing field {name}", field=name)
        if not isinstance(obj[name], str):
            raise ParseError(f"judge field {name} must be a string", field=name)
    label = obj["rubric_label"]
    if label not in JUDGE_LABELS:
        raise SchemaError(f"rubric_label {label!r} not in {JUDGE_LABELS}", field="rubric_label")
    return JudgeResponse(domain, dims, score, label, obj["rubric_reason"], lenient)


def accept_flawed_trace(text: str, domain: str, existing: Iterable[str] = (),
                        min_tokens: int = 5) -> tuple[bool, list[str]]:
    """Apply the rejection rules in order and report the first one that fires."""
    if not text.strip():
        return False, ["empty"]
    if domain == "code":
        markers = detect_code_leakage(text).markers
        if markers:
            return False, [f"leakage:{m}" for m in dict.fromkeys(markers)]
    if text.strip() in {e.strip() for e in existing}:
        return False, ["duplicate"]
    if whitespace_token_count(text) < min_tokens:
        return False, ["too_short"]
    return True, []
