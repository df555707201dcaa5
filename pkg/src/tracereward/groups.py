"""Reasoning-group records: schema validation, label conversion, RM input
rendering, filtering and dataset statistics."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

from .cleaning import detect_code_leakage, whitespace_token_count
from .errors import (
    ArgumentError,
    ConsistencyError,
    DomainError,
    ParseError,
    RubricRangeError,
    SchemaError,
)
from .taxonomy import PERTURBATION_KINDS, kinds_for

SOURCES = ("code", "gsm8k")
CANDIDATE_RUBRIC_LABELS = ("positive", "strong", "acceptable", "weak", "bad")
N_DIMENSIONS = 5
N_CLASSES = 5

_CANDIDATE_KEYS = (
    "reasoning",
    "negative_kind",
    "negative_index",
    "label",
    "rubric",
    "rubric_label",
    "rubric_score_raw",
    "rubric_reason",
    "raw_reason_length",
    "clean_reason_length",
    "metadata",
)
_RECORD_KEYS = (
    "problem_id",
    "source",
    "task_type",
    "problem",
    "reference_solution",
    "positive_pool",
    "negative_bank",
    "metadata",
)


@dataclass
class CandidateEntry:
    reasoning: str
    label: str
    rubric: dict[str, Any]
    rubric_label: str
    rubric_score_raw: float
    raw_reason_length: int = 0
    clean_reason_length: int = 0
    negative_kind: str | None = None
    negative_index: int | None = None
    rubric_reason: str | None = None
    metadata: dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(self.rubric["total"])

    def dimension_labels(self, names: Sequence[str]) -> list[int]:
        return [int(self.rubric[n]) for n in names]

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for key in _CANDIDATE_KEYS:
            value = getattr(self, key)
            if value is None and key in ("negative_kind", "negative_index", "rubric_reason", "metadata"):
                continue
            out[key] = value
        out.update(self.extra)
        return out


@dataclass
class GroupRecord:
    problem_id: str
    source: str
    problem: str
    reference_solution: str
    positive_pool: list[CandidateEntry]
    negative_bank: list[CandidateEntry]
    metadata: dict
    task_type: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def domain(self) -> str:
        return "code" if self.source == "code" else "math"

    @property
    def dimension_names(self) -> list[str]:
        return list(self.metadata["dimension_names"])

    @property
    def reference(self) -> CandidateEntry:
        return self.positive_pool[0]

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for key in _RECORD_KEYS:
            value = getattr(self, key)
            if key == "task_type" and value is None:
                continue
            if key in ("positive_pool", "negative_bank"):
                value = [c.to_dict() for c in value]
            out[key] = value
        out.update(self.extra)
        return out


def serialize_group_record(record: GroupRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False)


def _reject_constant(name: str):
    raise ValueError(f"non-finite JSON constant {name}")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise SchemaError(f"missing required field {where}{key}", field=f"{where}{key}")
    return obj[key]


def _require_type(value: Any, types, name: str) -> Any:
    if types is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif types == "number":
        ok = _is_number(value) and math.isfinite(value)
    else:
        ok = isinstance(value, types)
    if not ok:
        raise SchemaError(f"field {name} has wrong type {type(value).__name__}", field=name)
    return value


def _parse_candidate(obj: Any, where: str, expected_label: str, dims: list[str],
                     kinds: tuple[str, ...] | None) -> CandidateEntry:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where} must be an object", field=where)
    p = where + "."
    reasoning = _require_type(_require(obj, "reasoning", p), str, p + "reasoning")
    label = _require(obj, "label", p)
    if label != expected_label:
        raise SchemaError(f"{p}label must be {expected_label!r}, got {label!r}", field=p + "label")

    rubric = _require_type(_require(obj, "rubric", p), dict, p + "rubric")
    clean_rubric: dict[str, Any] = {}
    for name in dims:
        key = f"{p}rubric.{name}"
        if name not in rubric:
            raise SchemaError(f"missing required field {key}", field=key)
        value = rubric[name]
        if _is_number(value) and float(value).is_integer():
            value = int(value)
        _require_type(value, int, key)
        if not 0 <= value <= 4:
            raise RubricRangeError(f"{key}={value} outside label range 0..4", field=key)
        clean_rubric[name] = value
    unknown = set(rubric) - set(dims) - {"total"}
    if unknown:
        key = f"{p}rubric.{sorted(unknown)[0]}"
        raise SchemaError(f"unexpected rubric dimension {key}", field=key)
    total = _require_type(_require(rubric, "total", p + "rubric."), "number", p + "rubric.total")
    if not 0.0 <= total <= 1.0:
        raise RubricRangeError(f"{p}rubric.total={total} outside [0,1]", field=p + "rubric.total")
    clean_rubric["total"] = total

    rubric_label = _require_type(_require(obj, "rubric_label", p), str, p + "rubric_label")
    if rubric_label not in CANDIDATE_RUBRIC_LABELS:
        raise SchemaError(f"{p}rubric_label {rubric_label!r} not recognised", field=p + "rubric_label")
    raw = _require_type(_require(obj, "rubric_score_raw", p), "number", p + "rubric_score_raw")
    if not 0.0 <= raw <= 10.0:
        raise RubricRangeError(f"{p}rubric_score_raw={raw} outside [0,10]", field=p + "rubric_score_raw")
    raw_len = _require_type(obj.get("raw_reason_length", 0), int, p + "raw_reason_length")
    clean_len = _require_type(obj.get("clean_reason_length", 0), int, p + "clean_reason_length")
    for key, value in (("raw_reason_length", raw_len), ("clean_reason_length", clean_len)):
        if value < 0:
            raise SchemaError(f"{p}{key} must be non-negative", field=p + key)

    kind = obj.get("negative_kind")
    index = obj.get("negative_index")
    if expected_label == "negative":
        if kind is None:
            raise SchemaError(f"missing required field {p}negative_kind", field=p + "negative_kind")
        _require_type(kind, str, p + "negative_kind")
        if kinds is not None and kind not in kinds:
            raise SchemaError(f"{p}negative_kind {kind!r} not in the domain taxonomy",
                              field=p + "negative_kind")
        if index is not None:
            _require_type(index, int, p + "negative_index")
    elif kind is not None:
        raise SchemaError(f"positive entry {where} carries a negative_kind", field=p + "negative_kind")

    reason = obj.get("rubric_reason")
    if reason is not None:
        _require_type(reason, str, p + "rubric_reason")
    meta = obj.get("metadata")
    if meta is not None:
        _require_type(meta, dict, p + "metadata")
    extra = {k: v for k, v in obj.items() if k not in _CANDIDATE_KEYS}
    return CandidateEntry(
        reasoning=reasoning,
        label=label,
        rubric=clean_rubric,
        rubric_label=rubric_label,
        rubric_score_raw=raw,
        raw_reason_length=raw_len,
        clean_reason_length=clean_len,
        negative_kind=kind,
        negative_index=index,
        rubric_reason=reason,
        metadata=meta,
        extra=extra,
    )


def parse_group_record(line: str | bytes, *, strict_kinds: bool = True) -> GroupRecord:
    """Parse and validate one JSONL line.

    With ``strict_kinds=False`` unknown negative kinds are accepted so that
    :func:`filter_group` can drop them with a reason instead of failing.
    """
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        offset = len(line[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON at byte {offset}: {exc.msg}", offset=offset) from None
    except ValueError as exc:
        raise ParseError(str(exc), offset=0) from None
    if not isinstance(obj, dict):
        raise SchemaError("group record must be a JSON object", field="<root>")

    problem_id = _require_type(_require(obj, "problem_id", ""), str, "problem_id")
    source = _require(obj, "source", "")
    if source not in SOURCES:
        raise SchemaError(f"source must be one of {SOURCES}, got {source!r}", field="source")
    task_type = obj.get("task_type")
    if task_type is not None:
        _require_type(task_type, str, "task_type")
    problem = _require_type(_require(obj, "problem", ""), str, "problem")
    reference = _require_type(_require(obj, "reference_solution", ""), str, "reference_solution")

    meta = _require_type(_require(obj, "metadata", ""), dict, "metadata")
    for key in ("source_dataset", "source_row_index", "negative_count", "dimension_names"):
        _require(meta, key, "metadata.")
    dims = _require_type(meta["dimension_names"], list, "metadata.dimension_names")
    if len(dims) != N_DIMENSIONS or not all(isinstance(d, str) for d in dims):
        raise SchemaError("metadata.dimension_names must hold exactly 5 names",
                          field="metadata.dimension_names")
    _require_type(meta["negative_count"], int, "metadata.negative_count")

    positives = _require_type(_require(obj, "positive_pool", ""), list, "positive_pool")
    if not positives:
        raise SchemaError("positive_pool must not be empty", field="positive_pool")
    negatives = _require_type(_require(obj, "negative_bank", ""), list, "negative_bank")
    kinds = kinds_for(source) if strict_kinds else None
    pos = [_parse_candidate(c, f"positive_pool[{i}]", "positive", dims, None)
           for i, c in enumerate(positives)]
    neg = [_parse_candidate(c, f"negative_bank[{i}]", "negative", dims, kinds)
           for i, c in enumerate(negatives)]
    if meta["negative_count"] != len(neg):
        raise SchemaError(
            f"metadata.negative_count={meta['negative_count']} but negative_bank has {len(neg)}",
            field="metadata.negative_count",
        )
    extra = {k: v for k, v in obj.items() if k not in _RECORD_KEYS}
    return GroupRecord(
        problem_id=problem_id,
        source=source,
        problem=problem,
        reference_solution=reference,
        positive_pool=pos,
        negative_bank=neg,
        metadata=dict(meta),
        task_type=task_type,
        extra=extra,
    )


def iter_jsonl(lines: Iterable[str], *, strict_kinds: bool = True):
    """Yield ``(line_number, record)``; blank lines are skipped."""
    for n, line in enumerate(lines, 1):
        if line.strip():
            yield n, parse_group_record(line, strict_kinds=strict_kinds)


# -- rubric label conversion -------------------------------------------------


@dataclass(frozen=True)
class LabelConversion:
    raw_dims: tuple[float, ...]
    raw_total: float
    class_labels: tuple[int, ...]
    normalized_total: float


def score_to_class(score: float) -> int:
    return min(4, max(0, math.floor(score / 2)))


def convert_rubric_labels(raw_dims: Sequence[float], raw_total: float) -> LabelConversion:
    values = list(raw_dims) + [raw_total]
    if len(raw_dims) != N_DIMENSIONS:
        raise ArgumentError(f"expected {N_DIMENSIONS} raw dimension scores, got {len(raw_dims)}")
    for v in values:
        if not _is_number(v) or not math.isfinite(v):
            raise DomainError(f"rubric score {v!r} is not a finite number")
    dims = tuple(min(10.0, max(0.0, float(v))) for v in raw_dims)
    total = min(10.0, max(0.0, float(raw_total)))
    return LabelConversion(
        raw_dims=dims,
        raw_total=total,
        class_labels=tuple(score_to_class(v) for v in dims),
        normalized_total=min(1.0, max(0.0, total / 10.0)),
    )


# -- RM input rendering ------------------------------------------------------

_RM_INPUT_RE = re.compile(
    r"<task>\n(.*)\n</task>\n<type>(code|math)</type>\n<problem>\n(.*)\n</problem>\n"
    r"<reasoning>\n(.*)\n</reasoning>",
    re.S,
)


def render_rm_input(task: str, type: str, problem: str, reasoning: str) -> str:
    """Tagged block holding only task, type, problem and candidate reasoning."""
    if type not in ("code", "math"):
        raise ArgumentError(f"type must be 'code' or 'math', got {type!r}")
    return (
        f"<task>\n{task}\n</task>\n"
        f"<type>{type}</type>\n"
        f"<problem>\n{problem}\n</problem>\n"
        f"<reasoning>\n{reasoning}\n</reasoning>"
    )


def parse_rm_input(text: str) -> tuple[str, str, str, str]:
    """Inverse of :func:`render_rm_input`; earlier tags match outermost."""
    m = _RM_INPUT_RE.fullmatch(text)
    if m is None:
        raise ParseError("not a rendered RM input block")
    return m.group(1), m.group(2), m.group(3), m.group(4)


# -- filtering ----------------------------------------------------------------

_PLACEHOLDER_RE = re.compile(
    r"(?:\.{3}|…|n/?a|none|null|todo|tbd|placeholder|<\w+>|\[\w+\]|\{\w+\})",
    re.IGNORECASE,
)


def is_placeholder(text: str) -> bool:
    stripped = text.strip()
    return not stripped or _PLACEHOLDER_RE.fullmatch(stripped) is not None


@dataclass(frozen=True)
class FilterConfig:
    min_tokens: int = 5
    min_negatives: int = 4


@dataclass
class FilterDecision:
    keep: bool
    reasons: list[str]
    record: GroupRecord

    @property
    def decision(self) -> str:
        return "keep" if self.keep else "drop"


def filter_group(record: GroupRecord, config: FilterConfig = FilterConfig()) -> FilterDecision:
    kinds = set(kinds_for(record.source))
    reasons: list[str] = []
    kept: list[CandidateEntry] = []
    seen: set[str] = set()
    for i, neg in enumerate(record.negative_bank):
        rule = None
        if neg.negative_kind not in kinds:
            rule = "unknown_kind"
        elif is_placeholder(neg.reasoning):
            rule = "placeholder"
        elif whitespace_token_count(neg.reasoning) < config.min_tokens:
            rule = "too_short"
        elif record.domain == "code" and not detect_code_leakage(neg.reasoning).is_clean:
            rule = "leakage"
        elif neg.reasoning.strip() in seen:
            rule = "duplicate"
        if rule is not None:
            reasons.append(f"negative[{i}]:{rule}")
            continue
        seen.add(neg.reasoning.strip())
        kept.append(neg)

    keep = True
    if not record.positive_pool:
        reasons.append("no_positive")
        keep = False
    if len(kept) < config.min_negatives:
        reasons.append("min_negatives")
        keep = False
    meta = dict(record.metadata)
    meta["negative_count"] = len(kept)
    return FilterDecision(keep, reasons, replace(record, negative_bank=kept, metadata=meta))


# -- dataset statistics -------------------------------------------------------


@dataclass
class DatasetStats:
    """Additive aggregate over kept groups; merge is associative and commutative."""

    seed_count: int = 0
    kept_groups: int = 0
    reference_count: int = 0
    flawed_count: int = 0
    ref_len_sum: int = 0
    flawed_len_sum: int = 0
    sources: Counter = field(default_factory=Counter)
    kind_counts: Counter = field(default_factory=Counter)
    kind_score_sums: dict[str, float] = field(default_factory=dict)
    kind_len_sums: Counter = field(default_factory=Counter)
    dimension_label_histogram: dict[str, list[int]] = field(default_factory=dict)

    def add(self, record: GroupRecord) -> None:
        self.kept_groups += 1
        self.sources[record.source] += 1
        if record.positive_pool:
            self.reference_count += 1
            self.ref_len_sum += whitespace_token_count(record.reference.reasoning)
        for neg in record.negative_bank:
            n = whitespace_token_count(neg.reasoning)
            self.flawed_count += 1
            self.flawed_len_sum += n
            self.kind_counts[neg.negative_kind] += 1
            self.kind_len_sums[neg.negative_kind] += n
            self.kind_score_sums[neg.negative_kind] = (
                self.kind_score_sums.get(neg.negative_kind, 0.0) + neg.total
            )
        names = record.dimension_names
        for cand in list(record.positive_pool) + list(record.negative_bank):
            for name, lab in zip(names, cand.dimension_labels(names)):
                self.dimension_label_histogram.setdefault(name, [0] * N_CLASSES)[lab] += 1

    def merge(self, other: DatasetStats) -> DatasetStats:
        hist = {k: list(v) for k, v in self.dimension_label_histogram.items()}
        for k, v in other.dimension_label_histogram.items():
            bins = hist.setdefault(k, [0] * N_CLASSES)
            for i, c in enumerate(v):
                bins[i] += c
        scores = dict(self.kind_score_sums)
        for k, v in other.kind_score_sums.items():
            scores[k] = scores.get(k, 0.0) + v
        return DatasetStats(
            seed_count=self.seed_count + other.seed_count,
            kept_groups=self.kept_groups + other.kept_groups,
            reference_count=self.reference_count + other.reference_count,
            flawed_count=self.flawed_count + other.flawed_count,
            ref_len_sum=self.ref_len_sum + other.ref_len_sum,
            flawed_len_sum=self.flawed_len_sum + other.flawed_len_sum,
            sources=self.sources + other.sources,
            kind_counts=self.kind_counts + other.kind_counts,
            kind_score_sums=scores,
            kind_len_sums=self.kind_len_sums + other.kind_len_sums,
            dimension_label_histogram=hist,
        )

    @property
    def retention_rate(self) -> float:
        return self.kept_groups / self.seed_count if self.seed_count > 0 else 0.0

    @property
    def avg_ref_len(self) -> float:
        return self.ref_len_sum / self.reference_count if self.reference_count else 0.0

    @property
    def avg_flawed_len(self) -> float:
        return self.flawed_len_sum / self.flawed_count if self.flawed_count else 0.0

    @property
    def per_perturbation(self) -> dict[str, dict[str, float]]:
        out = {}
        for kind in sorted(self.kind_counts):
            count = self.kind_counts[kind]
            out[kind] = {
                "count": count,
                "share": count / self.flawed_count,
                "avg_judge_score": self.kind_score_sums[kind] / count,
                "avg_length": self.kind_len_sums[kind] / count,
            }
        return out

    @property
    def split_name(self) -> str:
        if set(self.sources) == {"gsm8k"}:
            return "Math"
        if set(self.sources) == {"code"}:
            return "Code"
        return "Mixed"

    def check(self) -> None:
        if self.seed_count < self.kept_groups:
            raise ConsistencyError(
                f"seed_count={self.seed_count} is smaller than kept_groups={self.kept_groups}"
            )

    def to_dict(self) -> dict:
        return {
            "seed_count": self.seed_count,
            "kept_groups": self.kept_groups,
            "reference_count": self.reference_count,
            "flawed_count": self.flawed_count,
            "retention_rate": self.retention_rate,
            "avg_ref_len": self.avg_ref_len,
            "avg_flawed_len": self.avg_flawed_len,
            "per_perturbation": self.per_perturbation,
            "dimension_label_histogram": {
                k: list(v) for k, v in sorted(self.dimension_label_histogram.items())
            },
        }

    # Table layouts follow the dataset audit tables column for column.

    def table(self) -> tuple[list[str], list[list]]:
        headers = ["Split", "Seed problems", "Kept groups", "Reference traces",
                   "Flawed traces", "Avg. ref len.", "Avg. flawed len."]
        row = [self.split_name, self.seed_count, self.kept_groups, self.reference_count,
               self.flawed_count, f"{self.avg_ref_len:.2f}", f"{self.avg_flawed_len:.2f}"]
        return headers, [row]

    def perturbation_table(self) -> tuple[list[str], list[list]]:
        headers = ["Perturbation type", "Count", "Share", "Avg. judge score", "Avg. length"]
        rows = [
            [_kind_label(kind), v["count"], f"{100 * v['share']:.2f}%", f"{v['avg_judge_score']:.2f}",
             f"{v['avg_length']:.2f}"]
            for kind, v in self.per_perturbation.items()
        ]
        return headers, rows

    def dimension_table(self) -> tuple[list[str], list[list]]:
        headers = ["Dimension", "Low: 0-1", "Mid: 2", "Good: 3", "Strong: 4"]
        rows = []
        for name, bins in self.dimension_label_histogram.items():
            total = sum(bins) or 1
            merged = [bins[0] + bins[1], bins[2], bins[3], bins[4]]
            label = name.replace("_", " ").capitalize()
            rows.append([label] + [f"{100 * c / total:.1f}%" for c in merged])
        return headers, rows


def _kind_label(slug: str) -> str:
    kind = PERTURBATION_KINDS.get(slug)
    return kind.display_name if kind else slug


def dataset_statistics(records: Iterable[GroupRecord], seed_count: int) -> DatasetStats:
    stats = DatasetStats(seed_count=seed_count)
    for record in records:
        stats.add(record)
    stats.check()
    return stats
