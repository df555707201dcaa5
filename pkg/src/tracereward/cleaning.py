"""Deterministic reason-only cleaning for code and math traces.

All cuts are literal, case-sensitive string matches. Removed regions are
reported as byte offsets into the original UTF-8 text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Literal

Domain = Literal["code", "math"]

SPAN_KINDS = (
    "think_cut",
    "reference_action_cut",
    "code_fence_cut",
    "explanation_cut",
    "answer_marker",
    "calc_annotation",
    "trailing_blank",
)

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
CODE_FENCE = "```"
EXPLANATION_MARKERS = ("### Explanation", "## Explanation", "**Explanation:**")

# `<<expr>>value`; value is an optionally signed decimal right after `>>`.
_CALC_RE = re.compile(r"<<([^\n]*?)>>([+-]?\d+(?:\.\d+)?)?")
_ANSWER_RE = re.compile(r"[ \t]*####[^\n]*")
_DEF_CLASS_RE = re.compile(r"\b(def|class)\b")
_LITERAL_LEAK_MARKERS = (CODE_FENCE, "<call>", "final code")


@dataclass(frozen=True)
class RawTrace:
    text: str
    domain: Domain = "code"

    def __post_init__(self):
        if self.domain not in ("code", "math"):
            raise ValueError(f"domain must be 'code' or 'math', got {self.domain!r}")


@dataclass(frozen=True)
class RemovedSpan:
    kind: str
    start: int
    end: int

    def to_dict(self) -> dict:
        return {"kind": self.kind, "start": self.start, "end": self.end}


@dataclass(frozen=True)
class CleanTrace:
    text: str
    removed_spans: tuple[RemovedSpan, ...] = ()

    def spans_as_dicts(self) -> list[dict]:
        return [s.to_dict() for s in self.removed_spans]


@dataclass(frozen=True)
class LeakageReport:
    markers_found: tuple[tuple[str, int], ...] = field(default_factory=tuple)

    @property
    def is_clean(self) -> bool:
        return not self.markers_found

    @property
    def markers(self) -> list[str]:
        return [m for m, _ in self.markers_found]


class _Editor:
    """Tracks deletions against the original string.

    Each deletion is expressed in coordinates of the current (already edited)
    view and mapped back to maximal runs of original characters, so recorded
    spans never overlap.
    """

    def __init__(self, text: str):
        self.original = text
        self.keep = [True] * len(text)
        self.spans: list[tuple[str, int, int]] = []
        self._index: list[int] = list(range(len(text)))
        self._text = text

    @property
    def text(self) -> str:
        return self._text

    def delete(self, start: int, end: int, kind: str) -> None:
        if start >= end:
            return
        run_start = prev = None
        for orig in self._index[start:end]:
            self.keep[orig] = False
            if run_start is None:
                run_start = prev = orig
            elif orig == prev + 1:
                prev = orig
            else:
                self.spans.append((kind, run_start, prev + 1))
                run_start = prev = orig
        if run_start is not None:
            self.spans.append((kind, run_start, prev + 1))
        self._refresh()

    def delete_many(self, ranges: list[tuple[int, int]], kind: str) -> None:
        # right to left so earlier view coordinates stay valid
        for start, end in sorted(ranges, reverse=True):
            self.delete(start, end, kind)

    def truncate(self, at: int, kind: str) -> None:
        self.delete(at, len(self._text), kind)

    def _refresh(self) -> None:
        self._index = [i for i, k in enumerate(self.keep) if k]
        self._text = "".join(self.original[i] for i in self._index)

    def result(self) -> CleanTrace:
        byte_at = _byte_offsets(self.original)
        merged: list[tuple[str, int, int]] = []
        for kind, s, e in sorted(self.spans, key=lambda t: t[1]):
            if merged and merged[-1][0] == kind and merged[-1][2] == s:
                merged[-1] = (kind, merged[-1][1], e)
            else:
                merged.append((kind, s, e))
        spans = tuple(RemovedSpan(k, byte_at[s], byte_at[e]) for k, s, e in merged)
        return CleanTrace(self._text, spans)


def _byte_offsets(text: str) -> list[int]:
    offsets = [0] * (len(text) + 1)
    total = 0
    for i, ch in enumerate(text):
        offsets[i] = total
        total += len(ch.encode("utf-8"))
    offsets[len(text)] = total
    return offsets


def _strip_edges(ed: _Editor) -> None:
    text = ed.text
    tail = len(text.rstrip())
    ed.delete(tail, len(text), "trailing_blank")
    text = ed.text
    head = len(text) - len(text.lstrip())
    ed.delete(0, head, "trailing_blank")


def _code_pass(ed: _Editor, reference_action: str | None) -> None:
    idx = ed.text.find(THINK_CLOSE)
    if idx >= 0:
        ed.truncate(idx, "think_cut")
    if reference_action:
        idx = ed.text.find(reference_action)
        if idx >= 0:
            ed.truncate(idx, "reference_action_cut")
    idx = ed.text.find(CODE_FENCE)
    if idx >= 0:
        ed.truncate(idx, "code_fence_cut")
    hits = [i for i in (ed.text.find(m) for m in EXPLANATION_MARKERS) if i >= 0]
    if hits:
        ed.truncate(min(hits), "explanation_cut")
    opens = [(m.start(), m.end()) for m in re.finditer(re.escape(THINK_OPEN), ed.text)]
    ed.delete_many(opens, "think_cut")
    _strip_edges(ed)


def clean_code_reason(raw: RawTrace | str, reference_action: str | None = None) -> CleanTrace:
    """Cut a code reasoning passage down to an answer-free planning trace.

    Rules apply in order: cut at ``</think>``, cut before the reference
    action, cut before a code fence, cut before an explanation heading, drop
    ``<think>`` markers, trim. The pass repeats until nothing changes, since
    deleting a marker can splice a new one together.
    """
    text = raw.text if isinstance(raw, RawTrace) else raw
    if isinstance(raw, RawTrace) and raw.domain != "code":
        raise ValueError("clean_code_reason expects a code trace")
    ed = _Editor(text)
    while True:
        before = ed.text
        _code_pass(ed, reference_action)
        if ed.text == before:
            break
    return ed.result()


def _answer_marker_ranges(text: str) -> list[tuple[int, int]]:
    ranges = []
    for m in _ANSWER_RE.finditer(text):
        start, end = m.start(), m.end()
        line_start = text.rfind("\n", 0, start) + 1
        if text[line_start:start].strip() == "":
            # whole line goes, together with one adjacent newline
            start = line_start
            if end < len(text) and text[end] == "\n":
                end += 1
            elif start > 0:
                start -= 1
        ranges.append((start, end))
    return _merge_ranges(ranges)


def _merge_ranges(ranges: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for s, e in sorted(ranges):
        if out and s <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], e))
        else:
            out.append((s, e))
    return out


def _math_pass(ed: _Editor) -> None:
    ed.delete_many(_answer_marker_ranges(ed.text), "answer_marker")
    calc = []
    for m in _CALC_RE.finditer(ed.text):
        calc.append((m.start(), m.start(1)))  # "<<"
        calc.append((m.end(1), m.end()))  # ">>value"
    ed.delete_many(calc, "calc_annotation")
    text = ed.text
    ed.delete(len(text.rstrip()), len(text), "trailing_blank")


def clean_math_reason(raw: RawTrace | str) -> CleanTrace:
    """Remove GSM8K answer markers and calculator annotations, strip the tail."""
    text = raw.text if isinstance(raw, RawTrace) else raw
    if isinstance(raw, RawTrace) and raw.domain != "math":
        raise ValueError("clean_math_reason expects a math trace")
    ed = _Editor(text)
    while True:
        before = ed.text
        _math_pass(ed)
        if ed.text == before:
            break
    return ed.result()


def clean_reason(raw: RawTrace, reference_action: str | None = None) -> CleanTrace:
    if raw.domain == "code":
        return clean_code_reason(raw, reference_action)
    return clean_math_reason(raw)


def detect_code_leakage(text: str) -> LeakageReport:
    if not text.strip():
        return LeakageReport((("empty", 0),))
    byte_at = _byte_offsets(text)
    found = []
    for marker in _LITERAL_LEAK_MARKERS:
        start = text.find(marker)
        while start >= 0:
            found.append((marker, byte_at[start]))
            start = text.find(marker, start + len(marker))
    for m in _DEF_CLASS_RE.finditer(text):
        found.append((m.group(1), byte_at[m.start()]))
    found.sort(key=lambda t: (t[1], t[0]))
    return LeakageReport(tuple(found))


def whitespace_token_count(text: str) -> int:
    return len(text.split())
