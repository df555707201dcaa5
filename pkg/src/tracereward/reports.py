"""RM validation metrics, training diagnostics and deterministic report files."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ArgumentError


@dataclass(frozen=True)
class ScoredGroup:
    problem_id: str
    reference_score: float
    flawed: tuple[tuple[float, str], ...]
    reference_total_target: float | None = None
    flawed_total_targets: tuple[float, ...] | None = None
    reference_dim_pred: tuple[int, ...] | None = None
    reference_dim_labels: tuple[int, ...] | None = None
    flawed_dim_preds: tuple[tuple[int, ...], ...] | None = None
    flawed_dim_labels: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "flawed", tuple((float(s), str(k)) for s, k in self.flawed))
        if not self.flawed:
            raise ArgumentError(f"group {self.problem_id!r} has no flawed entries")
        if self.flawed_total_targets is not None:
            targets = tuple(float(t) for t in self.flawed_total_targets)
            if len(targets) != len(self.flawed):
                raise ArgumentError("need one total target per flawed entry")
            object.__setattr__(self, "flawed_total_targets", targets)

    @classmethod
    def from_dict(cls, obj: dict) -> ScoredGroup:
        def tup(v):
            return None if v is None else tuple(tuple(x) if isinstance(x, list) else x for x in v)

        return cls(
            problem_id=str(obj["problem_id"]),
            reference_score=float(obj["reference_score"]),
            flawed=tuple((f["score"], f["kind"]) for f in obj["flawed"]),
            reference_total_target=obj.get("reference_total_target"),
            flawed_total_targets=tup(obj.get("flawed_total_targets")),
            reference_dim_pred=tup(obj.get("reference_dim_pred")),
            reference_dim_labels=tup(obj.get("reference_dim_labels")),
            flawed_dim_preds=tup(obj.get("flawed_dim_preds")),
            flawed_dim_labels=tup(obj.get("flawed_dim_labels")),
        )


@dataclass(frozen=True)
class KindMetrics:
    pairs: int
    pairwise_acc: float
    mean_margin: float


@dataclass(frozen=True)
class ValidationReport:
    groups: int
    candidates: int
    neg_pairs: int
    pairwise_acc: float
    group_acc: float
    spearman: float | None
    mae: float | None
    rmse: float | None
    mean_margin: float
    dim_acc: float | None = None
    per_kind: dict[str, KindMetrics] = field(default_factory=dict)

    TABLE_COLUMNS = ("Groups", "Candidates", "Neg. pairs", "Pairwise acc.", "Group acc.",
                     "Total Spearman", "Total MAE", "Total RMSE", "Dim. acc.")

    def table(self) -> tuple[list[str], list[list]]:
        row = [self.groups, self.candidates, self.neg_pairs, _pct(self.pairwise_acc),
               _pct(self.group_acc), _num(self.spearman), _num(self.mae), _num(self.rmse),
               _pct(self.dim_acc)]
        return list(self.TABLE_COLUMNS), [row]

    def per_kind_table(self) -> tuple[list[str], list[list]]:
        header = ["Perturbation type", "Pairs", "Pairwise acc.", "Mean margin"]
        rows = [[k, m.pairs, _pct(m.pairwise_acc), _num(m.mean_margin)]
                for k, m in sorted(self.per_kind.items())]
        return header, rows

    def to_dict(self) -> dict:
        return {
            "groups": self.groups,
            "candidates": self.candidates,
            "neg_pairs": self.neg_pairs,
            "pairwise_acc": self.pairwise_acc,
            "group_acc": self.group_acc,
            "spearman": self.spearman,
            "mae": self.mae,
            "rmse": self.rmse,
            "mean_margin": self.mean_margin,
            "dim_acc": self.dim_acc,
            "per_kind": {k: {"pairs": m.pairs, "pairwise_acc": m.pairwise_acc,
                             "mean_margin": m.mean_margin}
                         for k, m in sorted(self.per_kind.items())},
        }


def _pct(v) -> str:
    return "" if v is None else f"{100 * v:.2f}%"


def _num(v) -> str:
    return "" if v is None else f"{v:.4f}"


def spearman(a: Sequence[float], b: Sequence[float]) -> float | None:
    """Rank correlation with average ranks for ties; None if undefined."""
    if len(a) != len(b):
        raise ArgumentError("spearman needs two sequences of equal length")
    if len(a) < 2:
        return None
    ra, rb = rankdata(a), rankdata(b)
    if np.ptp(ra) == 0 or np.ptp(rb) == 0:
        return None
    return float(np.corrcoef(ra, rb)[0, 1])


def rm_validation_metrics(groups: Sequence[ScoredGroup]) -> ValidationReport:
    """Reference-vs-flawed accuracy, regression and per-kind metrics.

    A pair counts as a win only when the reference scores strictly higher;
    ties count as losses.
    """
    if not groups:
        raise ArgumentError("rm_validation_metrics needs at least one group")
    wins = pairs = group_wins = candidates = 0
    margins: list[float] = []
    kind_stats: dict[str, list] = {}
    preds: list[float] = []
    targets: list[float] = []
    dim_hits = dim_total = 0
    for g in groups:
        candidates += 1 + len(g.flawed)
        top = True
        for score, kind in g.flawed:
            margin = g.reference_score - score
            win = margin > 0
            wins += win
            pairs += 1
            top &= win
            margins.append(margin)
            kind_stats.setdefault(kind, []).append((win, margin))
        group_wins += top
        if g.reference_total_target is not None and g.flawed_total_targets is not None:
            preds.append(g.reference_score)
            targets.append(float(g.reference_total_target))
            preds.extend(s for s, _ in g.flawed)
            targets.extend(g.flawed_total_targets)
        for pred, lab in _dim_pairs(g):
            if len(pred) != len(lab):
                raise ArgumentError(f"group {g.problem_id!r}: dimension predictions and labels differ in length")
            dim_hits += sum(int(p == t) for p, t in zip(pred, lab))
            dim_total += len(lab)

    if targets:
        err = np.asarray(preds) - np.asarray(targets)
        mae = float(np.mean(np.abs(err)))
        rmse = float(math.sqrt(np.mean(err * err)))
        rho = spearman(preds, targets)
    else:
        mae = rmse = rho = None
    per_kind = {k: KindMetrics(len(v), sum(w for w, _ in v) / len(v), float(np.mean([m for _, m in v])))
                for k, v in kind_stats.items()}
    return ValidationReport(
        groups=len(groups),
        candidates=candidates,
        neg_pairs=pairs,
        pairwise_acc=wins / pairs,
        group_acc=group_wins / len(groups),
        spearman=rho,
        mae=mae,
        rmse=rmse,
        mean_margin=float(np.mean(margins)),
        dim_acc=dim_hits / dim_total if dim_total else None,
        per_kind=per_kind,
    )


def _dim_pairs(g: ScoredGroup):
    if g.reference_dim_pred is not None and g.reference_dim_labels is not None:
        yield g.reference_dim_pred, g.reference_dim_labels
    if g.flawed_dim_preds is not None and g.flawed_dim_labels is not None:
        yield from zip(g.flawed_dim_preds, g.flawed_dim_labels)


# ------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class SaturationResult:
    samples: int
    saturated: int
    rate: float
    mean: float

    def table(self) -> tuple[list[str], list[list]]:
        header = ["Samples", "Saturated (=1.0)", "Saturation rate", "Mean judge score"]
        return header, [[self.samples, self.saturated, _pct(self.rate), f"{self.mean:.3f}"]]

    def to_dict(self) -> dict:
        return {"samples": self.samples, "saturated": self.saturated,
                "rate": self.rate, "mean": self.mean}


def saturation_diagnostic(scores: Sequence[float]) -> SaturationResult:
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ArgumentError("saturation_diagnostic needs at least one score")
    saturated = int(np.count_nonzero(s == 1.0))
    return SaturationResult(int(s.size), saturated, saturated / s.size, float(s.mean()))


@dataclass(frozen=True)
class DiagnosticSeries:
    values: tuple[float, ...]
    window: int = 30

    def __post_init__(self):
        if self.window < 1:
            raise ArgumentError("window must be at least 1")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


def rolling_mean(series: DiagnosticSeries | Sequence[float], window: int | None = None) -> list[float]:
    """Trailing mean over the last min(i + 1, window) values."""
    if not isinstance(series, DiagnosticSeries):
        series = DiagnosticSeries(tuple(series), 30 if window is None else window)
    v = np.asarray(series.values, dtype=float)
    if v.size == 0:
        return []
    w = series.window
    csum = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, v.size + 1)
    lo = np.maximum(idx - w, 0)
    return ((csum[idx] - csum[lo]) / (idx - lo)).tolist()


LENGTH_BINS = ((0, 128), (128, 256), (256, None))


@dataclass(frozen=True)
class LengthSummary:
    count: int
    mean: float
    median: float
    bin_counts: tuple[int, ...]

    @property
    def bin_shares(self) -> tuple[float, ...]:
        return tuple(c / self.count for c in self.bin_counts)

    def table(self) -> tuple[list[str], list[list]]:
        header = ["Samples", "Avg. tokens", "Median tokens", "0-128 tokens", "128-256 tokens", ">=256 tokens"]
        shares = self.bin_shares
        return header, [[self.count, f"{self.mean:.1f}", f"{self.median:.1f}",
                         _pct(shares[0]), _pct(shares[1]), _pct(shares[2])]]

    def to_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean, "median": self.median,
                "bin_counts": list(self.bin_counts), "bin_shares": list(self.bin_shares)}


def length_window_summary(token_counts: Sequence[float]) -> LengthSummary:
    t = np.asarray(token_counts, dtype=float)
    if t.size == 0:
        raise ArgumentError("length_window_summary needs at least one count")
    counts = []
    for lo, hi in LENGTH_BINS:
        mask = t >= lo if hi is None else (t >= lo) & (t < hi)
        counts.append(int(np.count_nonzero(mask)))
    return LengthSummary(int(t.size), float(t.mean()), float(np.median(t)), tuple(counts))


# -------------------------------------------------------------- emission

FORMATS = ("json", "csv", "markdown")


def _table_of(report) -> tuple[list[str], list[list]]:
    if isinstance(report, tuple) and len(report) == 2:
        return report
    if hasattr(report, "table"):
        return report.table()
    raise ArgumentError(f"{type(report).__name__} has no tabular form")


def render_table(header: Sequence[str], rows: Sequence[Sequence], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(str(h) for h in header) + " |",
                 "|" + "|".join("---" for _ in header) + "|"]
        lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    raise ArgumentError(f"unknown table format {fmt!r}")


def render_report(report, fmt: str) -> str:
    if fmt not in FORMATS:
        raise ArgumentError(f"format must be one of {FORMATS}, got {fmt!r}")
    if fmt == "json":
        obj = report.to_dict() if hasattr(report, "to_dict") else report
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"
    return render_table(*_table_of(report), fmt)


def emit_report(report, fmt: str, path: str | Path) -> Path:
    """Write a report deterministically; IO failures surface as OSError."""
    text = render_report(report, fmt)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
