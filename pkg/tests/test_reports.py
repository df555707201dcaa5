from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from tracereward.errors import ArgumentError
from tracereward.reports import (
    DiagnosticSeries,
    ScoredGroup,
    emit_report,
    length_window_summary,
    render_report,
    render_table,
    rm_validation_metrics,
    rolling_mean,
    saturation_diagnostic,
    spearman,
)


def _numbers(path):
    return [float(v) for v in path.read_text().split()]


# ------------------------------------------------------------ diagnostics

def test_saturation_fixture(fixtures_dir):
    res = saturation_diagnostic(_numbers(fixtures_dir / "saturation600.txt"))
    assert (res.samples, res.saturated) == (600, 573)
    header, rows = res.table()
    assert rows[0][2] == "95.50%" and rows[0][3] == "0.990"


def test_saturation_counts_exact_ones_only():
    res = saturation_diagnostic([1.0, 0.9999999, 1, 0.0])
    assert res.saturated == 2 and res.rate == 0.5
    with pytest.raises(ArgumentError):
        saturation_diagnostic([])


def test_length_fixture(fixtures_dir):
    res = length_window_summary(_numbers(fixtures_dir / "lengths300.txt"))
    assert res.count == 300
    assert res.mean == pytest.approx(136.3) and res.median == 125.5
    assert res.bin_counts == (161, 124, 15)
    assert res.table()[1][0][3:] == ["53.67%", "41.33%", "5.00%"]


def test_length_bin_edges():
    assert length_window_summary([0, 127, 128, 255, 256]).bin_counts == (2, 2, 1)


def test_rolling_mean_examples():
    assert rolling_mean([1, 2, 3, 4], 2) == [1, 1.5, 2.5, 3.5]
    assert rolling_mean([]) == []
    assert rolling_mean(DiagnosticSeries((5.0,) * 40)) == [5.0] * 40
    with pytest.raises(ArgumentError):
        DiagnosticSeries((1.0,), 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), max_size=60), st.integers(1, 40))
def test_rolling_mean_matches_loop(values, window):
    expected = [np.mean(values[max(0, i + 1 - window):i + 1]) for i in range(len(values))]
    assert rolling_mean(values, window) == pytest.approx(expected, abs=1e-9)


# ------------------------------------------------------------ spearman

def test_spearman_examples():
    assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert spearman([1, 1, 1], [1, 2, 3]) is None
    assert spearman([1], [1]) is None
    with pytest.raises(ArgumentError):
        spearman([1, 2], [1])


@pytest.mark.filterwarnings("ignore::scipy.stats.ConstantInputWarning")
@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=3, max_size=30))
def test_spearman_agrees_with_scipy_on_ties(pairs):
    a, b = zip(*pairs)
    ours = spearman(a, b)
    ref = spearmanr(a, b).statistic
    if ours is None:
        assert np.isnan(ref)
    else:
        assert ours == pytest.approx(ref, abs=1e-12)


# ------------------------------------------------------------ validation metrics

def test_validation_metrics_example():
    groups = [
        ScoredGroup("a", 0.9, ((0.2, "off_by_one"), (0.5, "wrong_operation")),
                    reference_total_target=1.0, flawed_total_targets=(0.1, 0.4)),
        ScoredGroup("b", 0.4, ((0.4, "off_by_one"), (0.1, "wrong_operation")),
                    reference_total_target=0.8, flawed_total_targets=(0.3, 0.0)),
    ]
    rep = rm_validation_metrics(groups)
    assert (rep.groups, rep.candidates, rep.neg_pairs) == (2, 6, 4)
    assert rep.pairwise_acc == 0.75  # the tie in group b is a loss
    assert rep.group_acc == 0.5
    assert rep.mean_margin == pytest.approx((0.7 + 0.4 + 0.0 + 0.3) / 4)
    assert rep.per_kind["off_by_one"].pairwise_acc == 0.5
    err = np.array([0.9, 0.2, 0.5, 0.4, 0.4, 0.1]) - np.array([1.0, 0.1, 0.4, 0.8, 0.3, 0.0])
    assert rep.mae == pytest.approx(np.mean(np.abs(err)))
    assert rep.rmse == pytest.approx(np.sqrt(np.mean(err**2)))
    assert rep.dim_acc is None
    header, rows = rep.table()
    assert rows[0][3] == "75.00%" and rows[0][-1] == ""


def test_dim_accuracy():
    g = ScoredGroup("a", 1.0, ((0.0, "k"),), reference_dim_pred=(4, 4, 3, 4, 4),
                    reference_dim_labels=(4, 4, 4, 4, 4),
                    flawed_dim_preds=((0, 1, 0, 0, 0),), flawed_dim_labels=((0, 0, 0, 0, 0),))
    assert rm_validation_metrics([g]).dim_acc == 0.8


def test_scored_group_from_dict_and_errors():
    g = ScoredGroup.from_dict({"problem_id": 7, "reference_score": 0.5,
                               "flawed": [{"score": 0.1, "kind": "x"}],
                               "flawed_dim_preds": [[1, 2, 3, 4, 0]]})
    assert g.problem_id == "7" and g.flawed == ((0.1, "x"),)
    assert g.flawed_dim_preds == ((1, 2, 3, 4, 0),)
    with pytest.raises(ArgumentError):
        ScoredGroup("a", 1.0, ())
    with pytest.raises(ArgumentError):
        ScoredGroup("a", 1.0, ((0.1, "k"),), flawed_total_targets=(0.1, 0.2))
    with pytest.raises(ArgumentError):
        rm_validation_metrics([])


# ------------------------------------------------------------ rendering

def test_render_formats():
    res = saturation_diagnostic([1.0, 0.5])
    as_json = json.loads(render_report(res, "json"))
    assert as_json == {"samples": 2, "saturated": 1, "rate": 0.5, "mean": 0.75}
    rows = list(csv.reader(io.StringIO(render_report(res, "csv"))))
    assert rows[0][0] == "Samples" and rows[1] == ["2", "1", "50.00%", "0.750"]
    md = render_report(res, "markdown").splitlines()
    assert md[0].startswith("| Samples |") and md[1] == "|---|---|---|---|"
    with pytest.raises(ArgumentError):
        render_report(res, "xml")
    with pytest.raises(ArgumentError):
        render_table(["a"], [[1]], "json")


def test_emit_report_is_deterministic(tmp_path):
    res = length_window_summary([1, 200, 300])
    a = emit_report(res, "csv", tmp_path / "a.csv").read_bytes()
    b = emit_report(res, "csv", tmp_path / "b.csv").read_bytes()
    assert a == b and b"\r" not in a
    with pytest.raises(OSError):
        emit_report(res, "csv", tmp_path / "missing" / "dir" / "x.csv")
