import csv
import io
import json

import numpy as np
import pytest

from src.core_utils import ValidationError
from src.reports import (
    SUMMARY_HEADER,
    emit_json,
    format_cell,
    load_baseline,
    regressions,
    render_csv,
    render_json,
    summary_rows,
    to_jsonable,
    write_concordance,
)
from src.uncertainty import ConcordanceReport, Verdict


def _report(formula_id, verdict, ratio=None):
    return ConcordanceReport(formula_id=formula_id, grid_size=2, max_abs_diff=0.0, fitted_ratio=ratio,
                             ratio_spread=0.0 if ratio else None, verdict=verdict, param_names=["p"],
                             rows=[{"params": {"p": 0.25}, "formula": 0.1, "oracle": 0.1, "abs_diff": 0.0,
                                    "ratio": 1.0},
                                   {"params": {"p": 1.0}, "formula": 0.0, "oracle": 0.0, "abs_diff": 0.0,
                                    "ratio": None}])


def test_to_jsonable_handles_numpy_and_nan():
    payload = to_jsonable({"a": np.float64(0.5), "b": np.arange(3), "c": float("nan"), 1: np.bool_(True)})
    assert payload == {"a": 0.5, "b": [0, 1, 2], "c": None, "1": True}
    assert json.loads(render_json(payload))["c"] is None


def test_format_cell_round_trips_doubles():
    x = 1 / 3
    assert float(format_cell(x)) == x
    assert format_cell(None) == ""
    assert format_cell(True) == "true"
    assert format_cell(7) == "7"


def test_render_csv():
    text = render_csv(["a", "b"], [[1, 0.5], [2, None]])
    assert text == "a,b\n1,0.5\n2,\n"


def test_emit_json_to_stdout(capsys):
    emit_json({"verdict": "Pure"})
    assert json.loads(capsys.readouterr().out) == {"verdict": "Pure"}


def test_emit_json_to_file(tmp_path):
    target = tmp_path / "nested" / "out.json"
    emit_json({"q": 0.25}, target)
    assert json.loads(target.read_text()) == {"q": 0.25}


def test_write_concordance(tmp_path):
    reports = [_report("n1_family", Verdict.EXACT), _report("n8_family", Verdict.PROPORTIONAL, 0.5)]
    written = write_concordance(reports, tmp_path)
    assert {p.name for p in written} == {"n1_family.json", "n1_family.csv", "n8_family.json",
                                         "n8_family.csv", "summary.json"}
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["n8_family"]["verdict_label"] == "ProportionalMatch(0.5)"
    rows = list(csv.reader(io.StringIO((tmp_path / "n1_family.csv").read_text())))
    assert rows[0] == ["formula_id", "p", "formula_value", "oracle_value", "abs_diff", "ratio"]
    assert rows[2][-1] == ""
    assert summary_rows(reports)[1][:2] == ["n8_family", "ProportionalMatch(0.5)"]
    assert len(SUMMARY_HEADER) == len(summary_rows(reports)[0])


def test_baseline_round_trip_and_regressions(tmp_path):
    write_concordance([_report("n1_family", Verdict.EXACT), _report("n8_family", Verdict.MISMATCH)], tmp_path)
    baseline = load_baseline(tmp_path / "summary.json")
    assert baseline == {"n1_family": "ExactMatch", "n8_family": "Mismatch"}
    current = [_report("n1_family", Verdict.PROPORTIONAL, 2.0), _report("n8_family", Verdict.EXACT)]
    assert regressions(current, baseline) == ["n1_family"]
    assert regressions(current, {}) == []


@pytest.mark.parametrize("content", [None, "{not json", '{"x": {"verdict": "Sometimes"}}', "[1, 2]"])
def test_load_baseline_errors(tmp_path, content):
    path = tmp_path / "baseline.json"
    if content is not None:
        path.write_text(content)
    with pytest.raises(ValidationError):
        load_baseline(path)
