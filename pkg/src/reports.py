"""
JSON and CSV writers for command payloads and concordance reports.

Payloads go to stdout unless a path is given. Floats in CSV cells are written
with 17 significant digits so a reader recovers the exact double.
"""

import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from src import config
from src.core_utils import ValidationError, log
from src.uncertainty import ConcordanceReport, Verdict

_VERDICT_RANK = {Verdict.MISMATCH.value: 0, Verdict.PROPORTIONAL.value: 1, Verdict.EXACT.value: 2}


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays to plain Python; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    return obj


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), f".{config.FLOAT_DIGITS}g")
    return str(value)


def _write_text(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    log(f"[+] Wrote {out}")


def render_json(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n"


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def emit_json(payload: Any, out: Optional[Path] = None) -> None:
    _write_text(render_json(payload), out)


def emit_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], out: Optional[Path] = None) -> None:
    _write_text(render_csv(header, rows), out)


# =============================================================================
# CONCORDANCE FILES
# =============================================================================

SUMMARY_HEADER = ["formula_id", "verdict", "fitted_ratio", "ratio_spread", "max_abs_diff", "grid_size"]


def summary_rows(reports: Sequence[ConcordanceReport]) -> List[List[Any]]:
    return [[r.formula_id, r.verdict_label, r.fitted_ratio, r.ratio_spread, r.max_abs_diff, r.grid_size]
            for r in reports]


def write_concordance(reports: Sequence[ConcordanceReport], out_dir: Path) -> List[Path]:
    """Write <id>.json and <id>.csv per report plus summary.json into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for report in reports:
        json_path = out_dir / f"{report.formula_id}.json"
        csv_path = out_dir / f"{report.formula_id}.csv"
        json_path.write_text(render_json(report.to_dict()), encoding="utf-8")
        csv_path.write_text(render_csv(report.csv_header(), report.csv_rows()), encoding="utf-8")
        written += [json_path, csv_path]
    summary = out_dir / "summary.json"
    summary.write_text(render_json({r.formula_id: r.to_dict() for r in reports}), encoding="utf-8")
    written.append(summary)
    log(f"[+] Concordance reports written to {out_dir}")
    return written


def load_baseline(path: Path) -> Dict[str, str]:
    """Read formula_id -> verdict from a previous summary.json."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ValidationError(f"baseline file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"baseline {path} is not valid JSON ({e.msg})") from e
    if not isinstance(data, dict):
        raise ValidationError(f"baseline {path} must map formula ids to reports")
    baseline = {}
    for formula_id, entry in data.items():
        verdict = entry.get("verdict") if isinstance(entry, dict) else entry
        if verdict not in _VERDICT_RANK:
            raise ValidationError(f"baseline {path}: unknown verdict {verdict!r} for {formula_id}")
        baseline[formula_id] = verdict
    return baseline


def regressions(reports: Sequence[ConcordanceReport], baseline: Dict[str, str]) -> List[str]:
    """Ids whose verdict fell below the baseline (Exact > Proportional > Mismatch)."""
    return [r.formula_id for r in reports
            if r.formula_id in baseline
            and _VERDICT_RANK[r.verdict.value] < _VERDICT_RANK[baseline[r.formula_id]]]
