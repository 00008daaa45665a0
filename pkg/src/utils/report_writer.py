"""Report serialization: canonical JSON, flat CSV and a text summary."""
import csv
import io
import json
import math
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from src.core.errors import FormatError
from src.core.lab import RunReport

FORMATS = ("json", "csv", "text")


def to_plain(value: Any) -> Any:
    """numpy scalars, arrays and tuples to JSON-native values"""
    if isinstance(value, Mapping):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise FormatError(f"non-finite number {value} cannot be reported")
        return value
    if isinstance(value, (complex, np.complexfloating)):
        return [to_plain(value.real), to_plain(value.imag)]
    return value


def _payload(report: Union[RunReport, Mapping[str, Any]]) -> Dict[str, Any]:
    if isinstance(report, RunReport):
        return to_plain(report.to_dict())
    return to_plain(report)


def _emit_json(payload: Dict[str, Any], indent: Optional[int]) -> bytes:
    separators = (",", ": ") if indent else (",", ":")
    text = json.dumps(payload, sort_keys=True, allow_nan=False, indent=indent,
                      separators=separators, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def _emit_csv(payload: Dict[str, Any]) -> bytes:
    result = payload.get("result", {})
    table: List[Dict[str, Any]] = result.get("table") or []
    if not table:
        raise FormatError(f"{payload.get('kind', 'report')} results have no table; use json or text")
    summary: Dict[str, Any] = result.get("summary", {})

    columns = ["row"]
    for row in table:
        columns.extend(k for k in row if k not in columns)
    columns.extend(k for k in sorted(summary) if k not in columns)

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in table:
        writer.writerow({"row": "table", **row})
    writer.writerow({"row": "summary", **summary})
    return buffer.getvalue().encode("utf-8")


def _format_cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _emit_text(payload: Dict[str, Any], elapsed: Optional[float]) -> bytes:
    config = payload.get("config", {})
    lines = [f"sr-lab {payload.get('tool_version', '?')} | {payload.get('kind', '?')} | "
             f"trials={config.get('trials')} seed={config.get('seed')}"]
    if elapsed is not None:
        lines.append(f"elapsed: {elapsed:.3f}s")

    result = payload.get("result", {})
    summary = result.get("summary", {})
    if summary:
        width = max(len(k) for k in summary)
        lines.append("")
        lines.extend(f"{k.ljust(width)}  {_format_cell(summary[k])}" for k in sorted(summary))

    table = result.get("table") or []
    if table:
        columns: List[str] = []
        for row in table:
            columns.extend(k for k in row if k not in columns)
        cells = [[_format_cell(row.get(c)) for c in columns] for row in table]
        widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
        lines.append("")
        lines.append("  ".join(c.ljust(w) for c, w in zip(columns, widths)))
        lines.append("  ".join("-" * w for w in widths))
        lines.extend("  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in cells)

    return ("\n".join(lines) + "\n").encode("utf-8")


def emit_report(report: Union[RunReport, Mapping[str, Any]], fmt: str = "json",
                indent: Optional[int] = None) -> bytes:
    """Serialize a run report or a parsed report payload"""
    if fmt not in FORMATS:
        raise FormatError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    payload = _payload(report)
    if fmt == "json":
        return _emit_json(payload, indent)
    if fmt == "csv":
        return _emit_csv(payload)
    elapsed = report.elapsed_seconds if isinstance(report, RunReport) else None
    return _emit_text(payload, elapsed)


def parse_report(data: Union[bytes, str]) -> Dict[str, Any]:
    """Read a JSON report back into its payload"""
    try:
        payload = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"not a JSON report: {e}") from e
    if not isinstance(payload, dict) or "result" not in payload:
        raise FormatError("JSON report must be an object with a result")
    return payload
