"""Deterministic serialization of inequality reports.

Two artifacts per run: a JSON file carrying every report with full constant
provenance, and a CSV summary for spreadsheets. Identical inputs must
produce byte-identical files, so everything here is hand-rolled rather than
delegated to serializers with environment-dependent float formatting:
numbers are printed with 17 significant digits (round-trip exact for
doubles), keys are sorted, records are sorted by (suite, id, context), and
no timestamps or hostnames ever enter the output.

Non-finite values: NaN becomes JSON null and CSV "nan"; infinities become
the strings "inf"/"-inf" in both formats (JSON has no literal for them).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Mapping

from .battery import InequalityReport

SCHEMA = "w2lab.report.v1"

CSV_COLUMNS = ("suite", "id", "context", "lhs", "rhs", "margin", "tolerance", "verdict")


def format_float(value: float) -> str:
    """17-significant-digit decimal form; parses back to the same double."""
    if value != value:  # NaN
        return "nan"
    if value == float("inf"):
        return "inf"
    if value == float("-inf"):
        return "-inf"
    return format(float(value), ".17g")


def report_record(suite: str, report: InequalityReport) -> dict[str, Any]:
    """Flatten one report into plain JSON-ready types."""
    return {
        "suite": suite,
        "id": report.id,
        "context": report.context,
        "lhs": report.lhs,
        "rhs": report.rhs,
        "margin": report.margin,
        "tolerance": report.tolerance,
        "verdict": report.verdict,
        "constants": dict(report.constants),
    }


def sort_records(records: Iterable[Mapping[str, Any]]) -> list[Mapping[str, Any]]:
    return sorted(records, key=lambda r: (r["suite"], r["id"], r["context"]))


def _emit(value: Any, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(value, Mapping):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(value)
        for i, key in enumerate(keys):
            out.append(f'{pad}  {json.dumps(str(key))}: ')
            _emit(value[key], indent + 1, out)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(pad + "  ")
            _emit(item, indent + 1, out)
            out.append(",\n" if i + 1 < len(value) else "\n")
        out.append(pad + "]")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif value is None:
        out.append("null")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        if value != value:
            out.append("null")
        elif value in (float("inf"), float("-inf")):
            out.append(json.dumps(format_float(value)))
        else:
            out.append(format_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def render_json(records: Iterable[Mapping[str, Any]], config_echo: Mapping[str, Any] | None = None) -> str:
    payload: dict[str, Any] = {"schema": SCHEMA, "reports": sort_records(records)}
    if config_echo is not None:
        payload["config"] = config_echo
    out: list[str] = []
    _emit(payload, 0, out)
    out.append("\n")
    return "".join(out)


def render_csv(records: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in sort_records(records):
        row = []
        for col in CSV_COLUMNS:
            val = rec[col]
            row.append(format_float(val) if isinstance(val, float) else str(val))
        writer.writerow(row)
    return buf.getvalue()


def write_outputs(
    records: Iterable[Mapping[str, Any]],
    out_dir: str | Path,
    config_echo: Mapping[str, Any] | None = None,
) -> tuple[Path, Path]:
    """Write report.json and summary.csv under out_dir; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = list(records)
    json_path = out / "report.json"
    csv_path = out / "summary.csv"
    json_path.write_text(render_json(records, config_echo), encoding="utf-8")
    csv_path.write_text(render_csv(records), encoding="utf-8")
    return json_path, csv_path


def overall_exit_code(records: Iterable[Mapping[str, Any]]) -> int:
    """0 iff every non-vacuous report passes; a pure function of the set."""
    for rec in records:
        if rec["verdict"] == "fail":
            return 1
    return 0
