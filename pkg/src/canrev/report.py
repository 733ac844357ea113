"""Report rendering and reading.

CSV reports mirror the published table layout: an ``ID`` column, the channel
name without its frame ID, and the correlation to 8 decimals. Run metadata
follows the data rows as ``# key=value`` comment lines. JSON reports carry
full-precision values and per-row flags.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from typing import Iterable, Optional

from .model import Action, DiscoveryRow, parse_channel_name
from .pipeline import ActionReport, CorrelationTable

CORRELATION_HEADER = ("ID", "Channel", "Correlation")
DISCOVERY_HEADER = ("ID", "Channel", "Correlation", "Range", "Unique", "StDev", "Smooth")


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _meta_lines(meta: dict) -> list[str]:
    return [f"# {k}={_meta_value(v)}" for k, v in meta.items()]


def _meta_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Action):
        return v.value
    return str(v)


def _render(header, rows, meta) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    for line in _meta_lines(meta):
        buf.write(line + "\n")
    return buf.getvalue()


def table_meta(table: CorrelationTable) -> dict:
    return {
        "action": table.action,
        "masking_used": table.masking_used,
        "top_n": table.top_n,
        "channels_tested": table.channels_tested,
        "samples_used": table.samples_used,
        "samples_total": table.samples_total,
    }


def correlation_csv(table: CorrelationTable) -> str:
    rows = [(r.spec.frame_id, r.spec.short_name, f"{r.correlation:.8f}") for r in table.rows]
    return _render(CORRELATION_HEADER, rows, table_meta(table))


def discovery_csv(rows: Iterable[DiscoveryRow], table: CorrelationTable) -> str:
    body = [
        (
            r.spec.frame_id,
            r.spec.short_name,
            f"{r.correlation:.8f}",
            r.range,
            r.unique,
            _half_up(r.stdev_deriv),
            r.smooth_display,
        )
        for r in rows
    ]
    return _render(DISCOVERY_HEADER, body, table_meta(table))


def _correlation_row_json(r) -> dict:
    return {
        "id": r.spec.frame_id,
        "channel": r.spec.name,
        "correlation": r.correlation,
        "constant": r.constant,
        "direction": r.direction,
    }


def _discovery_row_json(r: DiscoveryRow) -> dict:
    return {
        "id": r.spec.frame_id,
        "channel": r.spec.name,
        "correlation": r.correlation,
        "direction": r.direction,
        "range": r.range,
        "unique": r.unique,
        "stdev_deriv": r.stdev_deriv,
        "smooth": r.smooth,
        "smooth_display": r.smooth_display,
    }


def correlation_json(table: CorrelationTable) -> dict:
    out = {k: _json_meta(v) for k, v in table_meta(table).items()}
    out["rows"] = [_correlation_row_json(r) for r in table.rows]
    return out


def discovery_json(rows: Iterable[DiscoveryRow], table: CorrelationTable) -> dict:
    out = correlation_json(table)
    out["correlation_rows"] = out.pop("rows")
    out["discovered"] = [_discovery_row_json(r) for r in rows]
    return out


def action_report_json(report: ActionReport) -> dict:
    out: dict = {"action": report.action.value, "error": report.error}
    if report.table is not None:
        out.update(correlation_json(report.table))
        out["correlation_rows"] = out.pop("rows")
    if report.discovery is not None:
        out["discovered"] = [_discovery_row_json(r) for r in report.discovery]
    return out


def _json_meta(v):
    return v.value if isinstance(v, Action) else v


def dumps_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_text(text: str, path: Optional[str]) -> None:
    """Write ``text`` to ``path``, or to stdout when ``path`` is None or '-'."""
    if path is None or path == "-":
        import sys

        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_report_csv(source) -> tuple[list[dict], dict]:
    """Read a CSV report (path or text). Returns ``(rows, meta)``.

    Rows map column names to parsed values and gain a ``spec`` entry with the
    full :class:`ChannelSpec`.
    """
    if isinstance(source, str) and "\n" not in source and os.path.exists(source):
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = source
    meta: dict[str, str] = {}
    data_lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        elif line.strip():
            data_lines.append(line)
    reader = csv.DictReader(data_lines)
    rows = []
    for raw in reader:
        row: dict = {"ID": int(raw["ID"]), "Channel": raw["Channel"], "Correlation": float(raw["Correlation"])}
        for col in ("Range", "Unique", "StDev", "Smooth"):
            if col in raw:
                row[col] = int(raw[col])
        row["spec"] = parse_channel_name(f"{row['ID']}_{row['Channel']}")
        rows.append(row)
    return rows, meta

