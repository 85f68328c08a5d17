"""Result table serialisation: ASCII table, CSV and JSON lines."""
from __future__ import annotations

import csv
import io
import json

from .chronos import Period, Timestamp, format_period, format_timestamp

FORMATS = ("table", "csv", "jsonl")


def format_cell(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Timestamp):
        return format_timestamp(v)
    if isinstance(v, Period):
        return format_period(v)
    return str(v)


def ascii_table(columns, rows) -> str:
    cells = [[format_cell(v) for v in r] for r in rows]
    widths = [len(c) + 2 for c in columns]
    for r in cells:
        for i, c in enumerate(r):
            widths[i] = max(widths[i], len(c) + 2)
    border = "+" + "+".join("-" * w for w in widths) + "+"
    head = []
    for c, w in zip(columns, widths):
        left = (w - len(c)) // 2
        head.append(" " * left + c + " " * (w - len(c) - left))
    lines = [border, "|" + "|".join(head) + "|", border]
    for r in cells:
        lines.append("|" + "|".join(" " + c.ljust(w - 1) for c, w in zip(r, widths)) + "|")
    lines.append(border)
    return "\n".join(lines)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if v is None else format_cell(v) for v in r])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (Timestamp, Period)):
        return format_cell(v)
    return v


def to_jsonl(columns, rows) -> str:
    return "".join(json.dumps({c: _json_value(v) for c, v in zip(columns, r)}) + "\n" for r in rows)


def render(table, fmt: str = "table") -> str:
    if fmt == "table":
        return ascii_table(table.columns, table.rows)
    if fmt == "csv":
        return to_csv(table.columns, table.rows)
    if fmt == "jsonl":
        return to_jsonl(table.columns, table.rows)
    raise ValueError(f"unknown output format {fmt!r}; expected one of {', '.join(FORMATS)}")
