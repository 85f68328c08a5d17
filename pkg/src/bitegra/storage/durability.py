"""Append-only JSON-lines log of committed change entries."""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterator

from ..chronos import Timestamp, format_timestamp, parse_timestamp

_TIME_FIELDS = ("val_from", "val_to", "tx_from", "tx_to")


def encode_value(v):
    if isinstance(v, Timestamp):
        return {"timestamp": format_timestamp(v, "full")}
    return v


def decode_value(v):
    if isinstance(v, dict) and set(v) == {"timestamp"}:
        return Timestamp(parse_timestamp(v["timestamp"]))
    return v


def encode_entry(entry) -> dict:
    row = entry.row
    out = {"op": entry.op}
    for k, v in row.items():
        if k in _TIME_FIELDS:
            out[k] = format_timestamp(v, "full")
        elif k == "value":
            out[k] = encode_value(v)
        elif k == "columns":
            out[k] = {ck: encode_value(cv) for ck, cv in v.items()}
        elif k == "meta" and v is None:
            continue
        else:
            out[k] = v
    return out


def decode_entry(obj: dict) -> dict:
    out = dict(obj)
    for k in _TIME_FIELDS:
        out[k] = parse_timestamp(obj[k])
    out["value"] = decode_value(obj.get("value"))
    out["columns"] = {k: decode_value(v) for k, v in (obj.get("columns") or {}).items()}
    out.setdefault("meta", None)
    for k in ("id", "label", "src", "dst", "key"):
        out.setdefault(k, None)
    return out


class GraphLog:
    def __init__(self, path):
        self.path = Path(path)

    def append(self, entries) -> None:
        lines = [json.dumps(encode_entry(e), sort_keys=True) for e in entries]
        if not lines:
            return
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def read(self) -> Iterator[dict]:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield decode_entry(json.loads(line))
