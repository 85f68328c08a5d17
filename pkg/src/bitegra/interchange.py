"""JSON-lines import and export of bitemporal graphs.

One record per line::

    {"type": "vertex", "id": 1, "label": "Person",
     "valid_from": "2020-01-01", "valid_to": "infinity",
     "properties": {"name": "Ada",
                    "born": {"value": "1815-12-10", "type": "timestamp"},
                    "city": {"value": "London", "valid_from": "1815-12-10", "valid_to": "1852-11-27"}}}
    {"type": "edge", "label": "knows", "src": 1, "dst": 2}

Edge endpoints refer to the ``id`` fields of vertex records in the same file.
Explicit ids are kept when they are still free in the target graph.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .chronos import NEG_INF, POS_INF, Period, Timestamp, format_timestamp, parse_timestamp
from .errors import BitegraError, StorageError


class ImportFormatError(BitegraError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class ImportCounts:
    vertices: int = 0
    edges: int = 0
    properties: int = 0

    def __iter__(self):
        return iter((self.vertices, self.edges, self.properties))


def _time(value, default: int, line: int) -> int:
    if value is None:
        return default
    try:
        return parse_timestamp(value)
    except (ValueError, TypeError) as exc:
        raise ImportFormatError(f"bad timestamp {value!r}: {exc}", line) from None


def _period(obj: dict, line: int) -> Period | None:
    if "valid_from" not in obj and "valid_to" not in obj:
        return None
    return Period(_time(obj.get("valid_from"), NEG_INF, line), _time(obj.get("valid_to"), POS_INF, line))


def _properties(obj: dict, line: int) -> dict:
    props = obj.get("properties") or {}
    if not isinstance(props, dict):
        raise ImportFormatError("'properties' must be an object", line)
    out = {}
    for key, spec in props.items():
        if isinstance(spec, list):
            out[key] = [_property_version(key, s, line) for s in spec]
        else:
            out[key] = _property_version(key, spec, line)
    return out


def _property_version(key: str, spec, line: int):
    if not isinstance(spec, dict):
        if isinstance(spec, list):
            raise ImportFormatError(f"property {key!r}: nested lists are not supported", line)
        return spec
    if "value" not in spec:
        raise ImportFormatError(f"property {key!r} has no 'value'", line)
    value = spec["value"]
    if spec.get("type") == "timestamp":
        value = Timestamp(_time(value, NEG_INF, line))
    valid = _period(spec, line)
    return (value, valid) if valid is not None else value


def read_records(path) -> list[tuple[int, dict]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for n, text in enumerate(fh, 1):
            text = text.strip()
            if not text or text.startswith("#"):
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ImportFormatError(f"invalid JSON: {exc.msg}", n) from None
            if not isinstance(obj, dict):
                raise ImportFormatError("record must be a JSON object", n)
            kind = obj.get("type")
            if kind not in ("vertex", "edge"):
                raise ImportFormatError(f"'type' must be 'vertex' or 'edge', got {kind!r}", n)
            if not isinstance(obj.get("label"), str) or not obj["label"]:
                raise ImportFormatError("record needs a non-empty string 'label'", n)
            records.append((n, obj))
    return records


def import_graph(store, path, tx_time: int | None = None) -> ImportCounts:
    """Load a JSON-lines file into ``store`` in a single transaction.

    Vertices are inserted before edges. Any error aborts the whole load, so a
    partial file never becomes visible.
    """
    records = read_records(path)
    counts = ImportCounts()
    ids: dict = {}
    tx = store.begin()
    try:
        for phase in ("vertex", "edge"):
            for n, obj in records:
                if obj["type"] != phase:
                    continue
                props = _properties(obj, n)
                valid = _period(obj, n)
                fid = obj.get("id")
                wanted = fid if isinstance(fid, int) and fid not in store.location and fid not in ids.values() else None
                try:
                    if phase == "vertex":
                        eid = tx.add_vertex(obj["label"], props, valid, id=wanted)
                        if fid is not None:
                            if fid in ids:
                                raise ImportFormatError(f"duplicate vertex id {fid!r}", n)
                            ids[fid] = eid
                        counts.vertices += 1
                    else:
                        ends = []
                        for end in ("src", "dst"):
                            if end not in obj:
                                raise ImportFormatError(f"edge record needs '{end}'", n)
                            if obj[end] not in ids:
                                raise ImportFormatError(f"edge {end} {obj[end]!r} is not a vertex id in this file", n)
                            ends.append(ids[obj[end]])
                        tx.add_edge(obj["label"], ends[0], ends[1], props, valid, id=wanted)
                        counts.edges += 1
                except StorageError as exc:
                    raise ImportFormatError(str(exc), n) from exc
                counts.properties += len(props)
    except BaseException:
        tx.abort()
        raise
    tx.commit(commit_time=tx_time)
    return counts


def _encode_time(t: int):
    return format_timestamp(t, "full")


def _encode_version(pv) -> dict:
    value = pv.value
    spec = {"value": value}
    if isinstance(value, Timestamp):
        spec = {"value": _encode_time(value), "type": "timestamp"}
    spec["valid_from"] = _encode_time(pv.valid.start)
    spec["valid_to"] = _encode_time(pv.valid.end)
    return spec


def export_records(store) -> list[dict]:
    """Current transaction-time state of ``store`` as import records.

    Every valid-time version of the current state is kept; superseded
    transaction-time history is not.
    """
    vertices, edges, props = store.snapshot().all_versions()
    by_owner: dict[int, dict[str, list]] = {}
    for pv in sorted(props, key=lambda p: (p.valid.start, p.valid.end)):
        if pv.tx.end == POS_INF:
            by_owner.setdefault(pv.owner, {}).setdefault(pv.key, []).append(_encode_version(pv))
    out = []
    for kind, versions in (("vertex", vertices), ("edge", edges)):
        for ver in sorted((v for v in versions if v.tx.end == POS_INF), key=lambda v: v.id):
            rec = {"type": kind, "id": ver.id, "label": ver.label}
            if kind == "edge":
                rec["src"], rec["dst"] = ver.src, ver.dst
            rec["valid_from"] = _encode_time(ver.valid.start)
            rec["valid_to"] = _encode_time(ver.valid.end)
            rec["properties"] = {k: v[0] if len(v) == 1 else v
                                 for k, v in by_owner.get(ver.id, {}).items()}
            out.append(rec)
    return out


def export_graph(store, path) -> int:
    records = export_records(store)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return len(records)
