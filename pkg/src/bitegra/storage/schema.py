"""Placement configuration (GVE/TFL/HyVE x PAC/PAT/HyPe) and table naming."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import SchemaConfigError

GENERAL = "general"
PER_LABEL = "per_label"
COLUMN = "column"
TABLE = "table"

VERTEX_TABLE = "vertices"
EDGE_TABLE = "edges"
VERTEX_PROPS = "vertex_props"
EDGE_PROPS = "edge_props"
META_TABLE = "meta"


@dataclass
class SchemaConfig:
    """Per-label element placement and per-(label, key) property placement.

    Keys of ``properties`` are ``"<label>.<key>"``.  Labels and keys not
    listed fall back to the defaults.
    """

    elements: dict[str, str] = field(default_factory=dict)
    properties: dict[str, str] = field(default_factory=dict)
    default_element: str = GENERAL
    default_property: str = TABLE

    def __post_init__(self):
        for label, p in self.elements.items():
            if p not in (GENERAL, PER_LABEL):
                raise SchemaConfigError(f"bad element placement {p!r} for {label!r}")
        for key, p in self.properties.items():
            if p not in (COLUMN, TABLE):
                raise SchemaConfigError(f"bad property placement {p!r} for {key!r}")
            if "." not in key:
                raise SchemaConfigError(f"property placement key {key!r} must be '<label>.<key>'")
        if self.default_element not in (GENERAL, PER_LABEL):
            raise SchemaConfigError(f"bad default element placement {self.default_element!r}")
        if self.default_property not in (COLUMN, TABLE):
            raise SchemaConfigError(f"bad default property placement {self.default_property!r}")

    def element_placement(self, label: str) -> str:
        return self.elements.get(label, self.default_element)

    def property_placement(self, label: str, key: str) -> str:
        return self.properties.get(f"{label}.{key}", self.default_property)

    # -- presets ---------------------------------------------------------------

    @classmethod
    def preset(cls, elements: str = "GVE", properties: str = "PAT",
               per_label=(), column_keys=()) -> "SchemaConfig":
        """Build one of the named schemata.

        ``per_label`` lists labels placed in their own table under HyVE and
        ``column_keys`` lists ``label.key`` stored as columns under HyPe.
        """
        elements, properties = elements.upper(), properties.upper()
        if elements == "GVE":
            el, d_el = {}, GENERAL
        elif elements == "TFL":
            el, d_el = {}, PER_LABEL
        elif elements == "HYVE":
            el, d_el = {lbl: PER_LABEL for lbl in per_label}, GENERAL
        else:
            raise SchemaConfigError(f"unknown element schema {elements!r}")
        if properties == "PAC":
            pr, d_pr = {}, COLUMN
        elif properties == "PAT":
            pr, d_pr = {}, TABLE
        elif properties == "HYPE":
            pr, d_pr = {k: COLUMN for k in column_keys}, TABLE
        else:
            raise SchemaConfigError(f"unknown property schema {properties!r}")
        return cls(el, pr, d_el, d_pr)

    # -- serialisation ---------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "elements": dict(self.elements),
            "properties": dict(self.properties),
            "defaults": {"elements": self.default_element, "properties": self.default_property},
        }

    @classmethod
    def from_json(cls, data: dict) -> "SchemaConfig":
        if not isinstance(data, dict):
            raise SchemaConfigError("schema config must be a JSON object")
        defaults = data.get("defaults", {})
        return cls(
            dict(data.get("elements", {})),
            dict(data.get("properties", {})),
            defaults.get("elements", GENERAL),
            defaults.get("properties", TABLE),
        )

    @classmethod
    def load(cls, path) -> "SchemaConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaConfigError(f"{path}: {exc}") from None
        return cls.from_json(data)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def _slug(label: str) -> str:
    s = re.sub(r"[^0-9a-zA-Z]+", "_", label).strip("_").lower()
    return s or "x"


def vertex_table_name(label: str) -> str:
    return f"v_{_slug(label)}"


def edge_table_name(label: str, src_label: str, dst_label: str) -> str:
    return f"e_{_slug(label)}__{_slug(src_label)}__{_slug(dst_label)}"


def property_table_name(element_table: str) -> str:
    if element_table == VERTEX_TABLE:
        return VERTEX_PROPS
    if element_table == EDGE_TABLE:
        return EDGE_PROPS
    return f"{element_table}_props"
