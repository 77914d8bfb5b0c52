"""CSV / JSON rendering of result tables (17 significant digits)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _json_value(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass
class Table:
    """A header, rows and trailing comment lines."""

    header: list[str]
    rows: list[list] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)
    fit: dict | None = None

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(fmt(v) for v in row) for row in self.rows]
        lines += [f"# {c}" for c in self.comments]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc: dict = {"rows": [{k: _json_value(v) for k, v in zip(self.header, row)}
                              for row in self.rows]}
        if self.fit is not None:
            doc["fit"] = self.fit
        if self.comments:
            doc["comments"] = list(self.comments)
        return json.dumps(doc, indent=2) + "\n"

    def render(self, out_format: str) -> str:
        return self.to_json() if out_format == "json" else self.to_csv()
