"""Tabular output shared by the CLI commands.

CSV layout: ``#``-prefixed metadata lines (command, timestamp, seed, summary
values), one header row, then data rows with 17 significant digits. JSON
carries the same content as an object.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


@dataclass
class Table:
    command: str
    columns: list
    rows: list
    seed: int | None = None
    meta: dict = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(
        timespec="seconds"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# command: {self.command}\n")
        buf.write(f"# timestamp: {self.timestamp}\n")
        buf.write(f"# seed: {self.seed}\n")
        for k, v in self.meta.items():
            buf.write(f"# {k}: {_fmt(v) if not isinstance(v, (list, dict)) else json.dumps(_jsonable(v))}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "timestamp": self.timestamp,
            "seed": self.seed,
            "meta": _jsonable(self.meta),
            "columns": list(self.columns),
            "rows": [dict(zip(self.columns, _jsonable(list(r)))) for r in self.rows],
        }
        return json.dumps(doc, indent=2) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()
