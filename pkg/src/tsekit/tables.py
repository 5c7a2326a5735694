"""Plain result tables rendered as CSV or JSON, plus XYZ point clouds."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field


def fmt_number(v) -> str:
    return format(float(v), ".12g")


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, float)) or hasattr(v, "__float__") and not isinstance(v, str):
        return fmt_number(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, str)) or v is None:
        return v
    x = float(v)
    if not math.isfinite(x):
        return None
    return float(fmt_number(x))


@dataclass
class ResultTable:
    columns: list[str]
    units: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)

    def __post_init__(self):
        if not self.units:
            self.units = [""] * len(self.columns)
        if len(self.units) != len(self.columns):
            raise ValueError("one unit annotation per column required")

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} cells, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        recs = [{c: _json_cell(v) for c, v in zip(self.columns, row)} for row in self.rows]
        return json.dumps(recs, indent=2) + "\n"

    def render(self, fmt: str = "csv") -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown table format {fmt!r}")


def write_xyz(path, points) -> None:
    """One ``x y z`` line per point, metres."""
    with open(path, "w") as f:
        for x, y, z in points:
            f.write(f"{fmt_number(x)} {fmt_number(y)} {fmt_number(z)}\n")


def read_xyz(path):
    import numpy as np

    data = np.loadtxt(path, ndmin=2)
    return data.reshape(-1, 3)
