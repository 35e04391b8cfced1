"""Result records and their CSV / summary serialization.

Output files are a pure function of the record: numbers are written with
``repr`` precision, keys are sorted and wall-clock time goes to a separate
``*_timing.json`` so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

from .validation import Check


@dataclass
class Table:
    columns: list  # "name [unit]" strings
    rows: list = field(default_factory=list)


@dataclass
class ResultRecord:
    name: str
    config: dict
    tables: dict = field(default_factory=dict)  # file stem -> Table
    quantities: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    wall_clock: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> dict:
        checks = [c.as_dict() if isinstance(c, Check) else c for c in self.checks]
        return {
            "name": self.name,
            "config": self.config,
            "provenance": self.provenance,
            "quantities": self.quantities,
            "checks": checks,
            "n_checks": len(checks),
            "n_failed": sum(1 for c in checks if c["verdict"] != "pass"),
            "verdict": "pass" if self.passed else "fail",
        }


def _fmt(v) -> str:
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r} in output table")
        return repr(v)
    return str(v)


def _clean(obj):
    """JSON-safe copy with numpy scalars and tuples converted."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_csv(path, table: Table) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.columns)
            for row in table.rows:
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_json(path, payload) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(_clean(payload), indent=2, sort_keys=True))
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export(record: ResultRecord, out_dir, fmt: str = "both") -> list:
    """Write the record; returns the list of files written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        for stem, table in record.tables.items():
            path = os.path.join(out_dir, f"{stem}.csv")
            write_csv(path, table)
            written.append(path)
    if fmt in ("summary", "both"):
        path = os.path.join(out_dir, f"{record.name}_summary.json")
        write_json(path, record.summary())
        written.append(path)
    if record.wall_clock:
        path = os.path.join(out_dir, f"{record.name}_timing.json")
        write_json(path, record.wall_clock)
        written.append(path)
    return written
