"""Report documents and CSV tables.

A report is written as ``<prefix>_report.json`` (sorted keys, floats in
shortest round-trip form), one ``<prefix>_<table>.csv`` per results table
with 17 significant digits, and ``<prefix>_summary.txt``.  Wall-clock times
go to ``<prefix>_timing.json`` so that the report itself is byte-identical
across reruns of the same configuration.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Table", "Report", "format_number", "TOOL_VERSION"]

TOOL_VERSION = "0.1.0"


def format_number(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # JSON has no inf/nan
        return v if math.isfinite(v) else str(v)
    return v


@dataclass
class Table:
    header: tuple
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError(f"row has {len(row)} fields, header has {len(self.header)}")
        self.rows.append(tuple(row))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([format_number(v) for v in row])


@dataclass
class Report:
    command: str
    config_echo: str
    tables: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    version: str = TOOL_VERSION

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.verdicts.values())

    def to_dict(self):
        return _jsonable({
            "command": self.command,
            "version": self.version,
            "config": self.config_echo,
            "verdicts": self.verdicts,
            "passed": self.passed,
            "results": self.results,
            "tables": {k: {"header": list(t.header), "rows": [list(r) for r in t.rows]}
                       for k, t in self.tables.items()},
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def summary(self) -> str:
        lines = [f"kp {self.command} (version {self.version})", ""]
        for name, ok in self.verdicts.items():
            lines.append(f"{'PASS' if ok else 'FAIL'}  {name}")
        for name, val in self.results.items():
            if isinstance(val, (str, int, float, bool, np.floating)):
                lines.append(f"{name}: {format_number(val)}")
        for name, t in self.tables.items():
            lines.append(f"table {name}: {len(t.rows)} rows")
        lines.append("")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir, prefix="kp"):
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        for name, t in self.tables.items():
            paths[name] = os.path.join(out_dir, f"{prefix}_{name}.csv")
            t.write_csv(paths[name])
        for kind, text in (("report.json", self.to_json()), ("summary.txt", self.summary()),
                           ("config.ini", self.config_echo),
                           ("timing.json", json.dumps(_jsonable(self.timing), sort_keys=True, indent=2) + "\n")):
            paths[kind] = os.path.join(out_dir, f"{prefix}_{kind}")
            with open(paths[kind], "w", encoding="utf-8") as fh:
                fh.write(text)
        return paths
