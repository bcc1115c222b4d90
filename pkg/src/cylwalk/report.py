"""Run reports: numbers tagged with how they were obtained, plus CSV/JSON writers.

Every reported number is a dict carrying its provenance:

    {"value": v, "provenance": "exact"}
    {"value": v, "provenance": "mc", "stderr": s}
    {"value": v, "provenance": "windowed", "error": e}

CSV floats are written with ``repr`` so reruns with the same seed are
byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

STATUS_EXIT = {"pass": 0, "fail": 2, "inconclusive": 3}
_SEVERITY = {"pass": 0, "inconclusive": 1, "fail": 2}


def _num(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return float(x)
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def exact(value) -> dict:
    return {"value": _num(value), "provenance": "exact"}


def mc(value, stderr=None) -> dict:
    """Monte Carlo estimate; ``stderr`` is None for test statistics without one."""
    return {"value": _num(value), "provenance": "mc", "stderr": _num(stderr)}


def windowed(value, error) -> dict:
    return {"value": _num(value), "provenance": "windowed", "error": _num(error)}


def worst(statuses) -> str:
    statuses = list(statuses)
    return max(statuses, key=_SEVERITY.__getitem__) if statuses else "pass"


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, Fraction):
        return str(x)
    return x


@dataclass
class Table:
    header: list
    rows: list

    def write(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([_cell(c) for c in row])


@dataclass
class OpResult:
    op: str
    params: dict
    values: dict
    status: str
    wall_time: float = 0.0
    tables: dict = field(default_factory=dict)
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "op": self.op,
            "params": {k: _num(v) if isinstance(v, (int, float, np.number, Fraction)) else v
                       for k, v in self.params.items()},
            "values": self.values,
            "status": self.status,
            "wall_time": round(self.wall_time, 3),
            "tables": sorted(self.tables),
            "notes": self.notes,
        }


@dataclass
class RunReport:
    command: str
    config: dict
    results: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def status(self) -> str:
        return worst(r.status for r in self.results)

    @property
    def exit_code(self) -> int:
        return STATUS_EXIT[self.status]

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "status": self.status,
            "exit_code": self.exit_code,
            "wall_time": round(self.wall_time, 3),
            "results": [r.to_dict() for r in self.results],
        }

    def write(self, outdir) -> list:
        """Write report.json and one CSV per table into ``outdir``; returns the written paths."""
        os.makedirs(outdir, exist_ok=True)
        paths = []
        for r in self.results:
            for name, tab in sorted(r.tables.items()):
                p = os.path.join(outdir, f"{r.op}_{name}.csv")
                tab.write(p)
                paths.append(p)
        p = os.path.join(outdir, "report.json")
        with open(p, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")
        paths.append(p)
        return paths
