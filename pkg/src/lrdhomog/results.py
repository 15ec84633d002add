"""Result tables: fixed-column CSV plus a JSON summary with verdicts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .io import write_csv

__all__ = ["ResultTable", "Verdict", "CSV_COLUMNS"]

CSV_COLUMNS = ("index", "params", "statistic", "value", "stderr")


@dataclass
class Verdict:
    name: str
    passed: bool
    value: float
    lower: float | None = None
    upper: float | None = None
    note: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "lower": self.lower,
            "upper": self.upper,
            "note": self.note,
        }

    def line(self):
        lo = "-inf" if self.lower is None else f"{self.lower:.6g}"
        hi = "inf" if self.upper is None else f"{self.upper:.6g}"
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.6g} in [{lo}, {hi}]" + (f" ({self.note})" if self.note else "")


def within(name, value, lower=None, upper=None, note=""):
    ok = bool(np.isfinite(value)) and (lower is None or value >= lower) and (upper is None or value <= upper)
    return Verdict(name, ok, float(value), lower, upper, note)


@dataclass
class ResultTable:
    """Rows of (params, statistic, value, stderr) with run metadata.

    ``metadata`` holds the config hash, seed, code version, thread count and
    wall time; only rows and verdicts enter :meth:`same_rows`.
    """

    experiment: str
    rows: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add(self, statistic, value, stderr=float("nan"), **params):
        self.rows.append(
            {
                "index": len(self.rows),
                "params": {k: _plain(v) for k, v in params.items()},
                "statistic": statistic,
                "value": float(value),
                "stderr": float(stderr),
            }
        )

    def verdict(self, v: Verdict):
        self.verdicts.append(v)
        return v

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts)

    def value(self, statistic, **params):
        """Value of the unique row with this statistic and matching params."""
        hits = [r for r in self.rows if r["statistic"] == statistic and all(r["params"].get(k) == _plain(v) for k, v in params.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {statistic!r} {params}")
        return hits[0]["value"]

    def same_rows(self, other, atol=1e-12):
        if len(self.rows) != len(other.rows):
            return False
        for a, b in zip(self.rows, other.rows):
            if (a["index"], a["params"], a["statistic"]) != (b["index"], b["params"], b["statistic"]):
                return False
            for key in ("value", "stderr"):
                x, y = a[key], b[key]
                if not (np.isnan(x) and np.isnan(y)) and abs(x - y) > atol:
                    return False
        return True

    def to_csv(self, path):
        rows = ([r["index"], json.dumps(r["params"], sort_keys=True), r["statistic"], r["value"], r["stderr"]] for r in self.rows)
        return write_csv(path, CSV_COLUMNS, rows)

    def summary(self):
        return {
            "experiment": self.experiment,
            "passed": self.passed,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "metadata": self.metadata,
            "extra": {k: _plain(v) for k, v in self.extra.items()},
        }

    def write(self, out_dir, stem=None):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.experiment
        self.to_csv(out / f"{stem}.csv")
        (out / f"{stem}.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True))
        return out / f"{stem}.csv", out / f"{stem}.json"


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v
