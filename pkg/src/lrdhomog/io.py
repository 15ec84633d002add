"""CSV and raw float64 persistence with JSON sidecars."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["write_csv", "read_csv", "write_raw", "read_raw", "path_to_csv", "path_to_raw", "samples_to_csv"]

RAW_DTYPE = "<f8"


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def read_csv(path):
    """Header and list of string rows."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def write_raw(path, array, meta=None):
    """Little-endian float64 dump of ``array`` plus ``<path>.json`` with shape and ``meta``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(array, dtype=RAW_DTYPE)
    arr.tofile(path)
    sidecar = {"dtype": RAW_DTYPE, "shape": list(arr.shape), **(meta or {})}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def read_raw(path):
    """Array and sidecar metadata written by :func:`write_raw`."""
    meta = json.loads(Path(str(path) + ".json").read_text())
    arr = np.fromfile(path, dtype=meta["dtype"]).reshape(meta["shape"])
    return arr, meta


def _path_meta(path):
    meta = {"kind": getattr(path, "kind", "hermite"), "H0": path.H0, "seed": path.seed}
    for name in ("dx", "x0", "m", "T", "delta"):
        if hasattr(path, name):
            meta[name] = getattr(path, name)
    return meta


def path_to_csv(path_obj, filename):
    """Columns index, x, value."""
    rows = zip(range(path_obj.values.size), path_obj.x, path_obj.values)
    return write_csv(filename, ["index", "x", "value"], rows)


def path_to_raw(path_obj, filename):
    return write_raw(filename, path_obj.values, _path_meta(path_obj))


def samples_to_csv(samples, filename):
    """Columns replicate, value."""
    return write_csv(filename, ["replicate", "value"], enumerate(np.asarray(samples, dtype=float)))
