"""JSONL experiment records and CSV plot data.

A run file starts with a ``meta`` line (format version, tool version, start
time) and ends with a ``meta`` line carrying timings.  Everything between
is deterministic given the configuration and seed.
"""

from __future__ import annotations

import csv
import io
import json
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from .errors import InputError

FORMAT_VERSION = 1
TOOL_VERSION = "0.1.0"


def _default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), default=_default, allow_nan=False)


def loads(line: str) -> dict:
    return json.loads(line)


def normalise(record: dict) -> dict:
    """The record as it reads back from disk."""
    return loads(dumps(record))


class RecordWriter:
    """Append-only JSONL writer; records are flushed as they arrive."""

    def __init__(self, path=None, config=None):
        self.path = path
        self.config = config or {}
        self._fh = sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")
        self._t0 = time.perf_counter()
        self.count = 0
        self._line({
            "kind": "meta",
            "format_version": FORMAT_VERSION,
            "tool_version": TOOL_VERSION,
            "started": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        })

    def _line(self, obj):
        self._fh.write(dumps(obj) + "\n")
        self._fh.flush()

    def write(self, payload: dict):
        rec = {"format_version": FORMAT_VERSION, "config": self.config}
        rec.update(payload)
        self._line(rec)
        self.count += 1

    def close(self, **extra):
        meta = {"kind": "meta", "records": self.count,
                "elapsed_s": round(time.perf_counter() - self._t0, 3)}
        meta.update(extra)
        self._line(meta)
        if self._fh is not sys.stdout:
            self._fh.close()


def read_records(path_or_text, include_meta: bool = False) -> list:
    if "\n" in str(path_or_text) or str(path_or_text).lstrip().startswith("{"):
        text = str(path_or_text)
    else:
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    out = [loads(ln) for ln in text.splitlines() if ln.strip()]
    return out if include_meta else [r for r in out if r.get("kind") != "meta"]


def payload_lines(text: str) -> list:
    """Non-meta lines of a run file (the deterministic part)."""
    return [ln for ln in text.splitlines() if ln.strip() and loads(ln).get("kind") != "meta"]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


SWEEP_AXES = ("ell", "d", "fraction_collapsed", "n_trials")
SERIES_AXES = ("t", "theta_hat")


def emit_plot_data(records, axes) -> str:
    """CSV with the given columns, rows in a fixed order.

    ``ell,d,fraction_collapsed,n_trials`` aggregates sweep records per cell;
    ``t,theta_hat`` expands the even-horizon series of theta records; any
    other axes are read directly from records that carry all of them.
    """
    from .phase import sweep_curve

    axes = tuple(axes)
    records = [r for r in records if r.get("kind") != "meta"]
    if axes == SWEEP_AXES:
        rows = sweep_curve(records)
    elif axes == SERIES_AXES:
        rows = []
        for r in records:
            for t, th in r.get("series", []):
                if t % 2 == 0:
                    rows.append((t, th))
        rows.sort()
    else:
        rows = []
        for r in records:
            missing = [a for a in axes if a not in r]
            if missing:
                raise InputError(f"axis {missing[0]!r} absent from record schema")
            rows.append(tuple(r[a] for a in axes))
        rows.sort(key=lambda row: tuple((0, v) if isinstance(v, (int, float)) else (1, str(v)) for v in row))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(axes)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()
