"""Atomic file output, CSV dialect and run manifests."""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def atomic_write_text(path, text: str):
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(columns: dict) -> str:
    names = list(columns)
    cols = [np.atleast_1d(np.asarray(columns[k])) if not isinstance(columns[k], list) else columns[k] for k in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise DomainError("CSV columns must have equal length")
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(n):
        w.writerow([_fmt(c[i]) for c in cols])
    return buf.getvalue()


def write_csv(path, columns: dict):
    return atomic_write_text(path, csv_text(columns))


def write_json(path, obj):
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def write_table(path_stem, columns: dict, fmt: str = "csv"):
    """Write ``columns`` as ``<stem>.csv`` or ``<stem>.json`` (column-oriented)."""
    if fmt == "csv":
        return write_csv(f"{path_stem}.csv", columns)
    if fmt == "json":
        return write_json(f"{path_stem}.json", {k: np.asarray(v).tolist() for k, v in columns.items()})
    raise ConfigError(f"unknown format {fmt!r}")


def read_csv_columns(path) -> dict:
    """Read a headered numeric CSV into float arrays keyed by column name."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise ConfigError(f"{path} has no data rows")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged rows")
    return {h: data[:, i] for i, h in enumerate(header)}


def now_iso():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
