"""Atomic, byte-stable output files with an embedded metadata header."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

__all__ = ["atomic_write", "json_safe", "write_json", "read_json", "write_csv", "read_csv"]


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def json_safe(obj):
    """Convert numpy scalars/arrays and non-finite floats ("inf", "-inf", "nan")."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path, payload):
    atomic_write(path, json.dumps(json_safe(payload), indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cell(v):
    v = json_safe(v)
    return repr(v) if isinstance(v, float) else str(v)


def write_csv(path, columns, rows, metadata):
    """CSV with ``# key: value`` metadata lines, '.' decimals and LF endings."""
    buf = io.StringIO()
    for key in sorted(metadata):
        value = json.dumps(json_safe(metadata[key]), sort_keys=True, separators=(",", ":"))
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    atomic_write(path, buf.getvalue())


def read_csv(path):
    """Return ``(metadata, rows)``; numeric cells are parsed as float."""
    meta, lines = {}, []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                meta[key] = json.loads(value)
            else:
                lines.append(line)
    rows = []
    for rec in csv.DictReader(lines):
        parsed = {}
        for k, v in rec.items():
            try:
                parsed[k] = float(v)
            except ValueError:
                parsed[k] = v
        rows.append(parsed)
    return meta, rows
