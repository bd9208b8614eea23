"""Deterministic JSON and CSV emission."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math

import numpy as np


def plain(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def to_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2) + "\n"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    if value is None:
        return ""
    return str(value)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def flatten(obj, prefix="") -> list[tuple[str, object]]:
    """``(dotted.key, value)`` pairs for a nested report; lists are indexed."""
    out = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            out += flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            out += flatten(v, f"{prefix}{i}.")
    else:
        out.append((prefix[:-1], obj))
    return out


def fingerprint(payload: dict) -> str:
    return hashlib.sha256(json.dumps(plain(payload), sort_keys=True).encode()).hexdigest()[:16]
