"""Deterministic report emission.

Reports must be byte-identical across runs with the same seed and config,
so: keys are sorted, rationals are rendered as exact strings, sets are
sorted, and no timestamps or host data ever enter a report.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

__all__ = ["to_jsonable", "render_json", "write_json", "write_csv"]


def to_jsonable(obj: Any) -> Any:
    if obj is None or isinstance(obj, (bool, int, str, float)):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        for name in ("passed",):
            if hasattr(obj, name) and name not in out:
                out[name] = to_jsonable(getattr(obj, name))
        return out
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return [to_jsonable(x) for x in sorted(obj)]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if hasattr(obj, "vertices"):  # GeodesicPath and friends
        return to_jsonable(obj.vertices)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_json(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, payload: Any) -> None:
    Path(path).write_text(render_json(payload))


def write_csv(path: str | Path, header: list[str], rows: list[tuple]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([to_jsonable(x) for x in row])
    Path(path).write_text(buf.getvalue())
