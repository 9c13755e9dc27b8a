"""Deterministic machine-readable outputs: canonical JSON and fixed-layout CSV.

Identical inputs must produce byte-identical files, so everything is sorted,
floats use shortest round-trip repr, and no timestamps or paths are embedded.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json

import numpy as np


def to_jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return to_jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj) if not f.name.startswith("_")}
    if isinstance(obj, range):
        return [obj.start, obj.stop]
    raise TypeError(f"cannot serialize {type(obj)!r}")


def canonical_dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_dumps(config).encode("ascii")).hexdigest()


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        fh.write(canonical_dumps(obj))
        fh.write("\n")


def _format_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")
