"""Deterministic JSON emission: sorted keys, fixed 17-significant-digit floats.

format(x, '.17g') round-trips IEEE doubles bit-exactly, so identical data
always serializes to identical bytes.
"""

import json
import math


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite float in JSON artifact")
    if x == int(x) and abs(x) < 1e16:
        # keep a trailing .0 so the value parses back as float
        return format(x, ".1f") if abs(x) < 1e15 else format(x, ".17g")
    return format(x, ".17g")


def _emit(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted(obj.items())
        body = ",".join(f"{json.dumps(str(k))}:{_emit(v)}" for k, v in items)
        return "{" + body + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps(obj) -> str:
    """Canonical JSON string (newline-terminated)."""
    return _emit(obj) + "\n"


def dump(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def load(path):
    with open(path) as fh:
        return json.load(fh)
