"""Deterministic serialization: canonical JSON/CSV with 17-significant-digit floats."""

import hashlib
import json
import math
from pathlib import Path

import numpy as np

__all__ = [
    "format_number",
    "canonical_json",
    "write_json",
    "write_csv",
    "scenario_hash",
]


def format_number(x) -> str:
    """Render a number with full round-trip fidelity (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def canonical_json(obj, indent: int = 0) -> str:
    """Canonical JSON text: sorted keys, 17-sig-digit floats, stable bytes."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, (bool, np.bool_, int, np.integer, float, np.floating)):
        return format_number(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (
            f"{inner}{json.dumps(str(k), ensure_ascii=True)}: {canonical_json(v, indent + 1)}"
            for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))
        )
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = (f"{inner}{canonical_json(v, indent + 1)}" for v in obj)
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"cannot serialize {type(obj).__name__} canonically")


def write_json(path: Path, obj) -> None:
    Path(path).write_text(canonical_json(obj) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows) -> None:
    """Plain UTF-8 CSV, '.' decimal separator, no locale dependence."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else format_number(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def scenario_hash(data: dict) -> str:
    """Stable digest of a canonicalized scenario structure."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()
