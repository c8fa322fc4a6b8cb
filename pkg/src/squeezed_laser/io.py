"""CSV output with a JSON metadata header.

Every file starts with ``#``-prefixed comment lines holding a JSON object,
followed by a header row and numeric rows printed with 17 significant digits.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

PathLike = Union[str, Path]


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(value)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def header_lines(meta: dict) -> list[str]:
    text = json.dumps(_jsonable(meta), sort_keys=True, indent=1)
    return ["# " + line for line in text.splitlines()]


def write_csv(path: PathLike, columns: Sequence[str], rows: Iterable[Sequence[Any]], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header_lines(meta or {}):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_csv(path: PathLike) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`write_csv` for all-numeric bodies."""
    meta_lines, body = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                meta_lines.append(line[2:] if line.startswith("# ") else line[1:])
            else:
                body.append(line.rstrip("\n"))
    meta = json.loads("".join(meta_lines)) if meta_lines else {}
    columns = body[0].split(",")
    data = np.array([[float(x) for x in row.split(",")] for row in body[1:] if row], dtype=float)
    return meta, columns, data.reshape(-1, len(columns))


def csv_body(path: PathLike) -> str:
    """File contents without the comment header (for reproducibility checks)."""
    with open(path, encoding="utf-8") as fh:
        return "".join(line for line in fh if not line.startswith("#"))
