"""Space files (JSON), matrix CSV export and number formatting.

Floats are written with 17 significant digits.  Exact spaces keep their
rationals as ``"p/q"`` strings so a round trip is lossless.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .core import FinitePQSpace

SCHEMA_VERSION = 1


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def fmt_exact(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f'"{x.numerator}/{x.denominator}"'
    return fmt_float(x)


def _json_number(x) -> str:
    if isinstance(x, Fraction):
        return fmt_exact(x)
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return fmt_float(x)


def dumps_space(space: FinitePQSpace) -> str:
    labels = json.dumps(list(space.labels))
    rows = ",\n    ".join("[" + ", ".join(_json_number(v) for v in row) + "]" for row in space.q)
    mu = ", ".join(_json_number(v) for v in space.mu)
    return f'{{\n  "labels": {labels},\n  "q": [\n    {rows}\n  ],\n  "mu": [{mu}]\n}}\n'


def loads_space(text: str) -> FinitePQSpace:
    data = json.loads(text)
    try:
        q, mu = data["q"], data["mu"]
    except (TypeError, KeyError) as exc:
        raise ValueError("space file needs 'q' and 'mu' entries") from exc
    return FinitePQSpace.from_lists(q, mu, data.get("labels"))


def save_space(space: FinitePQSpace, path) -> None:
    Path(path).write_text(dumps_space(space))


def load_space(path) -> FinitePQSpace:
    return loads_space(Path(path).read_text())


def matrix_csv(space: FinitePQSpace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["", *space.labels])
    for label, row in zip(space.labels, space.q):
        w.writerow([label, *(fmt_float(v) for v in row)])
    return buf.getvalue()


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numbers for ``json.dumps``; rationals become floats."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (Fraction, float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(payload: dict) -> str:
    """JSON text with a schema version and 17-digit floats."""
    body = {"schema_version": SCHEMA_VERSION, **payload}
    return _encode(to_jsonable(body), 0) + "\n"


def _encode(obj, indent: int) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            return json.dumps(str(obj))
        return fmt_float(obj)
    return json.dumps(obj)


def write_rows_csv(path_or_buf, header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(v) for v in row])
    text = buf.getvalue()
    if path_or_buf is not None:
        Path(path_or_buf).write_text(text)
    return text


def _csv_cell(v) -> str:
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return "" if v is None else str(v).lower() if isinstance(v, bool) else v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt_float(v)
