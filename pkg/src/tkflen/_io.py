"""Deterministic CSV/JSON writers (17 significant digits, '\\n' newlines)."""

from __future__ import annotations

import io
import math
from typing import Any, Iterable, Sequence


def fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if hasattr(x, "item"):  # numpy scalar
        return fmt(x.item())
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_value(x: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if hasattr(x, "tolist"):
        x = x.tolist()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        # JSON has no nan/inf
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(x, str):
        import json
        return json.dumps(x)
    if isinstance(x, dict):
        if not x:
            return "{}"
        import json
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}"
                 for k, v in x.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in x):
            return "[" + ", ".join(_json_value(v, 0, 0) for v in x) + "]"
        items = [pad + _json_value(v, indent, level + 1) for v in x]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def json_text(obj: Any, indent: int = 2) -> str:
    """Serialize with every float written to 17 significant digits."""
    return _json_value(obj, indent, 0) + "\n"
