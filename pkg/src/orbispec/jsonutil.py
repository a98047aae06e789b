"""Deterministic JSON rendering with 17-significant-digit floats.

The stdlib encoder cannot customize float formatting, so the small JSON
subset used by the CLI (dict/list/str/float/int/bool/None) is rendered by
hand.  Output is byte-stable for identical inputs.
"""

from __future__ import annotations

import math


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite float {x!r} cannot be serialized")
    s = f"{x:.17g}"
    # keep a float marker so round-tripping preserves the type
    if "e" not in s and "." not in s and "inf" not in s and "nan" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int | None = None) -> str:
    out = []
    _render(obj, out, indent, 0)
    return "".join(out)


def _render(obj, out, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end_pad = "" if indent is None else "\n" + " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append("," if indent is None else ",")
            out.append(pad)
            out.append('"' + str(k) + '": ' if indent is not None
                       else '"' + str(k) + '": ')
            _render(v, out, indent, level + 1)
        out.append(end_pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            out.append(pad)
            _render(v, out, indent, level + 1)
        out.append(end_pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
