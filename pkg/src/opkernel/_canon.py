"""Canonical text serialization and content digests.

Every file format in the package goes through :func:`dumps`: keys sorted,
no insignificant whitespace, floats written with 17 significant digits so
that a value survives a load/save cycle bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite number cannot be serialized: {x!r}")
    if x == 0.0:
        # -0.0 and 0.0 compare equal; keep one spelling so digests agree
        return "0"
    return format(x, ".17g")


def _write(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"object keys must be strings, got {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _write(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _write(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    out: list[str] = []
    _write(obj, out)
    return "".join(out)


def loads(text: str) -> Any:
    def _reject(token: str) -> Any:
        raise ValueError(f"non-finite number in input: {token}")

    return json.loads(text, parse_constant=_reject)


def digest(obj: Any) -> str:
    """sha256 hex digest of the canonical serialization of *obj*."""
    return hashlib.sha256(dumps(obj).encode("ascii")).hexdigest()


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
