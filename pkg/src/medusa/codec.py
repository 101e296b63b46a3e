"""Canonical text encoding used for every hashed or signed structure.

The encoding is compact JSON: UTF-8, no insignificant whitespace, object keys
in the fixed order in which each ``to_canonical`` method emits them, integers
in base 10, byte strings as lowercase hex.  Floats are not permitted.  Decoding
is strict: a byte string is accepted only if re-encoding the decoded value
reproduces it exactly, so any non-canonical variant is rejected.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .errors import DecodeError

ZERO_HASH = bytes(32)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def encode(value: Any) -> bytes:
    return json.dumps(
        value, ensure_ascii=False, separators=(",", ":"), allow_nan=False
    ).encode("utf-8")


def _no_float(text: str):
    raise DecodeError(f"floats are not canonical: {text!r}")


def _no_constant(text: str):
    raise DecodeError(f"non-finite number: {text!r}")


def _pairs(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise DecodeError(f"duplicate key {key!r}")
        out[key] = value
    return out


def decode(data: bytes) -> Any:
    """Decode canonical bytes, rejecting anything :func:`encode` would not emit."""
    try:
        text = data.decode("utf-8")
        value = json.loads(
            text,
            object_pairs_hook=_pairs,
            parse_float=_no_float,
            parse_constant=_no_constant,
        )
    except DecodeError:
        raise
    except (UnicodeDecodeError, ValueError, RecursionError) as exc:
        raise DecodeError(str(exc)) from exc
    try:
        again = encode(value)
    except (UnicodeEncodeError, ValueError) as exc:
        raise DecodeError(str(exc)) from exc
    if again != data:
        raise DecodeError("bytes are not in canonical form")
    return value


def hexbytes(text: Any, size: int | None = None) -> bytes:
    """Parse a lowercase hex field, optionally of a fixed byte length."""
    if not isinstance(text, str) or text != text.lower():
        raise DecodeError(f"expected lowercase hex, got {text!r}")
    try:
        raw = bytes.fromhex(text)
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc
    if raw.hex() != text:
        raise DecodeError(f"non-canonical hex {text!r}")
    if size is not None and len(raw) != size:
        raise DecodeError(f"expected {size} bytes, got {len(raw)}")
    return raw


def fields(obj: Any, names: tuple[str, ...]) -> dict[str, Any]:
    """Check that ``obj`` is an object with exactly ``names`` in that order."""
    if not isinstance(obj, dict) or tuple(obj) != names:
        got = tuple(obj) if isinstance(obj, dict) else type(obj).__name__
        raise DecodeError(f"expected fields {names}, got {got}")
    return obj


def integer(value: Any, minimum: int | None = None) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise DecodeError(f"expected integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise DecodeError(f"integer {value} below {minimum}")
    return value


def text(value: Any) -> str:
    if not isinstance(value, str):
        raise DecodeError(f"expected text, got {value!r}")
    return value
