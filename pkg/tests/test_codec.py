import hashlib
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from medusa import codec
from medusa.errors import DecodeError

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-(2**63), 2**63) | st.text(),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=8), inner, max_size=4),
    max_leaves=20,
)


def test_encode_is_compact_utf8():
    assert codec.encode({"b": 1, "a": "é"}) == '{"b":1,"a":"é"}'.encode()


def test_sha256_matches_hashlib():
    assert codec.sha256(b"abc") == hashlib.sha256(b"abc").digest()


@given(json_values)
def test_round_trip(value):
    data = codec.encode(value)
    assert codec.decode(data) == value
    assert codec.encode(codec.decode(data)) == data


@pytest.mark.parametrize(
    "raw",
    [
        b'{"a": 1}',  # non-compact
        b'{"a":1,"a":2}',  # duplicate key
        b'{"a":1.5}',  # float
        b'{"a":NaN}',
        b'{"a":"\\u00e9"}',  # escaped non-ASCII is not the canonical form
        b"\xff",
        b"",
    ],
)
def test_decode_rejects_non_canonical(raw):
    with pytest.raises(DecodeError):
        codec.decode(raw)


def test_encode_rejects_floats_and_nan():
    with pytest.raises((TypeError, ValueError)):
        codec.encode(float("nan"))


def test_hexbytes():
    assert codec.hexbytes("00ff", 2) == b"\x00\xff"
    for bad in ("00FF", "0", "zz", 5):
        with pytest.raises(DecodeError):
            codec.hexbytes(bad)
    with pytest.raises(DecodeError):
        codec.hexbytes("00", 2)


def test_fields_requires_exact_order():
    assert codec.fields({"a": 1, "b": 2}, ("a", "b")) == {"a": 1, "b": 2}
    with pytest.raises(DecodeError):
        codec.fields(json.loads('{"b":2,"a":1}'), ("a", "b"))
    with pytest.raises(DecodeError):
        codec.fields({"a": 1}, ("a", "b"))


def test_integer_and_text_guards():
    assert codec.integer(3, minimum=0) == 3
    for bad in (True, "3", -1):
        with pytest.raises(DecodeError):
            codec.integer(bad, minimum=0)
    with pytest.raises(DecodeError):
        codec.text(3)
