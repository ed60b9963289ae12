import hashlib

import pytest
from hypothesis import given, strategies as st

from crowdsense import group
from crowdsense.group import Source, pair

# BLS12-381 constants from the curve's published definition
BLS_R = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
BLS_G1_X = 0x17F1D3A73197D7942695638C4FA9AC0FC3688C4F9774B905A14E3A3F171BAC586C55E83FF97A1AEFFB3AF00ADB22C6BB

scalars = st.integers(min_value=1, max_value=BLS_R - 1)
small = st.integers(min_value=1, max_value=2 ** 20)


def test_curve_constants():
    assert group.ORDER == BLS_R
    enc = group.left_generator().encode()
    assert len(enc) == group.LEFT_BYTES
    assert int.from_bytes(enc[1:], "big") == BLS_G1_X


def test_widths():
    g = group.generator()
    assert len(g.only("left").encode()) == 49
    assert len(g.only("right").encode()) == 97
    assert len(g.encode()) == 49 + 97
    assert len(pair(g, g).encode()) == 384
    assert group.source_width("both") == 146


@given(small, small)
def test_bilinear(a, b):
    g = group.generator()
    assert pair(g ** a, g ** b) == pair(g, g) ** (a * b)


@given(scalars)
def test_source_roundtrip(k):
    el = group.generator() ** k
    for side in ("left", "right"):
        part = el.only(side)
        assert group.decode_source(part.encode(), side) == part
    assert group.decode_source(el.encode(), "both") == el


@given(scalars)
def test_target_roundtrip(k):
    t = pair(group.generator(), group.generator()) ** k
    assert group.decode_target(t.encode()) == t


def test_identity_encodes_as_zeros():
    z = group.left_generator() ** 0
    assert z.is_identity()
    assert z.encode() == b"\x00" * 49
    assert group.decode_source(z.encode(), "left").is_identity()


def test_decode_rejects_garbage():
    good = group.left_generator().encode()
    with pytest.raises(group.DecodeError):
        group.decode_source(good[:-1], "left")
    with pytest.raises(group.DecodeError):
        group.decode_source(b"\x02" + b"\xff" * 48, "left")
    bad = bytearray(good)
    bad[-1] ^= 1
    with pytest.raises(group.DecodeError):
        group.decode_source(bytes(bad), "left")
    with pytest.raises(group.DecodeError):
        group.decode_target(b"\x01" * 384)


def test_both_sides_must_agree():
    g = group.generator()
    mixed = g.only("left").encode() + (g ** 2).only("right").encode()
    with pytest.raises(group.DecodeError):
        group.decode_source(mixed, "both")


def test_scalar_codec():
    assert group.decode_scalar(group.encode_scalar(5)) == 5
    with pytest.raises(group.DecodeError):
        group.decode_scalar(BLS_R.to_bytes(32, "big"))
    with pytest.raises(group.DecodeError):
        group.decode_scalar(b"\x00" * 31)


def test_pairing_sides():
    g = group.generator()
    with pytest.raises(group.SideMismatch):
        pair(g.only("right"), g)
    with pytest.raises(group.SideMismatch):
        pair(g, g.only("left"))
    with pytest.raises(group.SideMismatch):
        g.only("left") * g.only("right")
    with pytest.raises(group.SideMismatch):
        Source(None, None)


def test_inverse():
    assert group.inv(3) * 3 % BLS_R == 1
    with pytest.raises(ZeroDivisionError):
        group.inv(BLS_R)


def test_hash_to_scalar_matches_independent_shake():
    # recompute the length-prefixed framing with hashlib directly
    h = hashlib.shake_256()
    h.update(b"crowdsense/v1")
    h.update((3).to_bytes(4, "big") + b"tag")
    for part in (b"a", b"bc"):
        h.update(len(part).to_bytes(8, "big") + part)
    assert group.hash_to_scalar(b"tag", [b"a", b"bc"]) == int.from_bytes(h.digest(64), "big") % BLS_R
    assert group.hash_to_scalar(b"tag", [b"ab", b"c"]) != group.hash_to_scalar(b"tag", [b"a", b"bc"])


def test_prf_rejects_zero_key():
    with pytest.raises(ValueError):
        group.prf(0, b"x")
    assert group.prf(1, b"x") != group.prf(2, b"x")


def test_counting():
    g = group.generator()
    with group.counting() as c:
        a = g ** 3
        b = a * g
        t = pair(a, b)
        t ** 2
        t * t
        with group.uncounted():
            g ** 5
    assert c.as_tuple() == (1, 1, 1, 1)
    g ** 7  # outside any block: nothing recorded, nothing raised
