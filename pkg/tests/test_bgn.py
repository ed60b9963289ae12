import random

import pytest
from hypothesis import given, strategies as st

from crowdsense import bgn
from crowdsense.bgn import BgnCiphertext, BgnError, DlogOutOfBound


@pytest.fixture(scope="module")
def params():
    return bgn.bgn_setup(32, 2 ** 10, random.Random(11))


coord = st.integers(0, 2 ** 10)


def test_parameters(params):
    pub = params.public
    assert params.q1 * params.q2 == pub.n
    assert pub.q % 4 == 3 and (pub.q + 1) % pub.n == 0
    assert bgn._mul(pub.l, pub.n, pub.q) is None
    assert bgn._mul(pub.l1, params.q1, pub.q) is None
    with pytest.raises(ValueError):
        bgn.bgn_setup(4)


@given(coord)
def test_source_roundtrip(params, m):
    c = bgn.bgn_encrypt(m, params.public, random.Random(m))
    assert bgn.bgn_decrypt(c, params) == m


@given(coord, coord)
def test_additive(params, a, b):
    pub = params.public
    c = bgn.bgn_add(bgn.bgn_encrypt(a, pub), bgn.bgn_encrypt(b, pub), pub)
    if a + b <= pub.M_max:
        assert bgn.bgn_decrypt(c, params) == a + b


@given(coord, coord)
def test_one_multiplication(params, a, b):
    pub = params.public
    c = bgn.bgn_pair(bgn.bgn_encrypt(a, pub), bgn.bgn_encrypt(b, pub), pub)
    assert c.level == "target"
    assert bgn.bgn_decrypt(c, params) == a * b


@given(coord, coord, coord, coord, st.integers(1, 2 ** 10))
def test_distance_decision(params, cx, cy, ux, uy, R):
    pub = params.public
    enc = lambda v: bgn.bgn_encrypt(v, pub)
    Z = bgn.bgn_distance_ct(enc(cx), enc(cy), enc(ux), enc(uy), pub)
    assert bgn.bgn_decrypt(Z, params) == (cx - ux) ** 2 + (cy - uy) ** 2
    assert bgn.bgn_decide(Z, enc(R), params) == ((cx - ux) ** 2 + (cy - uy) ** 2 < R * R)


def test_boundary_is_outside(params):
    pub = params.public
    enc = lambda v: bgn.bgn_encrypt(v, pub)
    Z = bgn.bgn_distance_ct(enc(3), enc(4), enc(0), enc(0), pub)
    assert not bgn.bgn_decide(Z, enc(5), params)
    assert bgn.bgn_decide(Z, enc(6), params)


def test_level_and_bound_errors(params):
    pub = params.public
    s = bgn.bgn_encrypt(1, pub)
    t = bgn.bgn_pair(s, s, pub)
    with pytest.raises(BgnError):
        bgn.bgn_encrypt(pub.M_max + 1, pub)
    with pytest.raises(BgnError):
        bgn.bgn_encrypt(-1, pub)
    with pytest.raises(BgnError):
        bgn.bgn_pair(t, s, pub)
    with pytest.raises(BgnError):
        bgn.bgn_add(t, s, pub)
    with pytest.raises(BgnError):
        bgn.bgn_decide(s, s, params)
    big = bgn.bgn_add(bgn.bgn_encrypt(pub.M_max, pub), bgn.bgn_encrypt(pub.M_max, pub), pub)
    with pytest.raises(DlogOutOfBound):
        bgn.bgn_decrypt(big, params)


def test_codec(params):
    pub = params.public
    for c in (bgn.bgn_encrypt(9, pub), BgnCiphertext("source", None),
              bgn.bgn_pair(bgn.bgn_encrypt(2, pub), bgn.bgn_encrypt(3, pub), pub)):
        data = c.encode(pub)
        assert len(data) == 1 + 2 * pub.coord_bytes
        assert BgnCiphertext.decode(data) == c
    with pytest.raises(BgnError):
        BgnCiphertext.decode(b"\x05" + b"\x00" * 16)
    with pytest.raises(BgnError):
        BgnCiphertext.decode(b"\x00" + b"\x01" * 16)


def test_tate_is_bilinear(params):
    pub = params.public
    e = lambda P, Q: bgn._tate(P, Q, pub.n, pub.q)
    P3 = bgn._mul(pub.l, 3, pub.q)
    P5 = bgn._mul(pub.l, 5, pub.q)
    assert e(P3, P5) == bgn._f2_pow(e(pub.l, pub.l), 15, pub.q)
    assert e(pub.l, pub.l) != (1, 0)
