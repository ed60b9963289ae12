"""Bilinear group substrate over BLS12-381.

The protocol is written against a symmetric pairing. BLS12-381 is
asymmetric, so every protocol generator carries a representative on the
side(s) of the pairing where it is actually used. ``Source`` holds up to
two representatives with equal discrete logs; ``pair(a, b)`` takes the
left representative of ``a`` and the right representative of ``b``.

Logical operation counts (exponentiations, multiplications, pairings and
target exponentiations) are tracked per context so that protocol phases
can be compared against hand-derived operation budgets.
"""

from __future__ import annotations

import contextlib
import contextvars
import hashlib
import secrets
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import gmpy2
from petrelic.multiplicative.pairing import (
    G1,
    G2,
    GT,
    G1Element,
    G2Element,
    GTElement,
)

ORDER: int = int(G1.order())
FIELD_MODULUS = int(
    "1a0111ea397fe69a4b1ba7b6434bacd764774b84f38512bf6730d2a0f6b0f6241eabfffeb153ffffb9feffffffffaaab",
    16,
)

SCALAR_BYTES = 32
LEFT_BYTES = 49
RIGHT_BYTES = 97
TARGET_BYTES = 384

ENCODING_VERSION = 1
_HASH_PREFIX = b"crowdsense/v1"


class GroupError(Exception):
    pass


class SideMismatch(GroupError):
    """An element was used in a pairing slot it has no representative for."""


class DecodeError(GroupError):
    pass


# ---------------------------------------------------------------- counting


@dataclass
class OpCounts:
    pm: int = 0  # source-group exponentiations
    pa: int = 0  # source-group multiplications / divisions
    pairings: int = 0
    gt_exp: int = 0

    def as_tuple(self):
        return (self.pm, self.pa, self.pairings, self.gt_exp)

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))


_counter: contextvars.ContextVar[Optional[OpCounts]] = contextvars.ContextVar(
    "crowdsense_ops", default=None
)


@contextlib.contextmanager
def counting() -> Iterator[OpCounts]:
    """Count logical group operations performed inside the block."""
    counts = OpCounts()
    token = _counter.set(counts)
    try:
        yield counts
    finally:
        _counter.reset(token)


@contextlib.contextmanager
def uncounted() -> Iterator[None]:
    """Exclude precomputation (tables, message encoding) from the count."""
    token = _counter.set(None)
    try:
        yield
    finally:
        _counter.reset(token)


def _tick(field: str) -> None:
    c = _counter.get()
    if c is not None:
        setattr(c, field, getattr(c, field) + 1)


# ------------------------------------------------------------------ scalars


def random_scalar(rng=None) -> int:
    """Uniform nonzero scalar. ``rng`` needs ``randrange`` (random.Random works)."""
    rng = rng or secrets.SystemRandom()
    return rng.randrange(1, ORDER)


def inv(k: int) -> int:
    k %= ORDER
    if k == 0:
        raise ZeroDivisionError("zero has no inverse mod the group order")
    return pow(k, -1, ORDER)


def encode_scalar(k: int) -> bytes:
    return (k % ORDER).to_bytes(SCALAR_BYTES, "big")


def decode_scalar(data: bytes) -> int:
    if len(data) != SCALAR_BYTES:
        raise DecodeError("scalar must be %d bytes" % SCALAR_BYTES)
    k = int.from_bytes(data, "big")
    if k >= ORDER:
        raise DecodeError("scalar not reduced")
    return k


def hash_to_scalar(domain_tag: bytes, parts: Iterable[bytes]) -> int:
    """Domain-separated hash onto Z_p with length-prefixed parts."""
    h = hashlib.shake_256()
    h.update(_HASH_PREFIX)
    h.update(len(domain_tag).to_bytes(4, "big"))
    h.update(domain_tag)
    for part in parts:
        h.update(len(part).to_bytes(8, "big"))
        h.update(part)
    return int.from_bytes(h.digest(64), "big") % ORDER


def prf(key: int, data: bytes) -> int:
    """Keyed function F_key(data); the key occupies the domain-tag slot."""
    if key % ORDER == 0:
        raise ValueError("PRF key must be nonzero")
    return hash_to_scalar(b"prf:" + encode_scalar(key), [data])


# ----------------------------------------------------------------- elements


class Source:
    """Element of the pairing source group with left and/or right representatives."""

    __slots__ = ("left", "right")

    def __init__(self, left: Optional[G1Element] = None, right: Optional[G2Element] = None):
        if left is None and right is None:
            raise SideMismatch("source element needs at least one representative")
        self.left = left
        self.right = right

    @property
    def side(self) -> str:
        if self.left is not None and self.right is not None:
            return "both"
        return "left" if self.left is not None else "right"

    def __pow__(self, k: int) -> "Source":
        _tick("pm")
        k %= ORDER
        return Source(
            None if self.left is None else self.left ** k,
            None if self.right is None else self.right ** k,
        )

    def _combine(self, other: "Source", invert: bool) -> "Source":
        _tick("pa")
        left = right = None
        if self.left is not None and other.left is not None:
            left = self.left * (other.left.inverse() if invert else other.left)
        if self.right is not None and other.right is not None:
            right = self.right * (other.right.inverse() if invert else other.right)
        if left is None and right is None:
            raise SideMismatch("operands share no pairing side")
        return Source(left, right)

    def __mul__(self, other: "Source") -> "Source":
        return self._combine(other, False)

    def __truediv__(self, other: "Source") -> "Source":
        return self._combine(other, True)

    def only(self, side: str) -> "Source":
        if side == "left":
            if self.left is None:
                raise SideMismatch("no left representative")
            return Source(self.left, None)
        if self.right is None:
            raise SideMismatch("no right representative")
        return Source(None, self.right)

    def is_identity(self) -> bool:
        rep = self.left if self.left is not None else self.right
        neutral = G1.neutral_element() if self.left is not None else G2.neutral_element()
        return rep == neutral

    def __eq__(self, other) -> bool:
        if not isinstance(other, Source):
            return NotImplemented
        return self.side == other.side and self.encode() == other.encode()

    def __hash__(self) -> int:
        return hash(self.encode())

    def encode(self) -> bytes:
        out = b""
        if self.left is not None:
            out += _encode_point(self.left, LEFT_BYTES)
        if self.right is not None:
            out += _encode_point(self.right, RIGHT_BYTES)
        return out

    def __repr__(self) -> str:
        return "Source(%s, %s)" % (self.side, self.encode()[:6].hex())


class Target:
    """Element of the pairing target group."""

    __slots__ = ("value",)

    def __init__(self, value: GTElement):
        self.value = value

    def __pow__(self, k: int) -> "Target":
        _tick("gt_exp")
        return Target(self.value ** (k % ORDER))

    # target multiplication is not part of the operation budget
    def __mul__(self, other: "Target") -> "Target":
        return Target(self.value * other.value)

    def __truediv__(self, other: "Target") -> "Target":
        return Target(self.value * other.value.inverse())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Target):
            return NotImplemented
        return self.value == other.value

    def __hash__(self) -> int:
        return hash(self.encode())

    def encode(self) -> bytes:
        return self.value.to_binary()

    def __repr__(self) -> str:
        return "Target(%s)" % self.encode()[:6].hex()


def pair(a: Source, b: Source) -> Target:
    """Bilinear map with ``a`` in the left slot and ``b`` in the right slot."""
    if a.left is None:
        raise SideMismatch("first pairing argument has no left representative")
    if b.right is None:
        raise SideMismatch("second pairing argument has no right representative")
    _tick("pairings")
    return Target(a.left.pair(b.right))


def target_identity() -> Target:
    return Target(GT.unity())


def left_generator() -> Source:
    return Source(G1.generator(), None)


def generator() -> Source:
    """The generator g with both representatives."""
    return Source(G1.generator(), G2.generator())


def hash_to_left(tag: bytes) -> Source:
    return Source(G1.hash_to_point(_HASH_PREFIX + b"/point/" + tag), None)


def hash_to_target(tag: bytes) -> Target:
    """Target element with unknown discrete log relative to pair(g, g)."""
    with uncounted():
        return pair(hash_to_left(b"target/" + tag), generator())


def random_target(rng=None) -> Target:
    """Random target element, used to carry payload keys."""
    k = random_scalar(rng)
    return Target(GT.generator() ** k)


# ----------------------------------------------------------------- encoding


def _encode_point(p, width: int) -> bytes:
    raw = p.to_binary()
    if raw == b"\x00":
        return b"\x00" * width
    if len(raw) != width:
        raise GroupError("unexpected point encoding width")
    return raw


def _is_square_fq(a: int) -> bool:
    return a == 0 or gmpy2.legendre(a, FIELD_MODULUS) == 1


def _left_on_curve(data: bytes) -> bool:
    q = FIELD_MODULUS
    x = int.from_bytes(data[1:], "big")
    if x >= q:
        return False
    return _is_square_fq((x * x * x + 4) % q)


def _right_on_curve(data: bytes) -> bool:
    q = FIELD_MODULUS
    x0 = int.from_bytes(data[1:49], "big")
    x1 = int.from_bytes(data[49:97], "big")
    if x0 >= q or x1 >= q:
        return False
    # x^2 and x^3 in F_q[i]/(i^2+1)
    s0, s1 = (x0 * x0 - x1 * x1) % q, (2 * x0 * x1) % q
    c0, c1 = (s0 * x0 - s1 * x1) % q, (s0 * x1 + s1 * x0) % q
    r0, r1 = (c0 + 4) % q, (c1 + 4) % q
    # an element of F_q^2 is a square iff its norm is a square in F_q
    return _is_square_fq((r0 * r0 + r1 * r1) % q)


def _decode_point(data: bytes, width: int, cls, neutral, on_curve):
    if len(data) != width:
        raise DecodeError("point must be %d bytes" % width)
    if data == b"\x00" * width:
        return neutral
    if data[0] not in (2, 3) or not on_curve(data):
        raise DecodeError("point is not on the curve")
    p = cls.from_binary(data)
    if not p.is_valid():
        raise DecodeError("point is not in the prime-order subgroup")
    if p.to_binary() != data:
        raise DecodeError("non-canonical point encoding")
    return p


def decode_source(data: bytes, side: str) -> Source:
    if side == "left":
        return Source(_decode_point(data, LEFT_BYTES, G1Element, G1.neutral_element(), _left_on_curve), None)
    if side == "right":
        return Source(None, _decode_point(data, RIGHT_BYTES, G2Element, G2.neutral_element(), _right_on_curve))
    if side == "both":
        left = decode_source(data[:LEFT_BYTES], "left")
        right = decode_source(data[LEFT_BYTES:], "right")
        el = Source(left.left, right.right)
        with uncounted():
            if pair(left, generator()) != pair(left_generator(), right):
                raise DecodeError("left and right representatives disagree")
        return el
    raise ValueError("unknown side %r" % side)


def decode_target(data: bytes) -> Target:
    if len(data) != TARGET_BYTES:
        raise DecodeError("target element must be %d bytes" % TARGET_BYTES)
    try:
        v = GTElement.from_binary(data)
    except Exception as exc:  # backend raises a generic error on garbage
        raise DecodeError("undecodable target element") from exc
    if not v.is_valid() or v.to_binary() != data:
        raise DecodeError("target element outside the order-p subgroup")
    return Target(v)


def source_width(side: str) -> int:
    return {"left": LEFT_BYTES, "right": RIGHT_BYTES, "both": LEFT_BYTES + RIGHT_BYTES}[side]
