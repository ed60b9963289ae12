"""Wire messages exchanged between the parties.

Every message is a kind byte, a version byte and its fields in order.
Field codecs are declared once per message class; the same declaration
drives encoding, decoding and size accounting.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from typing import ClassVar, Dict, Tuple, Type

from .. import group
from ..geo import ObfuscatedMatrix
from ..group import Source, Target
from ..zkp import ProofTranscript, transcript_size

VERSION = 1


class MessageError(Exception):
    pass


# field kinds -> (encoder, decoder returning (value, consumed))

def _fixed(width, enc, dec):
    def decode(buf, pos):
        chunk = buf[pos:pos + width]
        if len(chunk) != width:
            raise group.DecodeError("truncated field")
        return dec(chunk), width
    return enc, decode


def _var_bytes():
    def enc(v: bytes) -> bytes:
        return struct.pack(">H", len(v)) + v

    def dec(buf, pos):
        (n,) = struct.unpack(">H", buf[pos:pos + 2])
        chunk = buf[pos + 2:pos + 2 + n]
        if len(chunk) != n:
            raise group.DecodeError("truncated byte field")
        return bytes(chunk), 2 + n
    return enc, dec


def _matrix(origin):
    def enc(m: ObfuscatedMatrix) -> bytes:
        return m.encode()

    def dec(buf, pos):
        rows, cols = struct.unpack(">HH", buf[pos:pos + 4])
        width = 4 + rows * cols * group.SCALAR_BYTES
        return ObfuscatedMatrix.decode(bytes(buf[pos:pos + width]), origin), width
    return enc, dec


def _proof(kind):
    width = transcript_size(kind)

    def dec(chunk):
        tr = ProofTranscript.decode(bytes(chunk))
        if tr.kind != kind:
            raise group.DecodeError("expected a %s transcript" % kind)
        return tr
    return _fixed(width, lambda t: t.encode(), dec)


def _signed64():
    return _fixed(8, lambda v: struct.pack(">q", v), lambda b: struct.unpack(">q", b)[0])


def _unsigned64():
    return _fixed(8, lambda v: struct.pack(">Q", v), lambda b: struct.unpack(">Q", b)[0])


CODECS = {
    "left": _fixed(group.LEFT_BYTES, lambda s: s.encode(), lambda b: group.decode_source(bytes(b), "left")),
    "right": _fixed(group.RIGHT_BYTES, lambda s: s.encode(), lambda b: group.decode_source(bytes(b), "right")),
    "target": _fixed(group.TARGET_BYTES, lambda t: t.encode(), lambda b: group.decode_target(bytes(b))),
    "scalar": _fixed(group.SCALAR_BYTES, group.encode_scalar, lambda b: group.decode_scalar(bytes(b))),
    "credit": _signed64(),  # P0, Q, theta
    "num": _unsigned64(),
    "slot": _unsigned64(),
    "expires": _unsigned64(),
    "trust": _fixed(8, lambda v: struct.pack(">d", v), lambda b: struct.unpack(">d", b)[0]),
    "quota": _fixed(4, lambda v: struct.pack(">I", v), lambda b: struct.unpack(">I", b)[0]),
    "anchor": _fixed(1, lambda v: bytes([v]), lambda b: b[0]),
    "flag": _fixed(1, lambda v: bytes([1 if v else 0]), lambda b: bool(b[0])),
    "identity": _var_bytes(),
    "sealed": _var_bytes(),
    "bgn": _var_bytes(),  # encoded BgnCiphertext
    "area_matrix": _matrix("area"),
    "user_matrix": _matrix("user"),
    "PK1": _proof("PK1"),
    "PK2": _proof("PK2"),
    "PK3": _proof("PK3"),
    "SPK": _proof("SPK"),
}

REGISTRY: Dict[int, Type["Message"]] = {}


class Message:
    KIND: ClassVar[int]
    NAME: ClassVar[str]
    FIELDS: ClassVar[Tuple[Tuple[str, str], ...]]

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        REGISTRY[cls.KIND] = cls

    def encode(self) -> bytes:
        out = bytearray([self.KIND, VERSION])
        for name, kind in self.FIELDS:
            out += CODECS[kind][0](getattr(self, name))
        return bytes(out)

    def digest_parts(self, skip=()):
        """Field encodings, used to bind a message body into a proof context."""
        return [CODECS[k][0](getattr(self, n)) for n, k in self.FIELDS if n not in skip]


def decode_message(data: bytes) -> Message:
    if len(data) < 2:
        raise MessageError("message too short")
    cls = REGISTRY.get(data[0])
    if cls is None:
        raise MessageError("unknown message kind %d" % data[0])
    if data[1] != VERSION:
        raise MessageError("unsupported version %d" % data[1])
    pos = 2
    values = {}
    try:
        for name, kind in cls.FIELDS:
            values[name], used = CODECS[kind][1](data, pos)
            pos += used
    except (group.DecodeError, struct.error) as exc:
        raise MessageError("malformed %s: %s" % (cls.NAME, exc)) from exc
    if pos != len(data):
        raise MessageError("trailing bytes after message body")
    return cls(**values)


@dataclass(frozen=True)
class RegistrationRequest(Message):
    KIND = 1
    NAME = "registration_request"
    FIELDS = (("identity", "identity"), ("C", "left"), ("Cp", "left"), ("Ahat", "left"), ("proof", "PK1"))
    identity: bytes
    C: Source
    Cp: Source
    Ahat: Source
    proof: ProofTranscript


@dataclass(frozen=True)
class RegistrationResponse(Message):
    KIND = 2
    NAME = "registration_response"
    FIELDS = (("A", "left"), ("B", "left"), ("s2", "scalar"), ("t2", "scalar"), ("e", "scalar"),
              ("f", "scalar"), ("P0", "credit"), ("RK", "left"))
    A: Source
    B: Source
    s2: int
    t2: int
    e: int
    f: int
    P0: int
    RK: Source


@dataclass(frozen=True)
class TaskUpload(Message):
    KIND = 3
    NAME = "task_upload"
    FIELDS = (("c1", "right"), ("c2", "right"), ("c3", "target"), ("sealed", "sealed"),
              ("expires", "expires"), ("area", "area_matrix"), ("gamma", "trust"), ("w", "quota"),
              ("proof", "PK2"))
    c1: Source
    c2: Source
    c3: Target
    sealed: bytes
    expires: int
    area: ObfuscatedMatrix
    gamma: float
    w: int
    proof: ProofTranscript


@dataclass(frozen=True)
class MatchRequest(Message):
    KIND = 4
    NAME = "match_request"
    FIELDS = (("mu", "left"), ("route", "user_matrix"), ("proof", "PK3"))
    mu: Source
    route: ObfuscatedMatrix
    proof: ProofTranscript


@dataclass(frozen=True)
class TaskOffer(Message):
    KIND = 5
    NAME = "task_offer"
    FIELDS = (("num", "num"), ("c2", "right"), ("c3", "target"), ("c4", "target"), ("sealed", "sealed"),
              ("expires", "expires"), ("gamma", "trust"))
    num: int
    c2: Source
    c3: Target
    c4: Target
    sealed: bytes
    expires: int
    gamma: float


@dataclass(frozen=True)
class MatchFailure(Message):
    KIND = 6
    NAME = "match_failure"
    FIELDS = (("matched", "flag"),)
    matched: bool = False


@dataclass(frozen=True)
class Report(Message):
    KIND = 7
    NAME = "report"
    FIELDS = (("num", "num"), ("D", "left"), ("Dp", "target"), ("Cp", "left"), ("X", "scalar"),
              ("Y", "target"), ("Z", "target"), ("Q", "credit"), ("tau", "slot"), ("anchor", "anchor"),
              ("proof", "SPK"))
    num: int
    D: Source
    Dp: Target
    Cp: Source
    X: int
    Y: Target
    Z: Target
    Q: int
    tau: int
    anchor: int  # 0: authority key, 1: provider key
    proof: ProofTranscript


@dataclass(frozen=True)
class TraceRequest(Message):
    KIND = 8
    NAME = "trace_w"
    FIELDS = (("W", "target"),)
    W: Target


@dataclass(frozen=True)
class ForwardedReport(Message):
    KIND = 9
    NAME = "forwarded_report"
    FIELDS = (("num", "num"), ("D", "left"), ("Dp", "target"), ("Y", "target"), ("Q", "credit"),
              ("tau", "slot"))
    num: int
    D: Source
    Dp: Target
    Y: Target
    Q: int
    tau: int


@dataclass(frozen=True)
class TrustFeedback(Message):
    KIND = 10
    NAME = "trust_feedback"
    FIELDS = (("epsilon", "trust"), ("Y", "target"))
    epsilon: float
    Y: Target


@dataclass(frozen=True)
class CreditUpdate(Message):
    KIND = 11
    NAME = "credit_update"
    FIELDS = (("B", "left"), ("t2", "scalar"), ("f", "scalar"), ("theta", "credit"), ("Y", "target"))
    B: Source
    t2: int
    f: int
    theta: int
    Y: Target


@dataclass(frozen=True)
class CircleTaskUpload(Message):
    """Task upload whose area is an encrypted circle instead of a masked grid."""

    KIND = 12
    NAME = "circle_task_upload"
    FIELDS = (("c1", "right"), ("c2", "right"), ("c3", "target"), ("sealed", "sealed"),
              ("expires", "expires"), ("Cx", "bgn"), ("Cy", "bgn"), ("CR", "bgn"), ("gamma", "trust"),
              ("w", "quota"), ("proof", "PK2"))
    c1: Source
    c2: Source
    c3: Target
    sealed: bytes
    expires: int
    Cx: bytes
    Cy: bytes
    CR: bytes
    gamma: float
    w: int
    proof: ProofTranscript


@dataclass(frozen=True)
class CircleMatchRequest(Message):
    KIND = 13
    NAME = "circle_match_request"
    FIELDS = (("mu", "left"), ("Ux", "bgn"), ("Uy", "bgn"), ("proof", "PK3"))
    mu: Source
    Ux: bytes
    Uy: bytes
    proof: ProofTranscript


CORE_KINDS = (
    "registration_request", "registration_response", "task_upload", "match_request",
    "task_offer", "match_failure", "report", "trace_w", "forwarded_report",
    "trust_feedback", "credit_update",
)


# codec declarations must line up with the dataclass fields
for _cls in list(REGISTRY.values()):
    assert [f.name for f in fields(_cls)] == [n for n, _ in _cls.FIELDS], _cls
