"""Multi-message BBS+ signatures with blind issuance.

A public key fixes a base element, a blinding generator ``gens[0]`` (paired
with the randomizer s) and one generator per message ``gens[1:]``. The
signature is A = (base * gens[0]^s * prod gens[i+1]^m_i)^(1/(x+e)) and is
checked as pair(A, w * pg^e) == pair(base * ..., pg) with w = pg^x.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

from . import group
from .group import ORDER, Source, pair


class BbsError(Exception):
    pass


@dataclass(frozen=True)
class BbsPublicKey:
    w: Source  # right side, pg^x
    pg: Source  # right-side pairing generator
    base: Source
    gens: Tuple[Source, ...]

    @property
    def length(self) -> int:
        return len(self.gens) - 1


@dataclass(frozen=True)
class BbsKey:
    x: int
    public: BbsPublicKey


@dataclass(frozen=True)
class BbsSignature:
    A: Source
    e: int
    s: int


def bbs_keygen(base: Source, gens: Sequence[Source], pg: Source, rng=None, x: int = None) -> BbsKey:
    if len(gens) < 2:
        raise ValueError("need a blinding generator and at least one message generator")
    x = group.random_scalar(rng) if x is None else x % ORDER
    with group.uncounted():
        w = pg.only("right") ** x
    return BbsKey(x, BbsPublicKey(w, pg.only("right"), base, tuple(gens)))


def _sample_e(x: int, rng) -> int:
    while True:
        e = group.random_scalar(rng)
        if (x + e) % ORDER:
            return e


def message_product(pub: BbsPublicKey, s: int, messages: Sequence[int]) -> Source:
    """base * gens[0]^s * prod gens[i+1]^m_i, evaluated left to right."""
    acc = pub.base * pub.gens[0] ** s
    for gi, m in zip(pub.gens[1:], messages):
        acc = acc * gi ** m
    return acc


def bbs_sign(key: BbsKey, messages: Sequence[int], rng=None) -> BbsSignature:
    pub = key.public
    if len(messages) != pub.length:
        raise BbsError("expected %d messages, got %d" % (pub.length, len(messages)))
    e = _sample_e(key.x, rng)
    s = group.random_scalar(rng)
    A = message_product(pub, s, messages) ** group.inv(key.x + e)
    return BbsSignature(A, e, s)


def bbs_verify(pub: BbsPublicKey, messages: Sequence[int], sig: BbsSignature) -> bool:
    if len(messages) != pub.length:
        raise BbsError("expected %d messages, got %d" % (pub.length, len(messages)))
    if sig.A.left is None or sig.A.is_identity():
        return False
    lhs = pair(sig.A, pub.w * pub.pg ** sig.e)
    rhs = pair(message_product(pub, sig.s, messages), pub.pg)
    return lhs == rhs


def bbs_blind_sign(
    key: BbsKey,
    commitment: Source,
    known_messages: Dict[int, int],
    rng=None,
    *,
    proof_ok: bool,
):
    """Sign over a commitment to gens[0]^s' and the hidden messages.

    ``known_messages`` maps a message position to a value the issuer adds
    itself. ``proof_ok`` must be the outcome of verifying the requester's
    well-formedness proof for ``commitment``. Returns (A, e, s'').
    """
    if not proof_ok:
        raise BbsError("commitment has no verified well-formedness proof")
    pub = key.public
    e = _sample_e(key.x, rng)
    s2 = group.random_scalar(rng)
    acc = pub.base * commitment * pub.gens[0] ** s2
    for idx in sorted(known_messages):
        if not 0 <= idx < pub.length:
            raise BbsError("message index %d out of range" % idx)
        acc = acc * pub.gens[idx + 1] ** known_messages[idx]
    A = acc ** group.inv(key.x + e)
    return A, e, s2
