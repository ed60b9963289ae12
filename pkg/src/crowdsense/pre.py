"""Unidirectional proxy re-encryption over the pairing (single hop).

First-level ciphertexts are (pk^k, m * G^k) with G = pair(g, g). A
re-encryption key rk = pk_b^(1/a) turns the head into pair(g^ak, g^(b/a)) =
G^(bk), which the holder of b opens. The head can live on either pairing
side; re-encryption pairs it against the key on the opposite side.

Byte payloads are carried by a random target element: ``seal`` derives an
AEAD key from it, so the target element itself is what the scheme encrypts.
"""

from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass
from typing import Union

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import group
from .group import Source, Target, pair


class PreError(Exception):
    pass


@functools.lru_cache(maxsize=None)
def base_target() -> Target:
    """G = pair(g, g)."""
    with group.uncounted():
        return pair(group.generator(), group.generator())


@dataclass(frozen=True)
class PreKeyPair:
    secret: int
    public: Source


@dataclass(frozen=True)
class PreCiphertext:
    head: Union[Source, Target]
    body: Target
    stage: str  # "first" or "reencrypted"


def pre_keygen(rng=None, side: str = "left") -> PreKeyPair:
    a = group.random_scalar(rng)
    with group.uncounted():
        pk = group.generator().only(side) ** a
    return PreKeyPair(a, pk)


def pre_rekey(sk_a: int, pk_b: Source) -> Source:
    if sk_a % group.ORDER == 0:
        raise PreError("delegator key must be nonzero")
    return pk_b ** group.inv(sk_a)


def pre_encrypt(m: Target, pk: Source, rng=None, k: int = None) -> PreCiphertext:
    k = group.random_scalar(rng) if k is None else k
    return PreCiphertext(pk ** k, m * base_target() ** k, "first")


def _pair_opposite(x: Source, y: Source) -> Target:
    if x.left is not None and y.right is not None:
        return pair(x, y)
    if y.left is not None and x.right is not None:
        return pair(y, x)
    raise group.SideMismatch("elements cannot be paired on opposite sides")


def pre_reencrypt(c: PreCiphertext, rk: Source) -> PreCiphertext:
    if c.stage != "first":
        raise PreError("ciphertext was already re-encrypted")
    return PreCiphertext(_pair_opposite(rk, c.head), c.body, "reencrypted")


def pre_decrypt(c: PreCiphertext, sk: int) -> Target:
    if c.stage == "first":
        mask = _pair_opposite(c.head, group.generator()) ** group.inv(sk)
    elif c.stage == "reencrypted":
        mask = c.head ** group.inv(sk)
    else:
        raise PreError("unknown ciphertext stage %r" % c.stage)
    return c.body / mask


# ------------------------------------------------------------- byte payloads

_NONCE = b"\x00" * 12  # every payload key is used exactly once


def _payload_key(carrier: Target) -> bytes:
    return hashlib.sha256(b"crowdsense/payload/v1" + carrier.encode()).digest()


def seal(payload: bytes, carrier: Target, aad: bytes = b"") -> bytes:
    return AESGCM(_payload_key(carrier)).encrypt(_NONCE, payload, aad)


def unseal(blob: bytes, carrier: Target, aad: bytes = b"") -> bytes:
    try:
        return AESGCM(_payload_key(carrier)).decrypt(_NONCE, blob, aad)
    except InvalidTag as exc:
        raise PreError("payload does not open under this key") from exc
