"""Protocol generators and their pairing-side assignment.

``g``, ``h`` and the range base ``y`` are paired on both sides, so they are
built as powers of the backend generator pair with a shared exponent. All
other generators are only ever used on the left and come from hashing a
fixed tag, so nobody knows their discrete logs.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from . import group
from .group import Source, Target


@dataclass(frozen=True)
class Generators:
    g: Source
    g0: Source
    g1: Source
    g2: Source
    g3: Source
    h: Source
    h0: Source
    h1: Source
    h2: Source
    h3: Source
    h4: Source
    G: Target  # pair(g, g)
    H: Target  # pair(h, h)
    calG: Target  # independent target base for tracing tags

    def encode(self) -> bytes:
        return b"".join(getattr(self, f.name).encode() for f in fields(self))


SIDES = {
    "g": "both", "h": "both",
    "g0": "left", "g1": "left", "g2": "left", "g3": "left",
    "h0": "left", "h1": "left", "h2": "left", "h3": "left", "h4": "left",
}


def derive_generators(rng=None, tag: bytes = b"default") -> Generators:
    with group.uncounted():
        g = group.generator()
        h = g ** group.random_scalar(rng)
        named = {n: group.hash_to_left(tag + b"/" + n.encode()) for n in SIDES if SIDES[n] == "left"}
        return Generators(
            g=g, h=h, **named,
            G=group.pair(g, g),
            H=group.pair(h, h),
            calG=group.hash_to_target(tag + b"/calG"),
        )
