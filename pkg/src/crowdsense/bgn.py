"""Boneh-Goh-Nissim encryption for circle-containment matching.

Composite-order group: points of order n = q1*q2 on the supersingular curve
y^2 = x^3 + x over F_q with q = 4*c*n - 1 prime (q = 3 mod 4). The
symmetric pairing is the reduced Tate pairing composed with the distortion
map (x, y) -> (-x, i*y), landing in the order-n subgroup of F_{q^2}*.

Ciphertexts are C = l^m * l1^r with l1 = l^q2 of order q1. Raising to q1
strips the blinding, leaving a small discrete log solved by baby-step
giant-step. The test profile (32-bit primes) is for correctness only and
offers no security.
"""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import gmpy2
from gmpy2 import mpz

Point = Optional[Tuple[mpz, mpz]]  # None is the point at infinity
Fq2 = Tuple[mpz, mpz]  # a + b*i


class BgnError(Exception):
    pass


class DlogOutOfBound(BgnError):
    pass


# ------------------------------------------------------------- F_q^2 arithmetic


def _f2_mul(a: Fq2, b: Fq2, q) -> Fq2:
    t0 = a[0] * b[0]
    t1 = a[1] * b[1]
    return ((t0 - t1) % q, ((a[0] + a[1]) * (b[0] + b[1]) - t0 - t1) % q)


def _f2_sqr(a: Fq2, q) -> Fq2:
    return ((a[0] + a[1]) * (a[0] - a[1]) % q, 2 * a[0] * a[1] % q)


def _f2_inv(a: Fq2, q) -> Fq2:
    d = gmpy2.invert(a[0] * a[0] + a[1] * a[1], q)
    return (a[0] * d % q, -a[1] * d % q)


def _f2_pow(a: Fq2, e: int, q) -> Fq2:
    if e < 0:
        a, e = _f2_inv(a, q), -e
    r: Fq2 = (mpz(1), mpz(0))
    for bit in bin(e)[2:]:
        r = _f2_sqr(r, q)
        if bit == "1":
            r = _f2_mul(r, a, q)
    return r


# ---------------------------------------------------------------- curve points


def _add(P: Point, Q: Point, q) -> Point:
    if P is None:
        return Q
    if Q is None:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % q == 0:
            return None
        lam = (3 * x1 * x1 + 1) * gmpy2.invert(2 * y1, q) % q
    else:
        lam = (y2 - y1) * gmpy2.invert(x2 - x1, q) % q
    x3 = (lam * lam - x1 - x2) % q
    return (x3, (lam * (x1 - x3) - y1) % q)


def _neg(P: Point, q) -> Point:
    return None if P is None else (P[0], (-P[1]) % q)


def _mul(P: Point, k: int, q) -> Point:
    if k < 0:
        P, k = _neg(P, q), -k
    R: Point = None
    for bit in bin(k)[2:] if k else "":
        R = _add(R, R, q)
        if bit == "1":
            R = _add(R, P, q)
    return R


def _tate(P: Point, Q: Point, n: int, q) -> Fq2:
    """Reduced Tate pairing e(P, distort(Q)) of order-n points."""
    if P is None or Q is None:
        return (mpz(1), mpz(0))
    xq, yq = Q
    f: Fq2 = (mpz(1), mpz(0))
    V = P
    bits = bin(n)[3:]
    for k, bit in enumerate(bits):
        # tangent at V evaluated at (-xq, i*yq); vertical lines lie in F_q and vanish
        xv, yv = V
        if yv == 0:
            V = None
        else:
            lam = (3 * xv * xv + 1) * gmpy2.invert(2 * yv, q) % q
            f = _f2_mul(_f2_sqr(f, q), ((lam * (xq + xv) - yv) % q, yq), q)
            V = _add(V, V, q)
        if bit == "1":
            if V is None:
                V = P
                continue
            xv, yv = V
            xp, yp = P
            if xv == xp:
                V = _add(V, P, q)  # vertical chord, value in F_q
            else:
                lam = (yp - yv) * gmpy2.invert(xp - xv, q) % q
                f = _f2_mul(f, ((lam * (xq + xv) - yv) % q, yq), q)
                V = _add(V, P, q)
        if V is None and k != len(bits) - 1:
            raise BgnError("point order smaller than n")
    # final exponentiation (q^2 - 1)/n = (q - 1) * (q + 1)/n; Frobenius is conjugation
    f = _f2_mul((f[0], (-f[1]) % q), _f2_inv(f, q), q)
    return _f2_pow(f, (q + 1) // n, q)


# ---------------------------------------------------------------- parameters


@dataclass(frozen=True)
class BgnPublic:
    q: int
    n: int
    l: Point
    l1: Point
    M_max: int

    @property
    def coord_bytes(self) -> int:
        return (int(self.q).bit_length() + 7) // 8


@dataclass
class BgnParams:
    public: BgnPublic
    q1: int
    q2: int
    bound: int  # largest target-level plaintext, 2 * M_max^2
    _target_table: Dict = field(default_factory=dict, repr=False)
    _source_table: Dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class BgnCiphertext:
    level: str  # "source" or "target"
    value: object

    def encode(self, pub: BgnPublic) -> bytes:
        w = pub.coord_bytes
        if self.level == "source":
            if self.value is None:
                return b"\x00" + b"\x00" * (2 * w)
            x, y = self.value
            return b"\x01" + int(x).to_bytes(w, "big") + int(y).to_bytes(w, "big")
        a, b = self.value
        return b"\x02" + int(a).to_bytes(w, "big") + int(b).to_bytes(w, "big")

    @classmethod
    def decode(cls, data: bytes) -> "BgnCiphertext":
        if len(data) < 3 or len(data) % 2 != 1 or data[0] not in (0, 1, 2):
            raise BgnError("malformed ciphertext encoding")
        w = (len(data) - 1) // 2
        x, y = mpz(int.from_bytes(data[1:1 + w], "big")), mpz(int.from_bytes(data[1 + w:], "big"))
        if data[0] == 0:
            if x or y:
                raise BgnError("malformed point at infinity")
            return cls("source", None)
        return cls("source" if data[0] == 1 else "target", (x, y))


def _random_prime(bits: int, rng) -> int:
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if gmpy2.is_prime(cand, 40):
            return int(cand)


def bgn_setup(bits: int = 32, M_max: int = 2 ** 10, rng=None) -> BgnParams:
    if bits < 8:
        raise ValueError("prime size too small")
    rng = rng or secrets.SystemRandom()
    while True:
        q1, q2 = _random_prime(bits, rng), _random_prime(bits, rng)
        if q1 != q2:
            break
    n = q1 * q2
    c = 1
    while not gmpy2.is_prime(4 * c * n - 1, 40):
        c += 1
    q = mpz(4 * c * n - 1)
    cof = 4 * c
    while True:
        x = mpz(rng.randrange(1, q))
        rhs = (x * x * x + x) % q
        if gmpy2.legendre(rhs, q) != 1:
            continue
        y = gmpy2.powmod(rhs, (q + 1) // 4, q)
        l = _mul((x, y), cof, q)
        if l is None or _mul(l, q1, q) is None or _mul(l, q2, q) is None:
            continue
        break
    pub = BgnPublic(int(q), n, l, _mul(l, q2, q), M_max)
    return BgnParams(pub, q1, q2, 2 * M_max * M_max)


# ----------------------------------------------------------------- operations


def bgn_encrypt(value: int, pub: BgnPublic, rng=None) -> BgnCiphertext:
    if not 0 <= value <= pub.M_max:
        raise BgnError("plaintext %d outside [0, %d]" % (value, pub.M_max))
    rng = rng or secrets.SystemRandom()
    r = rng.randrange(0, pub.n)
    return BgnCiphertext("source", _add(_mul(pub.l, value, pub.q), _mul(pub.l1, r, pub.q), pub.q))


def bgn_add(a: BgnCiphertext, b: BgnCiphertext, pub: BgnPublic) -> BgnCiphertext:
    if a.level != b.level:
        raise BgnError("level mismatch")
    if a.level == "source":
        return BgnCiphertext("source", _add(a.value, b.value, pub.q))
    return BgnCiphertext("target", _f2_mul(a.value, b.value, pub.q))


def bgn_pair(a: BgnCiphertext, b: BgnCiphertext, pub: BgnPublic) -> BgnCiphertext:
    if a.level != "source" or b.level != "source":
        raise BgnError("only source-level ciphertexts can be multiplied")
    return BgnCiphertext("target", _tate(a.value, b.value, pub.n, pub.q))


def bgn_distance_ct(Cx, Cy, Ux, Uy, pub: BgnPublic) -> BgnCiphertext:
    """Ciphertext of (cx - ux)^2 + (cy - uy)^2."""
    for c in (Cx, Cy, Ux, Uy):
        if c.level != "source":
            raise BgnError("distance needs source-level ciphertexts")
    q = pub.q
    dx = BgnCiphertext("source", _add(Cx.value, _neg(Ux.value, q), q))
    dy = BgnCiphertext("source", _add(Cy.value, _neg(Uy.value, q), q))
    return bgn_add(bgn_pair(dx, dx, pub), bgn_pair(dy, dy, pub), pub)


def _bsgs(h, identity, base, mul, inverse, m: int, bound: int, cache: Dict) -> int:
    """Smallest x in [0, bound] with base^x = h, written multiplicatively."""
    if cache.get("m") != m:
        table = {}
        cur = identity
        for j in range(m):
            table.setdefault(cur, j)
            cur = mul(cur, base)
        cache.update(m=m, table=table, giant=inverse(cur))
    table, giant = cache["table"], cache["giant"]
    cur = h
    for i in range(m + 1):
        j = table.get(cur)
        if j is not None and i * m + j <= bound:
            return i * m + j
        cur = mul(cur, giant)
    raise DlogOutOfBound("plaintext exceeds the configured bound")


def _target_base(params: BgnParams) -> Fq2:
    pub = params.public
    return _f2_pow(_tate(pub.l, pub.l, pub.n, pub.q), params.q1, pub.q)


def bgn_decrypt(c: BgnCiphertext, params: BgnParams) -> int:
    pub = params.public
    q = pub.q
    if c.level == "source":
        bound = pub.M_max
        cache = params._source_table
        base = cache.get("base") or _mul(pub.l, params.q1, q)
        cache["base"] = base
        return _bsgs(_mul(c.value, params.q1, q), None, base, lambda a, b: _add(a, b, q),
                     lambda a: _neg(a, q), math.isqrt(bound) + 1, bound, cache)
    bound = params.bound
    cache = params._target_table
    base = cache.get("base") or _target_base(params)
    cache["base"] = base
    return _bsgs(_f2_pow(c.value, params.q1, q), (mpz(1), mpz(0)), base,
                 lambda a, b: _f2_mul(a, b, q), lambda a: _f2_inv(a, q),
                 math.isqrt(bound) + 1, bound, cache)


def bgn_decide(Z: BgnCiphertext, C_R: BgnCiphertext, params: BgnParams) -> bool:
    """Strict containment test d^2 < R^2."""
    if Z.level != "target" or C_R.level != "source":
        raise BgnError("expected a target-level distance and a source-level radius")
    d2 = bgn_decrypt(Z, params)
    R = bgn_decrypt(C_R, params)
    return d2 < R * R
