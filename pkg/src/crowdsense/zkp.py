"""Non-interactive sigma proofs for registration, credential showing and reporting.

Every proof follows one convention: commitments are built from fresh
randomizers rho, responses are z = rho - c * w, and the verifier rebuilds
each commitment as Statement^c * prod base^z. The challenge hashes the
statement, the auxiliary commitments, the rebuilt commitments and a digest
of the caller's context (session nonce and anything else the caller wants
bound to the proof).

Proof kinds
    PK1   C = g1^s' g2^a,  C' = h1^t' h2^a,  A_hat = g^a
    PK2   knowledge of an access credential (A, e, s) on (a, I) under T
    PK3   same relation as PK2, shown by a user asking for tasks
    SPK   credit credential (B, f, t) on (a, I, P) under an anchor key,
          C' opens to (t', a, I, P), P - Q lies in [1, V], Y = H^v and
          Z = G^a calG^(X v)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

from . import group
from .group import ORDER, Source, Target, pair
from .params import Generators

KIND_CODES = {"PK1": 1, "PK2": 2, "PK3": 3, "SPK": 4}
_KIND_NAMES = {v: k for k, v in KIND_CODES.items()}
AUX_COUNT = {"PK1": 0, "PK2": 2, "PK3": 2, "SPK": 4}
RESPONSE_COUNT = {"PK1": 3, "PK2": 8, "PK3": 8, "SPK": 15}


class ProofError(Exception):
    """Raised when a prover is asked to prove something false."""


class RangeError(ProofError):
    pass


def identity_scalar(identity: bytes) -> int:
    """Map an identity string into the exponent group."""
    return group.hash_to_scalar(b"identity", [identity])


def context_digest(context: bytes) -> bytes:
    return hashlib.sha256(context).digest()


# ----------------------------------------------------------------- transcript


@dataclass(frozen=True)
class ProofTranscript:
    kind: str
    aux: Tuple[Source, ...]
    challenge: int
    responses: Tuple[int, ...]
    context_digest: bytes

    def encode(self) -> bytes:
        out = bytearray([KIND_CODES[self.kind], len(self.aux)])
        for b in self.aux:
            out += b.encode()
        out += group.encode_scalar(self.challenge)
        out.append(len(self.responses))
        for z in self.responses:
            out += group.encode_scalar(z)
        out += self.context_digest
        return bytes(out)

    @classmethod
    def decode(cls, data: bytes) -> "ProofTranscript":
        try:
            kind = _KIND_NAMES[data[0]]
            n_aux = data[1]
            pos = 2
            aux = []
            for _ in range(n_aux):
                aux.append(group.decode_source(data[pos:pos + group.LEFT_BYTES], "left"))
                pos += group.LEFT_BYTES
            c = group.decode_scalar(data[pos:pos + group.SCALAR_BYTES])
            pos += group.SCALAR_BYTES
            n_resp = data[pos]
            pos += 1
            zs = []
            for _ in range(n_resp):
                zs.append(group.decode_scalar(data[pos:pos + group.SCALAR_BYTES]))
                pos += group.SCALAR_BYTES
            digest = data[pos:pos + 32]
            if len(digest) != 32 or pos + 32 != len(data):
                raise group.DecodeError("transcript length mismatch")
        except (IndexError, KeyError) as exc:
            raise group.DecodeError("truncated or unknown transcript") from exc
        return cls(kind, tuple(aux), c, tuple(zs), digest)

    def encoded_size(self) -> int:
        return transcript_size(self.kind)


def transcript_size(kind: str) -> int:
    return (
        2 + AUX_COUNT[kind] * group.LEFT_BYTES + group.SCALAR_BYTES
        + 1 + RESPONSE_COUNT[kind] * group.SCALAR_BYTES + 32
    )


def _challenge(kind: str, statement: Sequence[bytes], aux: Sequence[Source],
               commitments: Sequence, digest: bytes) -> int:
    parts = [s for s in statement]
    parts += [b.encode() for b in aux]
    parts += [t.encode() for t in commitments]
    parts.append(digest)
    return group.hash_to_scalar(b"fiat-shamir/" + kind.encode(), parts)


def _well_formed(tr: ProofTranscript, kind: str, digest: bytes) -> bool:
    return (
        tr.kind == kind
        and len(tr.aux) == AUX_COUNT[kind]
        and len(tr.responses) == RESPONSE_COUNT[kind]
        and tr.context_digest == digest
        and all(b.left is not None for b in tr.aux)
    )


def _resp(rho: int, c: int, w: int) -> int:
    return (rho - c * w) % ORDER


# ---------------------------------------------------------------- range proof


@dataclass(frozen=True)
class RangePublic:
    """Public digit signatures phi_1..phi_V (digit 0 is never published)."""

    V: int
    y: Source
    y1: Source
    y2: Source
    eta: Source
    digits: Tuple[Source, ...]  # digits[i] signs the value i + 1

    def phi(self, d: int) -> Source:
        if not 1 <= d <= self.V:
            raise RangeError("difference %d is outside [1, %d]" % (d, self.V))
        return self.digits[d - 1]

    def encode(self) -> bytes:
        head = self.V.to_bytes(4, "big") + self.y.encode() + self.y1.encode() + self.y2.encode() + self.eta.encode()
        return head + b"".join(d.encode() for d in self.digits)


@dataclass(frozen=True)
class RangeParams:
    V: int
    y: Source
    y1: Source
    y2: Source
    eta: Source
    phis: Tuple[Source, ...]  # phis[i] = y^(1/(i + phi)) for i in [0, V]
    phi_secret: int

    def public(self) -> RangePublic:
        return RangePublic(self.V, self.y, self.y1, self.y2, self.eta, self.phis[1:])


def gen_range_params(V: int, rng=None, tag: bytes = b"range") -> RangeParams:
    if V < 0:
        raise ValueError("V must be non-negative")
    with group.uncounted():
        y = group.generator() ** group.random_scalar(rng)
        y1 = group.hash_to_left(tag + b"/y1")
        y2 = group.hash_to_left(tag + b"/y2")
        while True:
            phi = group.random_scalar(rng)
            if all((i + phi) % ORDER for i in range(V + 1)):
                break
        eta = y.only("right") ** phi
        yl = y.only("left")
        phis = tuple(yl ** group.inv(i + phi) for i in range(V + 1))
    return RangeParams(V, y, y1, y2, eta, phis, phi)


def check_digit(rp, value: int, sig: Source) -> bool:
    """pair(phi_i, eta * y^i) == pair(y, y)."""
    return pair(sig, rp.eta * rp.y.only("right") ** value) == pair(rp.y, rp.y)


# --------------------------------------------------------------- pairing table


@dataclass(frozen=True)
class PairingTable:
    E0: Target
    E1: Target
    E2: Target
    E3: Target
    E4: Target  # pair(g2, S), kept for completeness of the table
    E4T: Target  # pair(g2, T), the term the credential proof needs
    F0: Target
    F1: Target
    F2: Target
    F3: Target
    F4: Target
    K: Target
    K0: Target  # pair(y1, T_h)
    K0p: Target  # pair(y1, S)
    K1: Target
    K2: Target
    K3: Target

    def anchor_term(self, anchor: str) -> Target:
        return {"ta": self.K0, "provider": self.K0p}[anchor]


def build_pairing_table(gens: Generators, T: Source, T_h: Source, S: Source, rp) -> PairingTable:
    g, h = gens.g, gens.h
    with group.uncounted():
        return PairingTable(
            E0=pair(gens.g0, g), E1=pair(gens.g1, g), E2=pair(gens.g2, g), E3=pair(gens.g3, g),
            E4=pair(gens.g2, S), E4T=pair(gens.g2, T),
            F0=pair(gens.h0, h), F1=pair(gens.h1, h), F2=pair(gens.h2, h),
            F3=pair(gens.h3, h), F4=pair(gens.h4, h),
            K=pair(rp.y, rp.y), K0=pair(rp.y1, T_h), K0p=pair(rp.y1, S),
            K1=pair(rp.y1, h), K2=pair(rp.y1, rp.y), K3=pair(rp.y1, rp.eta),
        )


# ------------------------------------------------------------------------ PK1


def prove_pk1(witness, statement, gens: Generators, context: bytes, rng=None) -> ProofTranscript:
    """witness = (s', t', a); statement = (C, C', A_hat)."""
    s1, t1, a = witness
    C, Cp, Ahat = statement
    with group.uncounted():
        ok = (C == gens.g1 ** s1 * gens.g2 ** a and Cp == gens.h1 ** t1 * gens.h2 ** a
              and Ahat == gens.g.only("left") ** a)
    if not ok:
        raise ProofError("PK1 witness does not open the statement")
    r = [group.random_scalar(rng) for _ in range(3)]
    T1 = gens.g1 ** r[0] * gens.g2 ** r[2]
    T2 = gens.h1 ** r[1] * gens.h2 ** r[2]
    T3 = gens.g.only("left") ** r[2]
    digest = context_digest(context)
    c = _challenge("PK1", [x.encode() for x in statement], (), (T1, T2, T3), digest)
    zs = (_resp(r[0], c, s1), _resp(r[1], c, t1), _resp(r[2], c, a))
    return ProofTranscript("PK1", (), c, zs, digest)


def verify_pk1(statement, transcript: ProofTranscript, gens: Generators, context: bytes) -> bool:
    digest = context_digest(context)
    if not _well_formed(transcript, "PK1", digest):
        return False
    C, Cp, Ahat = statement
    c = transcript.challenge
    z_s, z_t, z_a = transcript.responses
    T1 = C ** c * gens.g1 ** z_s * gens.g2 ** z_a
    T2 = Cp ** c * gens.h1 ** z_t * gens.h2 ** z_a
    T3 = Ahat ** c * gens.g.only("left") ** z_a
    return c == _challenge("PK1", [x.encode() for x in statement], (), (T1, T2, T3), digest)


# ----------------------------------------------------------- credential proof


def prove_credential(witness, key: Source, gens: Generators, table: PairingTable,
                     context: bytes, rng=None, kind: str = "PK2") -> ProofTranscript:
    """witness = (A, e, s, a, I) with I already mapped to a scalar."""
    A, e, s, a, I = witness
    with group.uncounted():
        lhs = pair(A, key * gens.g ** e)
        rhs = pair(gens.g0 * gens.g1 ** s * gens.g2 ** a * gens.g3 ** I, gens.g)
    if lhs != rhs:
        raise ProofError("access credential does not verify")
    r1, r2 = group.random_scalar(rng), group.random_scalar(rng)
    B1 = gens.g1 ** r1 * gens.g2 ** r2
    B2 = A * gens.g2 ** r1
    d1, d2 = r1 * e % ORDER, r2 * e % ORDER
    # randomizers for r1, r2, e, d1, d2, s, a, I
    p = [group.random_scalar(rng) for _ in range(8)]
    T1 = gens.g1 ** p[0] * gens.g2 ** p[1]
    T2 = B1 ** (-p[2]) * gens.g1 ** p[3] * gens.g2 ** p[4]
    T3 = (pair(B2, gens.g) ** (-p[2]) * table.E1 ** p[5] * table.E2 ** p[6]
          * table.E3 ** p[7] * table.E4T ** p[0] * table.E2 ** p[3])
    digest = context_digest(context)
    c = _challenge(kind, [key.encode()], (B1, B2), (T1, T2, T3), digest)
    w = (r1, r2, e, d1, d2, s, a, I)
    return ProofTranscript(kind, (B1, B2), c, tuple(_resp(pi, c, wi) for pi, wi in zip(p, w)), digest)


def verify_credential(key: Source, transcript: ProofTranscript, gens: Generators,
                      table: PairingTable, context: bytes, kind: str = "PK2") -> bool:
    digest = context_digest(context)
    if not _well_formed(transcript, kind, digest):
        return False
    B1, B2 = transcript.aux
    c = transcript.challenge
    z_r1, z_r2, z_e, z_d1, z_d2, z_s, z_a, z_I = transcript.responses
    T1 = B1 ** c * gens.g1 ** z_r1 * gens.g2 ** z_r2
    T2 = B1 ** (-z_e) * gens.g1 ** z_d1 * gens.g2 ** z_d2
    T3 = ((pair(B2, key) / table.E0) ** c * pair(B2, gens.g) ** (-z_e) * table.E1 ** z_s
          * table.E2 ** z_a * table.E3 ** z_I * table.E4T ** z_r1 * table.E2 ** z_d1)
    return c == _challenge(kind, [key.encode()], (B1, B2), (T1, T2, T3), digest)


# ------------------------------------------------------------------------ SPK

SPK_RESPONSES = ("r1", "r2", "r3", "r4", "f", "t", "t1", "a", "I", "P", "v", "w1", "w2", "w3", "w4")


def _spk_statement(statement, anchor_key: Source, rp: RangePublic) -> List[bytes]:
    Cp, Q, X, Y, Z, num = statement
    return [
        Cp.encode(), group.encode_scalar(Q), group.encode_scalar(X), Y.encode(), Z.encode(),
        num.to_bytes(8, "big"), anchor_key.encode(), rp.eta.encode(),
    ]


def prove_spk(witness, statement, rp: RangePublic, gens: Generators, table: PairingTable,
              anchor: str, anchor_key: Source, context: bytes, rng=None,
              _commitment_hook: Optional[Callable[[list], list]] = None) -> ProofTranscript:
    """witness = (B, f, t, t', a, I, P, v); statement = (C', Q, X, Y, Z, num).

    ``anchor`` names the key the credit credential is signed under ("ta" for
    the authority key h^alpha, "provider" for S) and ``anchor_key`` is that key.
    """
    B, f, t, t1, a, I, P, v = witness
    Cp, Q, X, Y, Z, num = statement
    if P <= Q:
        raise RangeError("credit %d does not exceed threshold %d" % (P, Q))
    phi = rp.phi(P - Q)
    with group.uncounted():
        consistent = (
            Cp == gens.h1 ** t1 * gens.h2 ** a * gens.h3 ** I * gens.h4 ** P
            and pair(B, anchor_key * gens.h ** f)
            == pair(gens.h0 * gens.h1 ** t * gens.h2 ** a * gens.h3 ** I * gens.h4 ** P, gens.h)
            and Y == gens.H ** v
            and Z == pair(gens.g.only("left") ** a, gens.g) * gens.calG ** (X * v)
        )
    if not consistent:
        raise ProofError("SPK witness does not match the statement")

    y, y1, y2 = rp.y, rp.y1, rp.y2
    r1, r2, r3, r4 = (group.random_scalar(rng) for _ in range(4))
    d = (P - Q) % ORDER
    B1 = y1 ** r1 * y2 ** r2
    B2 = B * y1 ** r2
    B3 = y1 ** r3 * y2 ** r4
    B4 = phi * y1 ** r4
    w = dict(r1=r1, r2=r2, r3=r3, r4=r4, f=f, t=t, t1=t1, a=a, I=I, P=P, v=v,
             w1=f * r1 % ORDER, w2=f * r2 % ORDER, w3=d * r3 % ORDER, w4=d * r4 % ORDER)
    p = {k: group.random_scalar(rng) for k in SPK_RESPONSES}
    K0 = table.anchor_term(anchor)

    T1 = gens.h1 ** p["t1"] * gens.h2 ** p["a"] * gens.h3 ** p["I"] * gens.h4 ** p["P"]
    T2 = y1 ** p["r1"] * y2 ** p["r2"]
    T3 = B1 ** (-p["f"]) * y1 ** p["w1"] * y2 ** p["w2"]
    T4 = (K0 ** p["r2"] * table.K1 ** p["w2"] * table.F1 ** p["t"] * table.F2 ** p["a"]
          * table.F3 ** p["I"] * table.F4 ** p["P"] * pair(B2, gens.h) ** (-p["f"]))
    T5 = y1 ** p["r3"] * y2 ** p["r4"]
    T6 = B3 ** (-p["P"]) * y1 ** p["w3"] * y2 ** p["w4"]
    T7 = table.K2 ** p["w4"] * table.K3 ** p["r4"] * pair(B4, y) ** (-p["P"])
    T8 = gens.H ** p["v"]
    T9 = gens.G ** p["a"] * gens.calG ** (X * p["v"])
    commitments = [T1, T2, T3, T4, T5, T6, T7, T8, T9]
    if _commitment_hook is not None:
        commitments = _commitment_hook(commitments)

    aux = (B1, B2, B3, B4)
    digest = context_digest(context)
    c = _challenge("SPK", _spk_statement(statement, anchor_key, rp), aux, commitments, digest)
    zs = tuple(_resp(p[k], c, w[k]) for k in SPK_RESPONSES)
    return ProofTranscript("SPK", aux, c, zs, digest)


def verify_spk(statement, rp: RangePublic, transcript: ProofTranscript, gens: Generators,
               table: PairingTable, anchor: str, anchor_key: Source, context: bytes) -> bool:
    digest = context_digest(context)
    if not _well_formed(transcript, "SPK", digest):
        return False
    Cp, Q, X, Y, Z, num = statement
    B1, B2, B3, B4 = transcript.aux
    c = transcript.challenge
    z = dict(zip(SPK_RESPONSES, transcript.responses))
    y, y1, y2 = rp.y, rp.y1, rp.y2
    K0 = table.anchor_term(anchor)

    T1 = Cp ** c * gens.h1 ** z["t1"] * gens.h2 ** z["a"] * gens.h3 ** z["I"] * gens.h4 ** z["P"]
    T2 = B1 ** c * y1 ** z["r1"] * y2 ** z["r2"]
    T3 = B1 ** (-z["f"]) * y1 ** z["w1"] * y2 ** z["w2"]
    T4 = ((pair(B2, anchor_key) / table.F0) ** c * K0 ** z["r2"] * table.K1 ** z["w2"]
          * table.F1 ** z["t"] * table.F2 ** z["a"] * table.F3 ** z["I"] * table.F4 ** z["P"]
          * pair(B2, gens.h) ** (-z["f"]))
    T5 = B3 ** c * y1 ** z["r3"] * y2 ** z["r4"]
    T6 = B3 ** (-Q * c) * B3 ** (-z["P"]) * y1 ** z["w3"] * y2 ** z["w4"]
    T7 = ((pair(B4, rp.eta * y.only("right") ** (-Q)) / table.K) ** c * table.K2 ** z["w4"]
          * table.K3 ** z["r4"] * pair(B4, y) ** (-z["P"]))
    T8 = Y ** c * gens.H ** z["v"]
    T9 = Z ** c * gens.G ** z["a"] * gens.calG ** (X * z["v"])
    commitments = (T1, T2, T3, T4, T5, T6, T7, T8, T9)
    return c == _challenge("SPK", _spk_statement(statement, anchor_key, rp), transcript.aux,
                           commitments, digest)
