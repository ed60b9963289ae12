"""Service setup, parameter persistence and the authority's record store."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from .. import bgn, group
from ..bbs import BbsKey, BbsPublicKey
from ..geo import ONTARIO
from ..group import Source, Target, pair
from ..params import SIDES, Generators, derive_generators
from ..zkp import (PairingTable, RangeParams, RangePublic, build_pairing_table,
                   gen_range_params)

FORMAT_VERSION = 1
DEFAULT_V = 256

ANCHORS = {0: "ta", 1: "provider"}
ANCHOR_CODES = {v: k for k, v in ANCHORS.items()}


class IntegrityError(Exception):
    pass


class DuplicateIdentity(Exception):
    pass


class UnknownTag(Exception):
    """No stored record matches a tracing tag."""


@dataclass(frozen=True)
class PublicParams:
    gens: Generators
    T: Source  # g^alpha
    T_h: Source  # h^alpha, anchors credit credentials issued by the authority
    S: Source  # h^beta
    range: RangePublic
    table: PairingTable
    grid: Tuple[int, int]

    def access_key(self) -> BbsPublicKey:
        g = self.gens
        return BbsPublicKey(self.T, g.g.only("right"), g.g0, (g.g1, g.g2, g.g3))

    def anchor_key(self, anchor: str) -> Source:
        return {"ta": self.T_h, "provider": self.S}[anchor]

    def credit_key(self, anchor: str) -> BbsPublicKey:
        g = self.gens
        return BbsPublicKey(self.anchor_key(anchor), g.h.only("right"), g.h0, (g.h1, g.h2, g.h3, g.h4))


@dataclass(frozen=True)
class ServiceSetup:
    public: PublicParams
    alpha: int
    beta: int
    range_params: RangeParams

    def ta_access_key(self) -> BbsKey:
        return BbsKey(self.alpha, self.public.access_key())

    def ta_credit_key(self) -> BbsKey:
        return BbsKey(self.alpha, self.public.credit_key("ta"))

    def provider_credit_key(self) -> BbsKey:
        return BbsKey(self.beta, self.public.credit_key("provider"))


def service_setup(rng=None, V: int = DEFAULT_V, grid: Optional[Tuple[int, int]] = None,
                  tag: bytes = b"default") -> ServiceSetup:
    grid = tuple(grid or (ONTARIO.rows, ONTARIO.cols))
    if len(grid) != 2 or min(grid) < 1:
        raise ValueError("grid needs positive dimensions")
    if V < 1:
        raise ValueError("V must be at least 1")
    gens = derive_generators(rng, tag)
    alpha, beta = group.random_scalar(rng), group.random_scalar(rng)
    rp = gen_range_params(V, rng, tag + b"/range")
    with group.uncounted():
        T = gens.g.only("right") ** alpha
        T_h = gens.h.only("right") ** alpha
        S = gens.h.only("right") ** beta
    table = build_pairing_table(gens, T, T_h, S, rp)
    return ServiceSetup(PublicParams(gens, T, T_h, S, rp.public(), table, tuple(grid)), alpha, beta, rp)


# ---------------------------------------------------------------- persistence

_RANGE_FIELDS = ("y", "y1", "y2", "eta")
_RANGE_SIDES = {"y": "both", "y1": "left", "y2": "left", "eta": "right"}


def _seal_doc(kind: str, body: dict) -> str:
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    doc = {"kind": kind, "version": FORMAT_VERSION, "body": body,
           "sha256": hashlib.sha256(canon.encode()).hexdigest()}
    return json.dumps(doc, indent=1, sort_keys=True)


def _open_doc(text: str, kind: str) -> dict:
    try:
        doc = json.loads(text)
        body = doc["body"]
        canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
        ok = (doc["kind"] == kind and doc["version"] == FORMAT_VERSION
              and doc["sha256"] == hashlib.sha256(canon.encode()).hexdigest())
    except (ValueError, KeyError, TypeError) as exc:
        raise IntegrityError("unreadable %s file" % kind) from exc
    if not ok:
        raise IntegrityError("%s file failed its integrity check" % kind)
    return body


def public_to_dict(pp: PublicParams) -> dict:
    gens = {f.name: getattr(pp.gens, f.name).encode().hex() for f in fields(pp.gens)}
    rng_part = {k: getattr(pp.range, k).encode().hex() for k in _RANGE_FIELDS}
    rng_part["V"] = pp.range.V
    rng_part["digits"] = [d.encode().hex() for d in pp.range.digits]
    table = {f.name: getattr(pp.table, f.name).encode().hex() for f in fields(pp.table)}
    return {"gens": gens, "T": pp.T.encode().hex(), "T_h": pp.T_h.encode().hex(),
            "S": pp.S.encode().hex(), "range": rng_part, "table": table, "grid": list(pp.grid)}


def public_from_dict(body: dict) -> PublicParams:
    try:
        src = lambda hx, side: group.decode_source(bytes.fromhex(hx), side)
        gd = body["gens"]
        kw = {n: src(gd[n], SIDES[n]) for n in SIDES}
        kw.update({n: group.decode_target(bytes.fromhex(gd[n])) for n in ("G", "H", "calG")})
        gens = Generators(**kw)
        rd = body["range"]
        rp = RangePublic(rd["V"], *(src(rd[k], _RANGE_SIDES[k]) for k in _RANGE_FIELDS),
                         tuple(src(d, "left") for d in rd["digits"]))
        T, T_h, S = (src(body[k], "right") for k in ("T", "T_h", "S"))
        table = PairingTable(**{k: group.decode_target(bytes.fromhex(v)) for k, v in body["table"].items()})
        grid = tuple(body["grid"])
    except (KeyError, TypeError, ValueError, group.GroupError) as exc:
        raise IntegrityError("malformed public parameters") from exc
    with group.uncounted():
        if gens.G != pair(gens.g, gens.g) or gens.H != pair(gens.h, gens.h):
            raise IntegrityError("G or H does not match the generators")
        if build_pairing_table(gens, T, T_h, S, rp) != table:
            raise IntegrityError("pairing table does not match its definition")
        if len(rp.digits) != rp.V:
            raise IntegrityError("range digit count mismatch")
    return PublicParams(gens, T, T_h, S, rp, table, grid)


def save_setup(setup: ServiceSetup, out_dir) -> Dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"public": out / "public.json", "secrets": out / "secrets.json"}
    paths["public"].write_text(_seal_doc("public", public_to_dict(setup.public)))
    secrets_body = {"alpha": setup.alpha, "beta": setup.beta, "phi": setup.range_params.phi_secret}
    paths["secrets"].write_text(_seal_doc("secrets", {k: str(v) for k, v in secrets_body.items()}))
    os.chmod(paths["secrets"], 0o600)
    return paths


def load_public(path) -> PublicParams:
    return public_from_dict(_open_doc(Path(path).read_text(), "public"))


def load_setup(out_dir) -> ServiceSetup:
    out = Path(out_dir)
    pp = load_public(out / "public.json")
    sec = {k: int(v) for k, v in _open_doc((out / "secrets.json").read_text(), "secrets").items()}
    alpha, beta, phi = sec["alpha"], sec["beta"], sec["phi"]
    rp = pp.range
    with group.uncounted():
        if pp.T != pp.gens.g.only("right") ** alpha or pp.S != pp.gens.h.only("right") ** beta:
            raise IntegrityError("secret keys do not match the public keys")
        if rp.eta != rp.y.only("right") ** phi:
            raise IntegrityError("range secret does not match eta")
        phis = (rp.y.only("left") ** group.inv(phi),) + rp.digits
    return ServiceSetup(pp, alpha, beta, RangeParams(rp.V, rp.y, rp.y1, rp.y2, rp.eta, phis, phi))


def save_circle(params: bgn.BgnParams, out_dir) -> Dict[str, Path]:
    """Persist circle-matching keys: public part and the factorisation of n."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pub = params.public
    body = {"q": str(pub.q), "n": str(pub.n), "M_max": pub.M_max,
            "l": [str(c) for c in pub.l], "l1": [str(c) for c in pub.l1]}
    paths = {"circle": out / "circle.json", "circle_secrets": out / "circle_secrets.json"}
    paths["circle"].write_text(_seal_doc("circle", body))
    paths["circle_secrets"].write_text(_seal_doc("circle_secrets", {"q1": str(params.q1), "q2": str(params.q2)}))
    os.chmod(paths["circle_secrets"], 0o600)
    return paths


def load_circle(out_dir) -> bgn.BgnParams:
    out = Path(out_dir)
    body = _open_doc((out / "circle.json").read_text(), "circle")
    sec = _open_doc((out / "circle_secrets.json").read_text(), "circle_secrets")
    try:
        q, n, M = int(body["q"]), int(body["n"]), int(body["M_max"])
        l, l1 = (tuple(bgn.mpz(int(c)) for c in body[k]) for k in ("l", "l1"))
        q1, q2 = int(sec["q1"]), int(sec["q2"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError("malformed circle parameters") from exc
    if q1 * q2 != n or bgn._mul(l, n, q) is not None or bgn._mul(l, q2, q) != l1:
        raise IntegrityError("circle parameters are inconsistent")
    return bgn.BgnParams(bgn.BgnPublic(q, n, l, l1, M), q1, q2, 2 * M * M)


# ---------------------------------------------------------------- record store


@dataclass(frozen=True)
class TaRecord:
    identity: bytes
    P0: int
    Ahat: Source


class TaRecordStore:
    """The authority's (I, P0, A_hat) table, optionally mirrored to an append-only file.

    Each record also keeps pair(A_hat, g), computed once at registration,
    so tracing is a dictionary lookup.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._records: Dict[bytes, TaRecord] = {}
        self._by_tag: Dict[bytes, bytes] = {}
        if self.path and self.path.exists():
            for n, line in enumerate(self.path.read_text().splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    ident, p0, ahat = line.split(",")
                    rec = TaRecord(bytes.fromhex(ident), int(p0),
                                   group.decode_source(bytes.fromhex(ahat), "left"))
                except (ValueError, group.DecodeError) as exc:
                    raise IntegrityError("record store line %d is malformed" % n) from exc
                self._insert(rec)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[TaRecord]:
        return iter(self._records.values())

    def __contains__(self, identity: bytes) -> bool:
        return identity in self._records

    def _insert(self, rec: TaRecord) -> None:
        if rec.identity in self._records:
            raise DuplicateIdentity(rec.identity)
        with group.uncounted():
            tag = pair(rec.Ahat, group.generator()).encode()
        self._records[rec.identity] = rec
        self._by_tag[tag] = rec.identity

    def add(self, identity: bytes, P0: int, Ahat: Source) -> TaRecord:
        rec = TaRecord(identity, P0, Ahat)
        self._insert(rec)
        if self.path:
            with self.path.open("a") as fh:
                fh.write("%s,%d,%s\n" % (identity.hex(), P0, Ahat.encode().hex()))
        return rec

    def get(self, identity: bytes) -> TaRecord:
        return self._records[identity]

    def identity_for_tag(self, W: Target) -> bytes:
        try:
            return self._by_tag[W.encode()]
        except KeyError:
            raise UnknownTag("tracing tag matches no registered user") from None

    def identities(self) -> List[bytes]:
        return list(self._records)
