"""Authority, provider, customer and mobile-user state machines.

Each party owns its secrets and talks only through the message classes in
``messages``. Proofs are bound to a single-use nonce issued by the verifier
together with a digest of the message body they travel in.
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Dict, List, Optional, Set, Tuple, Union

from .. import bgn, geo, group
from ..bbs import BbsSignature, bbs_blind_sign, bbs_verify
from ..group import ORDER, Source, Target, pair
from ..pre import PreError, seal, unseal
from ..zkp import (identity_scalar, prove_credential, prove_pk1, prove_spk, verify_credential,
                   verify_pk1, verify_spk)
from .ledger import DoubleReport, ReportLedger, compute_w, select_reports
from .messages import (CircleMatchRequest, CircleTaskUpload, CreditUpdate, ForwardedReport, MatchFailure, MatchRequest, Message,
                       RegistrationRequest, RegistrationResponse, Report, TaskOffer, TaskUpload,
                       TraceRequest, TrustFeedback)
from .setup import (ANCHOR_CODES, ANCHORS, DuplicateIdentity, PublicParams, ServiceSetup,
                    TaRecordStore)

NONCE_BYTES = 16


class ProtocolError(Exception):
    pass


class ProofRejected(ProtocolError):
    pass


class ReplayError(ProtocolError):
    """A nonce was unknown or already spent."""


class TaskExpired(ProtocolError):
    pass


class UnknownTask(ProtocolError):
    pass


class TrustOutOfRange(ProtocolError):
    pass


class CreditRejected(ProtocolError):
    pass


class CredentialRejected(ProtocolError):
    pass


def bind(nonce: bytes, msg: Message) -> bytes:
    """Proof context: the verifier's nonce and a digest of every non-proof field."""
    h = hashlib.sha256(b"crowdsense/context/v1")
    h.update(bytes([msg.KIND]))
    for part in msg.digest_parts(skip=("proof",)):
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return nonce + h.digest()


def report_x(num: int, m: Target, tau: int) -> int:
    return group.hash_to_scalar(b"report-id", [num.to_bytes(8, "big"), m.encode(), tau.to_bytes(8, "big")])


def report_v(a: int, num: int, identity: bytes, tau: int) -> int:
    return group.prf(a, num.to_bytes(8, "big") + len(identity).to_bytes(2, "big") + identity
                     + tau.to_bytes(8, "big"))


def credit_delta(epsilon: float, Q: int) -> int:
    """INT(epsilon * Q), rounding halves away from zero."""
    return int((Decimal(epsilon) * Q).to_integral_value(ROUND_HALF_UP))


def _task_aad(expires: int, gamma: float) -> bytes:
    return struct.pack(">Qd", expires, gamma)


class NonceBook:
    def __init__(self, rng):
        self._rng = rng
        self._open: Set[bytes] = set()

    def issue(self) -> bytes:
        n = self._rng.getrandbits(8 * NONCE_BYTES).to_bytes(NONCE_BYTES, "big")
        self._open.add(n)
        return n

    def spend(self, nonce: bytes) -> None:
        if nonce not in self._open:
            raise ReplayError("nonce unknown or already used")
        self._open.discard(nonce)


# ----------------------------------------------------------------- authority


class TrustedAuthority:
    def __init__(self, setup: ServiceSetup, store: Optional[TaRecordStore] = None, rng=None,
                 circle: Optional[bgn.BgnParams] = None):
        self.public = setup.public
        self._circle = circle
        self._alpha = setup.alpha
        self._access = setup.ta_access_key()
        self._credit = setup.ta_credit_key()
        self.store = store if store is not None else TaRecordStore()
        self._rng = rng
        self.nonces = NonceBook(rng or secrets.SystemRandom())

    def issue_nonce(self) -> bytes:
        return self.nonces.issue()

    def register(self, req: RegistrationRequest, nonce: bytes, P0: int) -> RegistrationResponse:
        self.nonces.spend(nonce)
        if req.identity in self.store:
            raise DuplicateIdentity(req.identity)
        gens = self.public.gens
        ok = verify_pk1((req.C, req.Cp, req.Ahat), req.proof, gens, bind(nonce, req))
        if not ok:
            raise ProofRejected("registration proof does not verify")
        I = identity_scalar(req.identity)
        A, e, s2 = bbs_blind_sign(self._access, req.C, {1: I}, self._rng, proof_ok=ok)
        B, f, t2 = bbs_blind_sign(self._credit, req.Cp, {1: I, 2: P0}, self._rng, proof_ok=ok)
        RK = req.Ahat ** group.inv(self._alpha)
        self.store.add(req.identity, P0, req.Ahat)
        return RegistrationResponse(A, B, s2, t2, e, f, P0, RK)

    def trace(self, req: TraceRequest) -> bytes:
        return self.store.identity_for_tag(req.W)

    def decide_circle(self, distance: bgn.BgnCiphertext, radius: bgn.BgnCiphertext) -> bool:
        """Containment decision for circle-mode matching; only this bit leaves the authority."""
        if self._circle is None:
            raise ProtocolError("authority holds no circle-matching key")
        return bgn.bgn_decide(distance, radius, self._circle)


# ------------------------------------------------------------------ provider


@dataclass
class TaskRecord:
    num: int
    upload: Union[TaskUpload, CircleTaskUpload]
    credited: Set[Tuple[int, bytes]] = field(default_factory=set)


@dataclass(frozen=True)
class ReportOutcome:
    accepted: bool
    double: Optional[DoubleReport] = None
    trace: Optional[TraceRequest] = None


class ServiceProvider:
    def __init__(self, public: PublicParams, beta: int, rng=None, clock: int = 0,
                 anchor_keys: Optional[Dict[str, Source]] = None,
                 circle_public: Optional[bgn.BgnPublic] = None,
                 circle_oracle: Optional[Callable] = None):
        self.public = public
        self.circle_public = circle_public
        self.circle_oracle = circle_oracle  # usually TrustedAuthority.decide_circle
        self._beta = beta
        self._rng = rng
        self.clock = clock
        # anchor name -> key a credit credential may be signed under
        self.anchor_keys = anchor_keys or {"ta": public.T_h, "provider": public.S}
        self.nonces = NonceBook(rng or secrets.SystemRandom())
        self.tasks: Dict[int, TaskRecord] = {}
        self.ledger = ReportLedger()
        self._next_num = 1

    def issue_nonce(self) -> bytes:
        return self.nonces.issue()

    def published(self) -> List[Tuple[int, int, float]]:
        return [(t.num, t.upload.expires, t.upload.gamma) for t in self.tasks.values()]

    def accept_task(self, upload: Union[TaskUpload, CircleTaskUpload], nonce: bytes) -> int:
        self.nonces.spend(nonce)
        if upload.expires <= self.clock:
            raise TaskExpired("task already expired")
        pp = self.public
        if not verify_credential(pp.T, upload.proof, pp.gens, pp.table, bind(nonce, upload), "PK2"):
            raise ProofRejected("customer credential proof does not verify")
        num = self._next_num
        self._next_num += 1
        self.tasks[num] = TaskRecord(num, upload)
        return num

    def _circle_hit(self, req: CircleMatchRequest, up: CircleTaskUpload) -> bool:
        if self.circle_public is None or self.circle_oracle is None:
            raise ProtocolError("circle matching is not configured")
        dec = bgn.BgnCiphertext.decode
        Z = bgn.bgn_distance_ct(dec(up.Cx), dec(up.Cy), dec(req.Ux), dec(req.Uy), self.circle_public)
        return self.circle_oracle(Z, dec(up.CR))

    def match_tasks(self, req: Union[MatchRequest, CircleMatchRequest],
                    nonce: bytes) -> Union[List[TaskOffer], MatchFailure]:
        self.nonces.spend(nonce)
        pp = self.public
        if not verify_credential(pp.T, req.proof, pp.gens, pp.table, bind(nonce, req), "PK3"):
            raise ProofRejected("user credential proof does not verify")
        circle = isinstance(req, CircleMatchRequest)
        offers = []
        for rec in self.tasks.values():
            up = rec.upload
            if up.expires <= self.clock or circle != isinstance(up, CircleTaskUpload):
                continue
            # matching work is outside the group-operation budget
            with group.uncounted():
                hit = self._circle_hit(req, up) if circle else geo.match(req.route, up.area)
            if hit:
                c4 = pair(req.mu, up.c1) ** group.inv(self._beta)
                offers.append(TaskOffer(rec.num, up.c2, up.c3, c4, up.sealed, up.expires, up.gamma))
        return offers or MatchFailure()

    def _task(self, num: int) -> TaskRecord:
        try:
            return self.tasks[num]
        except KeyError:
            raise UnknownTask(num) from None

    def receive_report(self, report: Report, nonce: bytes) -> ReportOutcome:
        self.nonces.spend(nonce)
        rec = self._task(report.num)
        if rec.upload.expires <= self.clock:
            raise TaskExpired("reporting window closed")
        anchor = ANCHORS.get(report.anchor)
        if anchor not in self.anchor_keys:
            raise ProofRejected("unknown credit anchor")
        pp = self.public
        st = (report.Cp, report.Q, report.X, report.Y, report.Z, report.num)
        if not verify_spk(st, pp.range, report.proof, pp.gens, pp.table, anchor,
                          self.anchor_keys[anchor], bind(nonce, report)):
            raise ProofRejected("report proof does not verify")
        double = self.ledger.add(report)
        if double is None:
            return ReportOutcome(True)
        return ReportOutcome(False, double, TraceRequest(compute_w(double.first, double.second)))

    def forward(self, num: int, tau: int) -> List[ForwardedReport]:
        w = self._task(num).upload.w
        return [ForwardedReport(r.num, r.D, r.Dp, r.Y, r.Q, r.tau)
                for r in select_reports(self.ledger.slice(num, tau), w)]

    def assign_credit(self, num: int, tau: int, fb: TrustFeedback) -> CreditUpdate:
        rec = self._task(num)
        gamma = rec.upload.gamma
        if not -gamma <= fb.epsilon <= gamma:
            raise TrustOutOfRange("trust level %r outside [-%r, %r]" % (fb.epsilon, gamma, gamma))
        report = self.ledger.find(num, tau, fb.Y)
        key = (tau, fb.Y.encode())
        if key in rec.credited:
            raise CreditRejected("report already credited")
        theta = credit_delta(fb.epsilon, report.Q)
        g = self.public.gens
        t2 = group.random_scalar(self._rng)
        while True:
            f = group.random_scalar(self._rng)
            if (self._beta + f) % ORDER:
                break
        B = (g.h0 * g.h1 ** t2 * report.Cp * g.h4 ** theta) ** group.inv(self._beta + f)
        rec.credited.add(key)
        return CreditUpdate(B, t2, f, theta, fb.Y)


# ---------------------------------------------------------------- registrants


@dataclass
class Credential:
    A: Source
    e: int
    s: int
    B: Source
    f: int
    t: int
    a: int
    identity: bytes
    P: int
    Ahat: Source
    RK: Source
    anchor: str = "ta"
    clamped: bool = False  # set once the signed balance has gone negative

    @property
    def I(self) -> int:
        return identity_scalar(self.identity)

    @property
    def balance(self) -> int:
        return max(self.P, 0)


class Registrant:
    def __init__(self, identity: bytes, public: PublicParams, rng=None):
        self.identity = identity
        self.public = public
        self._rng = rng
        self.credential: Optional[Credential] = None
        self._pending_reg = None
        self._tag: Optional[Target] = None

    def registration_request(self, nonce: bytes) -> RegistrationRequest:
        g = self.public.gens
        s1, a, t1 = (group.random_scalar(self._rng) for _ in range(3))
        C = g.g1 ** s1 * g.g2 ** a
        Cp = g.h1 ** t1 * g.h2 ** a
        Ahat = g.g.only("left") ** a
        msg = RegistrationRequest(self.identity, C, Cp, Ahat, None)
        proof = prove_pk1((s1, t1, a), (C, Cp, Ahat), g, bind(nonce, msg), self._rng)
        self._pending_reg = (s1, t1, a, Ahat)
        return replace(msg, proof=proof)

    def finish_registration(self, resp: RegistrationResponse) -> Credential:
        if self._pending_reg is None:
            raise ProtocolError("no registration in progress")
        s1, t1, a, Ahat = self._pending_reg
        pp = self.public
        I = identity_scalar(self.identity)
        s, t = (s1 + resp.s2) % ORDER, (t1 + resp.t2) % ORDER
        if not bbs_verify(pp.access_key(), (a, I), BbsSignature(resp.A, resp.e, s)):
            raise CredentialRejected("access credential does not verify")
        if not bbs_verify(pp.credit_key("ta"), (a, I, resp.P0), BbsSignature(resp.B, resp.f, t)):
            raise CredentialRejected("credit credential does not verify")
        # precomputation outside the per-phase budget: RK sanity check and pair(g, A_hat)
        with group.uncounted():
            if pair(resp.RK, pp.T) != pair(Ahat, pp.gens.g):
                raise CredentialRejected("re-encryption key does not match A_hat")
            self._tag = pair(Ahat, pp.gens.g)
        self._pending_reg = None
        self.credential = Credential(resp.A, resp.e, s, resp.B, resp.f, t, a, self.identity,
                                     resp.P0, Ahat, resp.RK, anchor="ta", clamped=resp.P0 < 0)
        return self.credential

    def _cred(self) -> Credential:
        if self.credential is None:
            raise ProtocolError("not registered")
        return self.credential

    def _access_witness(self):
        c = self._cred()
        return (c.A, c.e, c.s, c.a, c.I)


@dataclass(frozen=True)
class TaskSecret:
    k: int
    task: bytes
    u: Source
    region: Optional[geo.GridRegion]


class Customer(Registrant):
    def __init__(self, identity: bytes, public: PublicParams, rng=None):
        super().__init__(identity, public, rng)
        self.tasks: Dict[int, TaskSecret] = {}

    def _encrypt_task(self, task: bytes, expires: int, gamma: float):
        """c1 = S^r2, c2 = T^r1, c3 = M G^r1 H^r2 with task||u sealed under M."""
        pp, g = self.public, self.public.gens
        k, r1, r2 = (group.random_scalar(self._rng) for _ in range(3))
        u = g.g.only("left") ** k
        c1 = pp.S ** r2
        c2 = pp.T ** r1
        carrier = group.random_target(self._rng)
        c3 = carrier * g.G ** r1 * g.H ** r2
        sealed = seal(task + u.encode(), carrier, _task_aad(expires, gamma))
        return k, u, (c1, c2, c3, sealed)

    def _with_pk2(self, msg, nonce: bytes):
        pp = self.public
        proof = prove_credential(self._access_witness(), pp.T, pp.gens, pp.table, bind(nonce, msg),
                                 self._rng, "PK2")
        return replace(msg, proof=proof)

    def post_task(self, task: bytes, expires: int, region: geo.GridRegion, gamma: float, w: int,
                  nonce: bytes) -> Tuple[TaskUpload, TaskSecret]:
        k, u, cts = self._encrypt_task(task, expires, gamma)
        _, area = geo.encode_region(region, self._rng)
        msg = TaskUpload(*cts, expires, area, gamma, w, None)
        return self._with_pk2(msg, nonce), TaskSecret(k, task, u, region)

    def post_circle_task(self, task: bytes, expires: int, center: Tuple[int, int], radius: int,
                         gamma: float, w: int, circle: bgn.BgnPublic,
                         nonce: bytes) -> Tuple[CircleTaskUpload, TaskSecret]:
        k, u, cts = self._encrypt_task(task, expires, gamma)
        Cx, Cy, CR = (bgn.bgn_encrypt(v, circle, self._rng).encode(circle) for v in (*center, radius))
        msg = CircleTaskUpload(*cts, expires, Cx, Cy, CR, gamma, w, None)
        return self._with_pk2(msg, nonce), TaskSecret(k, task, u, None)

    def task_accepted(self, num: int, secret: TaskSecret) -> None:
        self.tasks[num] = secret

    def open_reports(self, num: int, reports: List[ForwardedReport]) -> List[Target]:
        k_inv = group.inv(self.tasks[num].k)
        g = self.public.gens.g
        return [r.Dp / pair(r.D, g) ** k_inv for r in reports]

    @staticmethod
    def report_intact(num: int, m: Target, tau: int, X: int) -> bool:
        return report_x(num, m, tau) == X

    @staticmethod
    def feedback(epsilon: float, Y: Target) -> TrustFeedback:
        return TrustFeedback(epsilon, Y)


@dataclass(frozen=True)
class OpenedTask:
    num: int
    task: bytes
    u: Source
    expires: int
    gamma: float


class MobileUser(Registrant):
    def __init__(self, identity: bytes, public: PublicParams, rng=None):
        super().__init__(identity, public, rng)
        self._nu: Optional[int] = None
        # Y encoding -> [(t', P)]; a repeated Y keeps every candidate
        self._pending: Dict[bytes, List[Tuple[int, int]]] = {}

    def match_request(self, route: geo.GridRegion, nonce: bytes) -> MatchRequest:
        pp, g = self.public, self.public.gens
        self._nu = group.random_scalar(self._rng)
        mu = g.h.only("left") ** self._nu
        _, obf = geo.encode_user_route(route, self._rng)
        msg = MatchRequest(mu, obf, None)
        proof = prove_credential(self._access_witness(), pp.T, g, pp.table, bind(nonce, msg),
                                 self._rng, "PK3")
        return replace(msg, proof=proof)

    def circle_match_request(self, point: Tuple[int, int], circle: bgn.BgnPublic,
                             nonce: bytes) -> CircleMatchRequest:
        pp, g = self.public, self.public.gens
        self._nu = group.random_scalar(self._rng)
        mu = g.h.only("left") ** self._nu
        ux, uy = (bgn.bgn_encrypt(v, circle, self._rng).encode(circle) for v in point)
        msg = CircleMatchRequest(mu, ux, uy, None)
        proof = prove_credential(self._access_witness(), pp.T, g, pp.table, bind(nonce, msg),
                                 self._rng, "PK3")
        return replace(msg, proof=proof)

    def open_offer(self, offer: TaskOffer) -> OpenedTask:
        if self._nu is None:
            raise ProtocolError("no match request outstanding")
        c = self._cred()
        mask = offer.c4 ** group.inv(self._nu) * pair(c.RK, offer.c2) ** group.inv(c.a)
        try:
            plain = unseal(offer.sealed, offer.c3 / mask, _task_aad(offer.expires, offer.gamma))
        except PreError as exc:
            raise ProtocolError("task does not decrypt") from exc
        task, u_enc = plain[:-group.LEFT_BYTES], plain[-group.LEFT_BYTES:]
        return OpenedTask(offer.num, task, group.decode_source(u_enc, "left"), offer.expires, offer.gamma)

    def report(self, task: OpenedTask, m: Target, tau: int, Q: int, nonce: bytes) -> Report:
        pp, g, c = self.public, self.public.gens, self._cred()
        r_hat = group.random_scalar(self._rng)
        D = task.u ** r_hat
        Dp = m * g.G ** r_hat
        t1 = group.random_scalar(self._rng)
        I = c.I
        Cp = g.h1 ** t1 * g.h2 ** c.a * g.h3 ** I * g.h4 ** c.P
        X = report_x(task.num, m, tau)
        v = report_v(c.a, task.num, c.identity, tau)
        Y = g.H ** v
        Z = self._tag * g.calG ** (X * v)
        msg = Report(task.num, D, Dp, Cp, X, Y, Z, Q, tau, ANCHOR_CODES[c.anchor], None)
        proof = prove_spk((c.B, c.f, c.t, t1, c.a, I, c.P, v), (Cp, Q, X, Y, Z, task.num),
                          pp.range, g, pp.table, c.anchor, pp.anchor_key(c.anchor),
                          bind(nonce, msg), self._rng)
        self._pending.setdefault(Y.encode(), []).append((t1, c.P))
        return replace(msg, proof=proof)

    def apply_credit(self, upd: CreditUpdate) -> Credential:
        c = self._cred()
        key = upd.Y.encode()
        if key not in self._pending:
            raise CreditRejected("update names no outstanding report")
        for t1, P in self._pending[key]:
            t = (t1 + upd.t2) % ORDER
            P_new = P + upd.theta
            if bbs_verify(self.public.credit_key("provider"), (c.a, c.I, P_new),
                          BbsSignature(upd.B, upd.f, t)):
                break
        else:
            raise CreditRejected("credit update does not verify")
        del self._pending[key]
        self.credential = replace(c, B=upd.B, f=upd.f, t=t, P=P_new, anchor="provider",
                                  clamped=c.clamped or P_new < 0)
        return self.credential
