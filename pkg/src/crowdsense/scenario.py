"""Scenario runner: drives every party through all phases over an in-process bus.

Every message is encoded, logged and decoded again before the receiver
sees it, so each run also exercises the wire format. All randomness comes
from the scenario seed, so a replay yields an identical transcript digest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import random
import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import yaml

from . import bgn, geo, group
from .group import Target
from .protocol import parties as P
from .protocol.messages import MatchFailure, Message, decode_message
from .protocol.setup import DuplicateIdentity, service_setup
from .protocol.sizes import account_message_sizes
from .trust import StrategyProfile, TrustConfig, default_similarity, group_reports, trust_levels
from .zkp import RangeError

SCHEMA_VERSION = 1
READING_BOUND = 1024
INJECTIONS = ("double-report", "replay", "tamper-update", "forge-threshold")
CIRCLE_CELL = (0, 0)  # circle mode treats the whole circle as one trust group


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------- config


@dataclass
class UserSpec:
    id: str
    P0: int
    route: List[Tuple[int, int]] = field(default_factory=list)
    point: Optional[Tuple[int, int]] = None
    behavior: str = "honest"


@dataclass
class TaskSpec:
    customer: str
    task: str
    expires: int
    gamma: float
    w: int
    slots: List[int]
    truth: int
    area: List[Tuple[int, int]] = field(default_factory=list)
    center: Optional[Tuple[int, int]] = None
    radius: Optional[int] = None


@dataclass
class Injection:
    kind: str
    user: str
    task: int
    slot: int


@dataclass
class ScenarioConfig:
    seed: int
    grid: Tuple[int, int]
    customers: Dict[str, int]
    users: List[UserSpec]
    tasks: List[TaskSpec]
    injections: List[Injection] = field(default_factory=list)
    matching: str = "grid"
    range_V: int = 64
    circle_bits: int = 32
    thresholds: str = "uniform"
    name: str = "scenario"

    @classmethod
    def from_dict(cls, doc: dict, name: str = "scenario") -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigError("scenario must be a mapping")
        if doc.get("version") != SCHEMA_VERSION:
            raise ConfigError("unsupported scenario version %r" % doc.get("version"))
        if "seed" not in doc:
            raise ConfigError("seed is mandatory")
        try:
            rows, cols = doc.get("grid", [6, 6])
            customers = {c["id"]: int(c.get("P0", 10)) for c in doc["customers"]}
            users = [UserSpec(u["id"], int(u["P0"]), [tuple(c) for c in u.get("route", [])],
                              tuple(u["point"]) if "point" in u else None, u.get("behavior", "honest"))
                     for u in doc["users"]]
            tasks = []
            for t in doc["tasks"]:
                area = _area_cells(t.get("area", {}), rows, cols)
                circle = t.get("circle") or {}
                tasks.append(TaskSpec(t["customer"], str(t["task"]), int(t["expires"]), float(t["gamma"]),
                                      int(t["w"]), [int(s) for s in t["slots"]], int(t.get("truth", 50)),
                                      area, tuple(circle["center"]) if circle else None,
                                      circle.get("radius")))
            injections = [Injection(i["kind"], i["user"], int(i["task"]), int(i["slot"]))
                          for i in doc.get("injections", [])]
            cfg = cls(int(doc["seed"]), (int(rows), int(cols)), customers, users, tasks, injections,
                      doc.get("matching", "grid"), int(doc.get("range_V", 64)),
                      int(doc.get("circle_bits", 32)), doc.get("thresholds", "uniform"),
                      doc.get("name", name))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("malformed scenario: %s" % exc) from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        return cls.from_dict(yaml.safe_load(path.read_text()), path.stem)

    def validate(self) -> None:
        rows, cols = self.grid
        ids = set(self.customers) | {u.id for u in self.users}
        if len(ids) != len(self.customers) + len(self.users):
            raise ConfigError("party identifiers must be unique")
        if self.matching not in ("grid", "circle"):
            raise ConfigError("matching must be grid or circle")
        StrategyProfile(self.thresholds)
        for u in self.users:
            if u.behavior not in ("honest", "liar"):
                raise ConfigError("unknown behavior %r" % u.behavior)
            for i, j in u.route:
                if not (0 <= i < rows and 0 <= j < cols):
                    raise ConfigError("route cell (%d, %d) of %s outside grid" % (i, j, u.id))
            if self.matching == "circle" and u.point is None:
                raise ConfigError("user %s needs a point in circle mode" % u.id)
        for k, t in enumerate(self.tasks):
            if t.customer not in self.customers:
                raise ConfigError("task %d names unknown customer %r" % (k, t.customer))
            if self.matching == "grid" and not t.area:
                raise ConfigError("task %d has an empty area" % k)
            if self.matching == "circle" and (t.center is None or t.radius is None):
                raise ConfigError("task %d needs a circle" % k)
            if not t.slots or max(t.slots) >= t.expires or min(t.slots) < 1:
                raise ConfigError("task %d slots must lie in [1, expires)" % k)
            if not 0 <= t.truth < READING_BOUND:
                raise ConfigError("task %d truth outside reading range" % k)
        users = {u.id for u in self.users}
        for inj in self.injections:
            if inj.kind not in INJECTIONS:
                raise ConfigError("unknown injection %r" % inj.kind)
            if inj.user not in users or not 0 <= inj.task < len(self.tasks):
                raise ConfigError("injection refers to unknown user or task")


def _area_cells(spec: dict, rows: int, cols: int) -> List[Tuple[int, int]]:
    cells = [tuple(c) for c in spec.get("cells", [])]
    for r0, r1, c0, c1 in spec.get("boxes", []):
        cells += [(i, j) for i in range(r0, r1) for j in range(c0, c1)]
    for i, j in cells:
        if not (0 <= i < rows and 0 <= j < cols):
            raise ConfigError("area cell (%d, %d) outside grid" % (i, j))
    return sorted(set(cells))


# ---------------------------------------------------------------- readings


class ReadingCodec:
    """Small integer readings carried as G^value and recovered by table lookup."""

    def __init__(self, G: Target, bound: int = READING_BOUND):
        self.G = G
        self.bound = bound
        self._table: Dict[bytes, int] = {}
        cur = group.target_identity()
        for v in range(bound):
            self._table[cur.encode()] = v
            cur = cur * G

    def encode(self, value: int) -> Target:
        if not 0 <= value < self.bound:
            raise ValueError("reading outside [0, %d)" % self.bound)
        with group.uncounted():
            return self.G ** value

    def decode(self, m: Target) -> int:
        try:
            return self._table[m.encode()]
        except KeyError:
            raise ValueError("not a valid reading") from None


# ------------------------------------------------------------------- report


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class RunReport:
    name: str
    seed: int
    checks: List[Check] = field(default_factory=list)
    sizes: Dict[str, Tuple[int, bool, str]] = field(default_factory=dict)
    ledger: List[Tuple[int, int, int, int]] = field(default_factory=list)  # num, tau, stored, selected
    traces: List[Tuple[int, int, str, str]] = field(default_factory=list)  # num, tau, traced, expected
    credits: Dict[str, Tuple[int, int, int, bool]] = field(default_factory=dict)  # P0, sum theta, P, clamped
    transcript_digest: str = ""
    messages: int = 0
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(ok), detail))

    def to_text(self, include_timings: bool = False) -> str:
        out = ["scenario %s (seed %d): %s" % (self.name, self.seed, "PASS" if self.ok else "FAIL"),
               "messages %d, transcript sha256 %s" % (self.messages, self.transcript_digest)]
        failed = [c for c in self.checks if not c.ok]
        out.append("checks: %d passed, %d failed" % (len(self.checks) - len(failed), len(failed)))
        out += ["  FAIL %s %s" % (c.name, c.detail) for c in failed]
        out.append("ledger (num, slot, stored, selected):")
        out += ["  %d %d %d %d" % row for row in self.ledger]
        out.append("traces (num, slot, traced, expected):")
        out += ["  %d %d %s %s" % row for row in self.traces] or ["  none"]
        out.append("credits (user: P0 + sum theta = P):")
        for uid, (p0, st, p, clamped) in sorted(self.credits.items()):
            out.append("  %s: %d %+d = %d%s" % (uid, p0, st, p, " (clamped)" if clamped else ""))
        out.append("message sizes (kind: bits, matches formula, backend formula):")
        for kind, (bits, ok, formula) in sorted(self.sizes.items()):
            out.append("  %s: %d %s %s" % (kind, bits, "yes" if ok else "NO", formula))
        if include_timings:
            out.append("timings (s):")
            out += ["  %s %.4f" % kv for kv in sorted(self.timings.items())]
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("section", "key", "value"))
        for c in self.checks:
            wr.writerow(("check", c.name, "pass" if c.ok else "fail"))
        for kind, (bits, ok, _) in sorted(self.sizes.items()):
            wr.writerow(("size_bits", kind, bits))
        for uid, (p0, st, p, _) in sorted(self.credits.items()):
            wr.writerow(("final_credit", uid, p))
        for num, tau, traced, _ in self.traces:
            wr.writerow(("trace", "%d/%d" % (num, tau), traced))
        return buf.getvalue()


# --------------------------------------------------------------------- bus


class Bus:
    """Ordered in-process channel that logs and re-decodes every message."""

    def __init__(self, report: RunReport):
        self._digest = hashlib.sha256()
        self.count = 0
        self.report = report

    def send(self, sender: str, receiver: str, msg: Message) -> Message:
        data = msg.encode()
        for part in (sender.encode(), receiver.encode(), data):
            self._digest.update(len(part).to_bytes(4, "big"))
            self._digest.update(part)
        self.count += 1
        if msg.NAME not in self.report.sizes:
            acc = account_message_sizes(msg)
            self.report.sizes[msg.NAME] = (acc.measured_bits, acc.measured_bits == acc.computed_bits,
                                           acc.backend_formula)
        return decode_message(data)

    def digest(self) -> str:
        return self._digest.hexdigest()


# ------------------------------------------------------------------- runner


class _Timer:
    def __init__(self, sink: Dict[str, float], phase: str):
        self.sink, self.phase = sink, phase

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.phase] = self.sink.get(self.phase, 0.0) + time.perf_counter() - self.t0


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    rng = random.Random(cfg.seed)
    nrng = np.random.default_rng(cfg.seed)
    rep = RunReport(cfg.name, cfg.seed)
    bus = Bus(rep)
    timer = lambda phase: _Timer(rep.timings, phase)
    rows, cols = cfg.grid

    with timer("setup"):
        st = service_setup(rng, V=cfg.range_V, grid=cfg.grid)
        circle = bgn.bgn_setup(cfg.circle_bits, 2 ** 10, rng) if cfg.matching == "circle" else None
        ta = P.TrustedAuthority(st, rng=rng, circle=circle)
        sp = P.ServiceProvider(st.public, st.beta, rng=rng,
                               circle_public=circle.public if circle else None,
                               circle_oracle=ta.decide_circle if circle else None)
        codec = ReadingCodec(st.public.gens.G)

    customers = {cid: P.Customer(cid.encode(), st.public, rng) for cid in cfg.customers}
    users = {u.id: P.MobileUser(u.id.encode(), st.public, rng) for u in cfg.users}
    specs = {u.id: u for u in cfg.users}

    with timer("registration"):
        for pid, party in list(customers.items()) + list(users.items()):
            P0 = cfg.customers[pid] if pid in customers else specs[pid].P0
            nonce = ta.issue_nonce()
            req = bus.send(pid, "ta", party.registration_request(nonce))
            resp = bus.send("ta", pid, ta.register(req, nonce, P0))
            party.finish_registration(resp)
        rep.check("registration/all", len(ta.store) == len(customers) + len(users))
        try:
            nonce = ta.issue_nonce()
            dup = P.MobileUser(cfg.users[0].id.encode(), st.public, rng)
            ta.register(dup.registration_request(nonce), nonce, 1)
            rep.check("registration/duplicate-rejected", False)
        except DuplicateIdentity:
            rep.check("registration/duplicate-rejected", True)

    nums: List[int] = []
    secrets_by_num: Dict[int, P.TaskSecret] = {}
    with timer("allocation"):
        sp.clock = 0
        for t in cfg.tasks:
            cust = customers[t.customer]
            nonce = sp.issue_nonce()
            if cfg.matching == "grid":
                region = geo.GridRegion.of(rows, cols, t.area)
                upload, secret = cust.post_task(t.task.encode(), t.expires, region, t.gamma, t.w, nonce)
            else:
                upload, secret = cust.post_circle_task(t.task.encode(), t.expires, t.center, t.radius,
                                                       t.gamma, t.w, circle.public, nonce)
            num = sp.accept_task(bus.send(t.customer, "provider", upload), nonce)
            cust.task_accepted(num, secret)
            nums.append(num)
            secrets_by_num[num] = secret

        opened: Dict[Tuple[str, int], P.OpenedTask] = {}
        for u in cfg.users:
            user = users[u.id]
            nonce = sp.issue_nonce()
            if cfg.matching == "grid":
                req = user.match_request(geo.GridRegion.of(rows, cols, u.route), nonce)
            else:
                req = user.circle_match_request(u.point, circle.public, nonce)
            answer = sp.match_tasks(bus.send(u.id, "provider", req), nonce)
            offers = [] if isinstance(answer, MatchFailure) else answer
            if isinstance(answer, MatchFailure):
                bus.send("provider", u.id, answer)
            for offer in offers:
                task = user.open_offer(bus.send("provider", u.id, offer))
                sec = secrets_by_num[task.num]
                rep.check("allocation/round-trip/%s/%d" % (u.id, task.num),
                          task.task == sec.task and task.u == sec.u)
                opened[(u.id, task.num)] = task
            for k, t in enumerate(cfg.tasks):
                expected = _expected_match(cfg, u, t)
                got = (u.id, nums[k]) in opened
                rep.check("allocation/match/%s/%d" % (u.id, nums[k]), got == expected,
                          "matched=%s expected=%s" % (got, expected))

    sum_theta: Dict[str, int] = defaultdict(int)
    injections = defaultdict(list)
    for inj in cfg.injections:
        injections[(inj.user, inj.task, inj.slot)].append(inj.kind)

    for k, t in enumerate(cfg.tasks):
        num = nums[k]
        cust = customers[t.customer]
        for tau in t.slots:
            sp.clock = tau
            submitted: Dict[bytes, Tuple[str, int, object]] = {}  # Y -> (user, reading, report)
            with timer("reporting"):
                for u in cfg.users:
                    if (u.id, num) not in opened:
                        continue
                    cells = _sensing_cells(cfg, u, t)
                    if not cells:
                        continue
                    user = users[u.id]
                    bal = user.credential.P
                    if bal <= 0:
                        continue
                    Q = _threshold(cfg, nrng, bal)
                    reading = _reading(t, u, rng)
                    nonce = sp.issue_nonce()
                    report = bus.send(u.id, "provider",
                                      user.report(opened[(u.id, num)], codec.encode(reading), tau, Q, nonce))
                    outcome = sp.receive_report(report, nonce)
                    rep.check("reporting/accepted/%s/%d/%d" % (u.id, num, tau), outcome.accepted)
                    submitted[report.Y.encode()] = (u.id, reading, report)
                    for kind in injections.get((u.id, k, tau), []):
                        _inject(kind, rep, bus, sp, ta, user, u, opened[(u.id, num)], report,
                                codec, reading, tau, num, bal)

                stored = sp.ledger.slice(num, tau)
                forwarded = sp.forward(num, tau) if stored else []
                rep.ledger.append((num, tau, len(stored), len(forwarded)))
                expected_sel = sorted(stored, key=lambda r: (-r.Q, r.Y.encode()))[:t.w]
                rep.check("reporting/selection/%d/%d" % (num, tau),
                          [r.Y for r in forwarded] == [r.Y for r in expected_sel])
                fw = [bus.send("provider", t.customer, f) for f in forwarded]
                ms = cust.open_reports(num, fw)
                values = {}
                for f, m in zip(fw, ms):
                    uid, reading, original = submitted[f.Y.encode()]
                    try:
                        value = codec.decode(m)
                    except ValueError:
                        value = None
                    rep.check("reporting/open/%s/%d/%d" % (uid, num, tau),
                              value == reading and cust.report_intact(num, m, tau, original.X))
                    values[f.Y.encode()] = reading if value is None else value

            with timer("credit"):
                if not fw:
                    continue
                cells_of = {f.Y.encode(): _sensing_cells(cfg, specs[submitted[f.Y.encode()][0]], t)
                            for f in fw}
                area = t.area if cfg.matching == "grid" else [CIRCLE_CELL]
                groups = group_reports(cells_of, area)
                sims = {}
                for z, members in groups.items():
                    s = default_similarity({i: values[i] for i in members}, t.gamma)
                    sims.update({(i, z): v for i, v in s.items()})
                Qs = {f.Y.encode(): f.Q for f in fw}
                levels = trust_levels(groups, sims, Qs, TrustConfig.uniform(area, t.gamma)).levels
                for f in fw:
                    uid = submitted[f.Y.encode()][0]
                    fb = bus.send(t.customer, "provider", cust.feedback(levels[f.Y.encode()], f.Y))
                    upd = bus.send("provider", uid, sp.assign_credit(num, tau, fb))
                    user = users[uid]
                    if "tamper-update" in injections.get((uid, k, tau), []):
                        forged = replace(upd, theta=upd.theta + 7)
                        try:
                            user.apply_credit(forged)
                            rep.check("attack/tamper-update/%s/%d/%d" % (uid, num, tau), False)
                        except P.CreditRejected:
                            rep.check("attack/tamper-update/%s/%d/%d" % (uid, num, tau), True)
                    user.apply_credit(upd)
                    sum_theta[uid] += upd.theta

    for u in cfg.users:
        cred = users[u.id].credential
        rep.credits[u.id] = (u.P0, sum_theta[u.id], cred.P, cred.clamped)
        rep.check("credit/balance/%s" % u.id, cred.P == u.P0 + sum_theta[u.id])
    rep.messages = bus.count
    rep.transcript_digest = bus.digest()
    return rep


def _expected_match(cfg: ScenarioConfig, u: UserSpec, t: TaskSpec) -> bool:
    if cfg.matching == "circle":
        (cx, cy), (ux, uy) = t.center, u.point
        return (cx - ux) ** 2 + (cy - uy) ** 2 < t.radius ** 2
    rows, cols = cfg.grid
    # the masked-matrix test decides column overlap
    return geo.column_overlap(geo.GridRegion.of(rows, cols, u.route), geo.GridRegion.of(rows, cols, t.area))


def _sensing_cells(cfg: ScenarioConfig, u: UserSpec, t: TaskSpec) -> List[Tuple[int, int]]:
    if cfg.matching == "circle":
        return [CIRCLE_CELL] if _expected_match(cfg, u, t) else []
    return sorted(set(u.route) & set(t.area))


def _threshold(cfg: ScenarioConfig, nrng, balance: int) -> int:
    Q = int(StrategyProfile(cfg.thresholds).sample(np.array([balance]), nrng)[0])
    return max(Q, balance - cfg.range_V)  # the range proof covers P - Q up to V


def _reading(t: TaskSpec, u: UserSpec, rng) -> int:
    if u.behavior == "liar":
        return (t.truth + READING_BOUND // 2) % READING_BOUND
    return min(READING_BOUND - 1, max(0, t.truth + rng.randint(-2, 2)))


def _inject(kind, rep, bus, sp, ta, user, spec, task, report, codec, reading, tau, num, balance):
    tag = "attack/%s/%s/%d/%d" % (kind, spec.id, num, tau)
    if kind == "double-report":
        nonce = sp.issue_nonce()
        second = bus.send(spec.id, "provider",
                          user.report(task, codec.encode((reading + 1) % READING_BOUND), tau, report.Q, nonce))
        outcome = sp.receive_report(second, nonce)
        traced = ""
        if outcome.trace is not None:
            traced = ta.trace(bus.send("provider", "ta", outcome.trace)).decode()
        rep.traces.append((num, tau, traced or "-", spec.id))
        rep.check(tag, not outcome.accepted and traced == spec.id)
    elif kind == "replay":
        outcomes = []
        for fresh in (True, False):
            nonce = sp.issue_nonce() if fresh else b"\x00" * P.NONCE_BYTES
            try:
                sp.receive_report(report, nonce)
                outcomes.append(False)
            except (P.ProofRejected, P.ReplayError):
                outcomes.append(True)
        rep.check(tag, all(outcomes))
    elif kind == "forge-threshold":
        ok = True
        try:
            user.report(task, codec.encode(reading), tau, balance, sp.issue_nonce())
            ok = False
        except RangeError:
            pass
        nonce = sp.issue_nonce()
        try:
            sp.receive_report(replace(report, Q=balance + 5), nonce)
            ok = False
        except P.ProofRejected:
            pass
        rep.check(tag, ok)


BUNDLED = Path(__file__).parent / "scenarios"


def bundled(name: str) -> Path:
    path = BUNDLED / (name if name.endswith(".yaml") else name + ".yaml")
    if not path.exists():
        raise ConfigError("no bundled scenario %r" % name)
    return path


@dataclass
class TraceDemo:
    users: int
    cheater: str
    traced: str
    honest_collisions: int

    @property
    def ok(self) -> bool:
        return self.traced == self.cheater and self.honest_collisions == 0


def trace_demo(users: int = 20, seed: int = 0, V: int = 64) -> TraceDemo:
    """Register ``users`` users, let each report once and one of them twice."""
    if users < 1:
        raise ValueError("need at least one user")
    rng = random.Random(seed)
    st = service_setup(rng, V=V, grid=(4, 4))
    ta = P.TrustedAuthority(st, rng=rng)
    sp = P.ServiceProvider(st.public, st.beta, rng=rng)
    codec_G = st.public.gens.G
    region = geo.GridRegion.of(4, 4, [(0, 0)])

    def register(party, P0):
        nonce = ta.issue_nonce()
        party.finish_registration(ta.register(party.registration_request(nonce), nonce, P0))

    cust = P.Customer(b"customer", st.public, rng)
    register(cust, 10)
    nonce = sp.issue_nonce()
    upload, secret = cust.post_task(b"trace demo", 5, region, 1.0, users, nonce)
    num = sp.accept_task(upload, nonce)
    cheater = rng.randrange(users)
    traced, collisions = "-", 0
    sp.clock = 1
    for k in range(users):
        user = P.MobileUser(b"user%03d" % k, st.public, rng)
        register(user, 20)
        nonce = sp.issue_nonce()
        offers = sp.match_tasks(user.match_request(region, nonce), nonce)
        task = user.open_offer(offers[0])
        for value in ((1, 2) if k == cheater else (1,)):
            nonce = sp.issue_nonce()
            with group.uncounted():
                m = codec_G ** (value + k)
            outcome = sp.receive_report(user.report(task, m, 1, 10, nonce), nonce)
            if outcome.trace is not None:
                who = ta.trace(outcome.trace).decode()
                if k == cheater and value == 2:
                    traced = who
                else:
                    collisions += 1
    return TraceDemo(users, "user%03d" % cheater, traced, collisions)
