"""Operation counts and wall-clock timings per (phase, entity)."""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import geo, group
from .group import OpCounts
from .protocol import parties as P
from .protocol.setup import ServiceSetup, service_setup

PHASES = ("registration", "allocation", "reporting", "credit")

# (point multiplications, point additions, pairings, target exponentiations)
REFERENCE_COUNTS: Dict[Tuple[str, str], Tuple[int, int, int, int]] = {
    ("registration", "authority"): (16, 12, 0, 0),
    ("registration", "user"): (19, 13, 4, 0),
    ("allocation", "customer"): (11, 5, 1, 6),
    ("allocation", "provider"): (12, 8, 1, 15),
    ("allocation", "user"): (9, 5, 2, 8),
    ("reporting", "customer"): (0, 0, 1, 1),
    ("reporting", "provider"): (19, 14, 5, 19),
    ("reporting", "user"): (25, 16, 2, 15),
    ("credit", "provider"): (3, 3, 0, 0),
    ("credit", "user"): (5, 5, 2, 0),
}


@dataclass
class BenchRow:
    phase: str
    entity: str
    counts: OpCounts
    reference: Tuple[int, int, int, int]
    times: List[float]

    @property
    def matches(self) -> bool:
        return self.counts.as_tuple() == self.reference

    @property
    def mean_ms(self) -> float:
        return 1000 * statistics.fmean(self.times)

    @property
    def median_ms(self) -> float:
        return 1000 * statistics.median(self.times)


class _Probe:
    """Collects one count and one duration per (phase, entity)."""

    def __init__(self):
        self.counts: Dict[Tuple[str, str], OpCounts] = {}
        self.times: Dict[Tuple[str, str], float] = {}

    def run(self, phase: str, entity: str, fn: Callable):
        key = (phase, entity)
        t0 = time.perf_counter()
        with group.counting() as c:
            out = fn()
        self.times[key] = self.times.get(key, 0.0) + time.perf_counter() - t0
        self.counts[key] = self.counts.get(key, OpCounts()) + c
        return out


def _one_pass(st: ServiceSetup, rng: random.Random) -> _Probe:
    """A single user through every phase, plus a second report that triggers W."""
    pr = _Probe()
    pp = st.public
    ta = P.TrustedAuthority(st, rng=rng)
    sp = P.ServiceProvider(pp, st.beta, rng=rng)
    rows, cols = pp.grid
    cust = P.Customer(b"bench-customer", pp, rng)
    user = P.MobileUser(b"bench-user", pp, rng)

    with group.uncounted():
        nonce = ta.issue_nonce()
        cust.finish_registration(ta.register(cust.registration_request(nonce), nonce, 10))
    nonce = ta.issue_nonce()
    req = pr.run("registration", "user", lambda: user.registration_request(nonce))
    resp = pr.run("registration", "authority", lambda: ta.register(req, nonce, 50))
    pr.run("registration", "user", lambda: user.finish_registration(resp))

    region = geo.GridRegion.box(rows, cols, 0, 2, 0, 2)
    nonce = sp.issue_nonce()
    upload, secret = pr.run("allocation", "customer",
                            lambda: cust.post_task(b"bench task", 10, region, 1.0, 2, nonce))
    num = pr.run("allocation", "provider", lambda: sp.accept_task(upload, nonce))
    cust.task_accepted(num, secret)
    nonce = sp.issue_nonce()
    req = pr.run("allocation", "user", lambda: user.match_request(geo.GridRegion.of(rows, cols, [(1, 1)]), nonce))
    offers = pr.run("allocation", "provider", lambda: sp.match_tasks(req, nonce))
    task = pr.run("allocation", "user", lambda: user.open_offer(offers[0]))

    G = pp.gens.G
    with group.uncounted():
        m1, m2 = G ** 5, G ** 6
    sp.clock = 1
    nonce = sp.issue_nonce()
    r1 = pr.run("reporting", "user", lambda: user.report(task, m1, 1, 40, nonce))
    with group.uncounted():
        sp.receive_report(r1, nonce)
        nonce2 = sp.issue_nonce()
        r2 = user.report(task, m2, 1, 40, nonce2)
    # the provider's reporting cost is a proof check plus the W for a collision
    outcome = pr.run("reporting", "provider", lambda: sp.receive_report(r2, nonce2))
    with group.uncounted():
        if ta.trace(outcome.trace) != b"bench-user":
            raise AssertionError("trace named the wrong identity")
    fw = sp.forward(num, 1)
    pr.run("reporting", "customer", lambda: cust.open_reports(num, fw))

    upd = pr.run("credit", "provider", lambda: sp.assign_credit(num, 1, P.TrustFeedback(0.5, r1.Y)))
    pr.run("credit", "user", lambda: user.apply_credit(upd))
    return pr


def run_bench(repetitions: int = 3, phases: Optional[Sequence[str]] = None, seed: int = 0,
              setup: Optional[ServiceSetup] = None) -> List[BenchRow]:
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    phases = tuple(phases or PHASES)
    unknown = set(phases) - set(PHASES)
    if unknown:
        raise ValueError("unknown phase(s): %s" % ", ".join(sorted(unknown)))
    rng = random.Random(seed)
    st = setup or service_setup(rng, V=64, grid=(8, 8))
    passes = [_one_pass(st, rng) for _ in range(repetitions)]
    rows = []
    for key, ref in REFERENCE_COUNTS.items():
        if key[0] not in phases:
            continue
        counts = passes[0].counts[key]
        for p in passes[1:]:
            if p.counts[key] != counts:
                raise AssertionError("operation counts vary between repetitions for %s/%s" % key)
        rows.append(BenchRow(key[0], key[1], counts, ref, [p.times[key] for p in passes]))
    return rows


def format_table(rows: List[BenchRow]) -> str:
    head = "%-13s %-10s %-16s %-16s %-5s %10s %10s" % (
        "phase", "entity", "counted", "reference", "match", "mean ms", "median ms")
    out = [head, "-" * len(head)]
    for r in rows:
        out.append("%-13s %-10s %-16s %-16s %-5s %10.2f %10.2f" % (
            r.phase, r.entity, "/".join(map(str, r.counts.as_tuple())), "/".join(map(str, r.reference)),
            "yes" if r.matches else "NO", r.mean_ms, r.median_ms))
    out.append("counts are point multiplications/additions/pairings/target exponentiations")
    return "\n".join(out) + "\n"
