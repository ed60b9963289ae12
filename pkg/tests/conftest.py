import random
from dataclasses import dataclass

import pytest
from hypothesis import HealthCheck, settings

from crowdsense import geo, group
from crowdsense.protocol import parties as P
from crowdsense.protocol.setup import service_setup

settings.register_profile(
    "crowdsense", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)
settings.load_profile("crowdsense")

GRID = (6, 6)


@pytest.fixture(scope="session")
def small_setup():
    return service_setup(random.Random(1), V=16, grid=GRID)


@pytest.fixture
def rng():
    return random.Random(1234)


def register(ta, party, P0):
    nonce = ta.issue_nonce()
    return party.finish_registration(ta.register(party.registration_request(nonce), nonce, P0))


@dataclass
class World:
    setup: object
    ta: P.TrustedAuthority
    sp: P.ServiceProvider
    customer: P.Customer
    user: P.MobileUser
    num: int
    task: P.OpenedTask
    rng: random.Random

    def report(self, value=7, tau=1, Q=10, user=None, task=None):
        user = user or self.user
        nonce = self.sp.issue_nonce()
        with group.uncounted():
            m = self.setup.public.gens.G ** value
        return user.report(task or self.task, m, tau, Q, nonce), nonce, m

    def new_user(self, name, P0=20, route=((1, 1),)):
        u = P.MobileUser(name, self.setup.public, self.rng)
        register(self.ta, u, P0)
        nonce = self.sp.issue_nonce()
        offers = self.sp.match_tasks(u.match_request(geo.GridRegion.of(*GRID, route), nonce), nonce)
        return u, u.open_offer(offers[0])


def build_world(setup, seed=5, P0=20):
    rng = random.Random(seed)
    ta = P.TrustedAuthority(setup, rng=rng)
    sp = P.ServiceProvider(setup.public, setup.beta, rng=rng)
    cust = P.Customer(b"customer", setup.public, rng)
    user = P.MobileUser(b"user", setup.public, rng)
    register(ta, cust, 10)
    register(ta, user, P0)
    nonce = sp.issue_nonce()
    up, secret = cust.post_task(b"measure noise", 10, geo.GridRegion.box(*GRID, 0, 3, 0, 3), 1.0, 2, nonce)
    num = sp.accept_task(up, nonce)
    cust.task_accepted(num, secret)
    nonce = sp.issue_nonce()
    offers = sp.match_tasks(user.match_request(geo.GridRegion.of(*GRID, [(1, 1)]), nonce), nonce)
    task = user.open_offer(offers[0])
    sp.clock = 1
    return World(setup, ta, sp, cust, user, num, task, rng)


@pytest.fixture
def world(small_setup):
    return build_world(small_setup)


# ------------------------------------------------------- acceptance verdicts

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record a verdict for an acceptance criterion; several records are combined."""

    def record(number, ok, detail=""):
        ACCEPTANCE.setdefault(number, []).append((bool(ok), detail))
        print("criterion %d: %s %s" % (number, "PASS" if ok else "FAIL", detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p for p, _ in parts)
        details = "; ".join(d for p, d in parts if d and (not ok and not p or ok))
        terminalreporter.write_line("criterion %2d: %s  %s" % (number, "PASS" if ok else "FAIL", details))
