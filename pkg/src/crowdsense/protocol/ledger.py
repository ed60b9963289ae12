"""Report ledger, top-w selection and double-report tracing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .. import group
from ..group import ORDER, Target
from .messages import Report
from .setup import TaRecordStore


class LedgerError(Exception):
    pass


class XCollision(LedgerError):
    """Two reports share both Y and X, so W is undefined."""


class DuplicateReport(LedgerError):
    pass


@dataclass(frozen=True)
class DoubleReport:
    first: Report
    second: Report


class ReportLedger:
    """Accepted reports keyed by (num, tau) and then by the encoding of Y."""

    def __init__(self):
        self._slices: Dict[Tuple[int, int], Dict[bytes, Report]] = {}

    def add(self, report: Report) -> Optional[DoubleReport]:
        """Store ``report``; a Y collision with a different X is returned instead of stored."""
        sl = self._slices.setdefault((report.num, report.tau), {})
        key = report.Y.encode()
        prior = sl.get(key)
        if prior is None:
            sl[key] = report
            return None
        if prior.X == report.X:
            raise DuplicateReport("same report submitted twice")
        return DoubleReport(prior, report)

    def slice(self, num: int, tau: int) -> List[Report]:
        return list(self._slices.get((num, tau), {}).values())

    def find(self, num: int, tau: int, Y: Target) -> Report:
        try:
            return self._slices[(num, tau)][Y.encode()]
        except KeyError:
            raise LedgerError("no report with this Y in the slot") from None

    def slots(self):
        return sorted(self._slices)


def select_reports(reports: List[Report], w: int) -> List[Report]:
    """Top-w by claimed threshold; ties go to the lower Y encoding."""
    if not reports:
        raise LedgerError("no reports to select from")
    if w < 1:
        raise ValueError("w must be positive")
    return sorted(reports, key=lambda r: (-r.Q, r.Y.encode()))[:w]


def compute_w(r1: Report, r2: Report) -> Target:
    """W = (Z2^X1 / Z1^X2)^(1/(X1 - X2)), which strips the v-dependent factor."""
    if r1.Y != r2.Y:
        raise LedgerError("reports do not share Y")
    d = (r1.X - r2.X) % ORDER
    if d == 0:
        raise XCollision("reports share X")
    return (r2.Z ** r1.X / r1.Z ** r2.X) ** group.inv(d)


def trace_greedy(r1: Report, r2: Report, store: TaRecordStore) -> bytes:
    return store.identity_for_tag(compute_w(r1, r2))
