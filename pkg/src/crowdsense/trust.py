"""Trust levels for grouped reports and the threshold-strategy simulation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from statistics import median
from typing import Callable, Dict, Hashable, Iterable, List, Mapping, Sequence, Set, Tuple

import numpy as np

Cell = Tuple[int, int]
ReportId = Hashable


class TrustError(Exception):
    pass


class CellOutsideArea(TrustError):
    pass


# ------------------------------------------------------------- trust levels


@dataclass(frozen=True)
class TrustConfig:
    weights: Mapping[Cell, float]
    gamma: float
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.gamma <= 0:
            raise TrustError("gamma must be positive")
        if not self.weights:
            raise TrustError("no grid weights")
        for z, w in self.weights.items():
            if not 0 < w <= 1:
                raise TrustError("weight of %r outside (0, 1]" % (z,))
        if abs(sum(self.weights.values()) - 1) > self.tolerance:
            raise TrustError("grid weights must sum to 1")

    @classmethod
    def uniform(cls, cells: Iterable[Cell], gamma: float) -> "TrustConfig":
        cells = list(cells)
        return cls({z: 1 / len(cells) for z in cells}, gamma)


def group_reports(report_cells: Mapping[ReportId, Iterable[Cell]],
                  area: Iterable[Cell]) -> Dict[Cell, List[ReportId]]:
    """Place each report in the group of every area cell it covers."""
    area = set(area)
    groups: Dict[Cell, List[ReportId]] = {}
    for rid, cells in report_cells.items():
        cells = set(cells)
        if not cells:
            raise CellOutsideArea("report %r covers no cell" % (rid,))
        stray = cells - area
        if stray:
            raise CellOutsideArea("report %r covers cells outside the area: %s" % (rid, sorted(stray)))
        for z in sorted(cells):
            groups.setdefault(z, []).append(rid)
    return groups


@dataclass
class TrustResult:
    levels: Dict[ReportId, float]
    per_cell: Dict[Tuple[ReportId, Cell], float]
    degenerate: List[Cell] = field(default_factory=list)  # groups with Exp_z == 0
    clamped: List[ReportId] = field(default_factory=list)  # levels cut back to [-gamma, gamma]


def trust_levels(groups: Mapping[Cell, Sequence[ReportId]],
                 similarities: Mapping[Tuple[ReportId, Cell], float],
                 thresholds: Mapping[ReportId, float],
                 config: TrustConfig) -> TrustResult:
    """eps_{i,z} = (rho_{i,z} / Exp_z) * omega_z * gamma with rho = V * Q, averaged over cells.

    Works with floats or Fractions. A group whose rho values cancel to zero
    contributes 0 to each member and is listed in ``degenerate``.
    """
    gamma = config.gamma
    per_cell: Dict[Tuple[ReportId, Cell], float] = {}
    degenerate = []
    for z, members in groups.items():
        if z not in config.weights:
            raise CellOutsideArea("group %r has no weight" % (z,))
        rho = {}
        for i in members:
            V = similarities[(i, z)]
            if not -gamma <= V <= gamma:
                raise TrustError("similarity of %r in %r outside [-gamma, gamma]" % (i, z))
            rho[i] = V * thresholds[i]
        exp_z = sum(rho.values())
        if exp_z == 0:
            degenerate.append(z)
            for i in members:
                per_cell[(i, z)] = 0
            continue
        for i in members:
            per_cell[(i, z)] = rho[i] / exp_z * config.weights[z] * gamma

    by_report: Dict[ReportId, List[float]] = {}
    for (i, _), v in per_cell.items():
        by_report.setdefault(i, []).append(v)
    levels, clamped = {}, []
    for i, vals in by_report.items():
        eps = vals[0] if len(vals) == 1 else sum(vals) / len(vals)
        if eps > gamma or eps < -gamma:
            clamped.append(i)
            eps = max(-gamma, min(gamma, eps))
        levels[i] = eps
    return TrustResult(levels, per_cell, degenerate, clamped)


def default_similarity(values: Mapping[ReportId, float], gamma: float,
                       rel_tol: float = 0.25, abs_tol: float = 1.0) -> Dict[ReportId, float]:
    """Agreement with the group median.

    Within tolerance a report scores in [gamma/2, gamma]. Beyond it, or on
    the opposite side of zero from a nonzero median, it scores in [-gamma, 0].
    """
    med = median(values.values())
    tol = max(rel_tol * abs(med), abs_tol)
    out = {}
    for i, x in values.items():
        dev = abs(x - med) / tol
        opposite = med != 0 and x * med < 0
        if opposite or dev > 1:
            out[i] = -gamma * min(1.0, max(dev - 1, 1.0 if opposite else 0.0))
        else:
            out[i] = gamma * (1 - dev / 2)
    return out


# ----------------------------------------------------------- rate simulation

STRATEGIES = ("uniform", "gaussian-high", "gaussian-low", "truthful")
RATES = ("accuracy_a", "accuracy_b", "privacy_a", "privacy_b")
RESAMPLE_CAP = 32


@dataclass(frozen=True)
class StrategyProfile:
    kind: str

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError("unknown strategy %r" % self.kind)

    def sample(self, P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Integer thresholds with 0 <= Q < P."""
        P = np.asarray(P, dtype=float)
        if self.kind == "truthful":
            return (P - 1).astype(np.int64)
        if self.kind == "uniform":
            return np.floor(rng.random(P.shape) * P).astype(np.int64)
        mean = 0.75 * P if self.kind == "gaussian-high" else 0.25 * P
        sd = 0.25 * P
        q = rng.normal(mean, sd)
        for _ in range(RESAMPLE_CAP):
            bad = (q < 0) | (q >= P)
            if not bad.any():
                break
            q[bad] = rng.normal(mean[bad], sd[bad])
        q = np.clip(np.floor(q), 0, P - 1)
        return q.astype(np.int64)


@dataclass(frozen=True)
class Trial:
    P: np.ndarray
    Q: np.ndarray
    tiebreak: np.ndarray  # random distinct keys standing in for Y encodings


def sample_trial(N: int, strategy: StrategyProfile, rng: np.random.Generator,
                 credit_range: Tuple[int, int] = (1, 1000)) -> Trial:
    lo, hi = credit_range
    P = rng.integers(lo, hi + 1, size=N)
    Q = strategy.sample(P, rng)
    return Trial(P, Q, rng.permutation(N))


def _top(values: np.ndarray, tiebreak: np.ndarray, w: int) -> np.ndarray:
    return np.lexsort((tiebreak, -values))[:w]


def trial_rates(trial: Trial, w: int) -> Dict[str, float]:
    """The four rates for one population.

    Sel: the w highest thresholds. TopP: the w highest credits. U: reports
    whose credit exceeds the smallest selected threshold.
    accuracy_a = |Sel & TopP| / w, accuracy_b = |U| / N,
    privacy_a = |TopP & U| / |U|, privacy_b = |Sel & U| / |U|.
    """
    N = len(trial.P)
    sel = set(_top(trial.Q, trial.tiebreak, w).tolist())
    top_p = set(_top(trial.P, trial.tiebreak, w).tolist())
    q_min = min(trial.Q[i] for i in sel)
    U = set(np.nonzero(trial.P > q_min)[0].tolist())
    return {
        "accuracy_a": len(sel & top_p) / w,
        "accuracy_b": len(U) / N,
        "privacy_a": len(top_p & U) / len(U),
        "privacy_b": len(sel & U) / len(U),
    }


def _check(N: int, w: int, trials: int) -> None:
    if N < 1 or not 1 <= w <= N:
        raise ValueError("need 1 <= w <= N")
    if trials < 1:
        raise ValueError("need at least one trial")


def simulate_rates(N: int, w: int, strategy, trials: int, seed: int,
                   credit_range: Tuple[int, int] = (1, 1000)) -> Dict[str, float]:
    """Mean of each rate over ``trials`` independent populations.

    Trial j draws from its own stream seeded by (seed, j), so results do not
    depend on how trials are scheduled.
    """
    _check(N, w, trials)
    if isinstance(strategy, str):
        strategy = StrategyProfile(strategy)
    totals = dict.fromkeys(RATES, 0.0)
    for j in range(trials):
        rng = np.random.default_rng([seed, j])
        r = trial_rates(sample_trial(N, strategy, rng, credit_range), w)
        for k in RATES:
            totals[k] += r[k]
    return {k: v / trials for k, v in totals.items()}


CSV_COLUMNS = ("sweep", "N", "w", "strategy", "rate", "value")


def sweep(mode: str, points: Sequence[int], strategies: Sequence[str], trials: int, seed: int,
          fixed: int = None) -> List[Tuple]:
    """Rows for a w sweep at fixed N (default 1000) or an N sweep at fixed w (default 100)."""
    rows = []
    for x in points:
        if mode == "w-sweep":
            N, w = fixed or 1000, x
        elif mode == "n-sweep":
            N, w = x, fixed or 100
        else:
            raise ValueError("mode must be w-sweep or n-sweep")
        for s in strategies:
            rates = simulate_rates(N, w, s, trials, seed)
            rows.extend((mode, N, w, s, k, "%.6f" % rates[k]) for k in RATES)
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    wr.writerows(rows)
    return buf.getvalue()
