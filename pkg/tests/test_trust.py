from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crowdsense import trust
from crowdsense.trust import (CellOutsideArea, StrategyProfile, TrustConfig, TrustError, default_similarity,
                              group_reports, trust_levels)

positive = st.floats(0.01, 1.0, allow_nan=False)
thresholds = st.integers(1, 1000)


@given(st.lists(st.tuples(positive, thresholds), min_size=1, max_size=8), st.floats(0.1, 10), st.floats(0.05, 1))
def test_all_positive_group_sums_to_weight_times_gamma(members, gamma, omega):
    cfg = TrustConfig({(0, 0): omega, (0, 1): 1 - omega} if omega < 1 else {(0, 0): 1.0}, gamma)
    ids = list(range(len(members)))
    sims = {(i, (0, 0)): v * gamma for i, (v, _) in zip(ids, members)}
    res = trust_levels({(0, 0): ids}, sims, {i: q for i, (_, q) in zip(ids, members)}, cfg)
    assert abs(sum(res.levels.values()) - omega * gamma) <= 1e-9
    assert not res.clamped and not res.degenerate


@given(positive, thresholds, st.floats(0.1, 10))
def test_single_report_gets_gamma(v, q, gamma):
    res = trust_levels({(0, 0): ["r"]}, {("r", (0, 0)): v * gamma}, {"r": q}, TrustConfig({(0, 0): 1.0}, gamma))
    assert res.levels["r"] == gamma


def test_exact_with_fractions():
    cfg = TrustConfig({(0, 0): Fraction(1, 3), (0, 1): Fraction(2, 3)}, Fraction(2))
    groups = {(0, 0): ["a", "b"], (0, 1): ["a"]}
    sims = {("a", (0, 0)): Fraction(1), ("b", (0, 0)): Fraction(1, 2), ("a", (0, 1)): Fraction(1)}
    res = trust_levels(groups, sims, {"a": 4, "b": 8}, cfg)
    # cell (0,0): rho = 4 and 4, so each gets 1/2 * 1/3 * 2; cell (0,1): a alone gets 2/3 * 2
    assert res.per_cell[("a", (0, 0))] == Fraction(1, 3)
    assert res.per_cell[("a", (0, 1))] == Fraction(4, 3)
    assert res.levels == {"a": Fraction(5, 6), "b": Fraction(1, 3)}


def test_degenerate_group():
    res = trust_levels({(0, 0): ["a", "b"]}, {("a", (0, 0)): 1.0, ("b", (0, 0)): -1.0},
                       {"a": 5, "b": 5}, TrustConfig({(0, 0): 1.0}, 1.0))
    assert res.degenerate == [(0, 0)]
    assert res.levels == {"a": 0, "b": 0}


def test_mixed_signs_clamp():
    res = trust_levels({(0, 0): ["a", "b"]}, {("a", (0, 0)): 1.0, ("b", (0, 0)): -0.5},
                       {"a": 10, "b": 10}, TrustConfig({(0, 0): 1.0}, 1.0))
    assert res.clamped == ["a"]
    assert res.levels["a"] == 1.0 and res.levels["b"] == -1.0


def test_negative_total_flips_signs():
    # a large negative rho outweighs the positives; the ratio then flips every sign
    res = trust_levels({(0, 0): ["h", "liar"]}, {("h", (0, 0)): 1.0, ("liar", (0, 0)): -1.0},
                       {"h": 5, "liar": 20}, TrustConfig({(0, 0): 1.0}, 1.0))
    assert res.levels["h"] < 0 < res.levels["liar"]


def test_config_validation():
    with pytest.raises(TrustError):
        TrustConfig({(0, 0): 0.5}, 1.0)
    with pytest.raises(TrustError):
        TrustConfig({(0, 0): 1.0}, 0)
    with pytest.raises(TrustError):
        TrustConfig({}, 1.0)
    with pytest.raises(TrustError):
        TrustConfig({(0, 0): 1.5, (0, 1): -0.5}, 1.0)
    assert TrustConfig.uniform([(0, 0), (1, 1), (2, 2), (3, 3)], 1.0).weights[(1, 1)] == 0.25


def test_similarity_range_checked():
    with pytest.raises(TrustError):
        trust_levels({(0, 0): ["a"]}, {("a", (0, 0)): 2.0}, {"a": 1}, TrustConfig({(0, 0): 1.0}, 1.0))
    with pytest.raises(CellOutsideArea):
        trust_levels({(9, 9): ["a"]}, {("a", (9, 9)): 1.0}, {"a": 1}, TrustConfig({(0, 0): 1.0}, 1.0))


def test_grouping():
    groups = group_reports({"a": [(0, 0), (0, 1)], "b": [(0, 1)]}, [(0, 0), (0, 1), (1, 1)])
    assert groups == {(0, 0): ["a"], (0, 1): ["a", "b"]}
    with pytest.raises(CellOutsideArea):
        group_reports({"a": [(5, 5)]}, [(0, 0)])
    with pytest.raises(CellOutsideArea):
        group_reports({"a": []}, [(0, 0)])


def test_default_similarity():
    sims = default_similarity({"a": 50, "b": 51, "c": 49, "d": 500, "e": -50}, 2.0)
    assert sims["a"] == 2.0
    assert 1.0 <= sims["b"] < 2.0 and 1.0 <= sims["c"] < 2.0
    assert -2.0 <= sims["d"] < 0 and sims["e"] < 0
    assert all(-2.0 <= v <= 2.0 for v in sims.values())


# ------------------------------------------------------------------ rates


def oracle_rates(P, Q, tb, w):
    n = len(P)

    def top(vals):
        return {i for i in range(n)
                if sum(vals[j] > vals[i] or (vals[j] == vals[i] and tb[j] < tb[i]) for j in range(n)) < w}

    sel, top_p = top(Q), top(P)
    q_min = min(Q[i] for i in sel)
    U = {i for i in range(n) if P[i] > q_min}
    return {"accuracy_a": len(sel & top_p) / w, "accuracy_b": len(U) / n,
            "privacy_a": len(top_p & U) / len(U), "privacy_b": len(sel & U) / len(U)}


@pytest.mark.parametrize("strategy", trust.STRATEGIES)
def test_rates_match_brute_force(strategy):
    prof = StrategyProfile(strategy)
    sums = dict.fromkeys(trust.RATES, 0.0)
    for j in range(3):
        trial = trust.sample_trial(5, prof, np.random.default_rng([4, j]))
        P, Q, tb = trial.P.tolist(), trial.Q.tolist(), trial.tiebreak.tolist()
        want = oracle_rates(P, Q, tb, 2)
        assert trust.trial_rates(trial, 2) == pytest.approx(want, abs=0)
        for k in sums:
            sums[k] += want[k]
    got = trust.simulate_rates(5, 2, strategy, 3, 4)
    assert got == pytest.approx({k: v / 3 for k, v in sums.items()}, abs=1e-15)


def test_rates_hand_example():
    # P = 10, 8, 6, 4; Q = 2, 7, 5, 1; w = 2 -> Sel = {1, 2}, TopP = {0, 1}, q_min = 5, U = {0, 1, 2}
    trial = trust.Trial(np.array([10, 8, 6, 4]), np.array([2, 7, 5, 1]), np.arange(4))
    assert trust.trial_rates(trial, 2) == {"accuracy_a": 0.5, "accuracy_b": 0.75,
                                           "privacy_a": 2 / 3, "privacy_b": 2 / 3}


@given(st.sampled_from(trust.STRATEGIES), st.integers(0, 2 ** 32))
def test_strategy_bounds(kind, seed):
    P = np.random.default_rng(seed).integers(1, 1000, size=50)
    Q = StrategyProfile(kind).sample(P, np.random.default_rng(seed + 1))
    assert Q.dtype.kind == "i"
    assert ((0 <= Q) & (Q < P)).all()
    if kind == "truthful":
        assert (Q == P - 1).all()


def test_strategy_means_ordered():
    P = np.full(20000, 1000)
    rng = np.random.default_rng(0)
    hi = StrategyProfile("gaussian-high").sample(P, rng).mean()
    lo = StrategyProfile("gaussian-low").sample(P, rng).mean()
    uni = StrategyProfile("uniform").sample(P, rng).mean()
    assert lo < uni < hi


def test_simulation_validation():
    with pytest.raises(ValueError):
        trust.simulate_rates(5, 6, "uniform", 1, 0)
    with pytest.raises(ValueError):
        trust.simulate_rates(5, 2, "uniform", 0, 0)
    with pytest.raises(ValueError):
        StrategyProfile("greedy")
    with pytest.raises(ValueError):
        trust.sweep("x-sweep", [1], ["uniform"], 1, 0)


def test_sweep_csv_is_reproducible():
    a = trust.rows_to_csv(trust.sweep("n-sweep", [50, 80], ["uniform", "gaussian-low"], 5, 3, fixed=10))
    b = trust.rows_to_csv(trust.sweep("n-sweep", [50, 80], ["uniform", "gaussian-low"], 5, 3, fixed=10))
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "sweep,N,w,strategy,rate,value"
    assert len(lines) == 1 + 2 * 2 * 4
    assert lines[1].startswith("n-sweep,50,10,uniform,accuracy_a,")
