import random
from fractions import Fraction as F

from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_spg, oracle_sspe, oracle_sspwe, random_mdp, surely_within
from stochpath.bwc import compute_safe_actions, solve_sspwe
from stochpath.classic import evaluate_worst_case, solve_spg
from stochpath.model import INF, exact_expectation, induce_chain
from stochpath.report import Decision
from stochpath.unfolding import SINK, build_unfolding


def fig1_safe(fig1, bound=60, on_pass=None):
    unf = build_unfolding(fig1, bound)
    tp = unf.target_prime({"work"})
    return unf, compute_safe_actions(unf, tp, on_pass)


def test_targets_keep_all_actions(fig1):
    unf, safe = fig1_safe(fig1)
    for x in unf.target_prime({"work"}):
        assert safe[x] == unf.mdp.enabled[x]


def test_sink_is_hopeless(fig1):
    unf, safe = fig1_safe(fig1)
    assert SINK in unf.mdp.states and safe[SINK] == ()


def test_wait_safe_threshold(fig1):
    unf, safe = fig1_safe(fig1)
    ok = surely_within(fig1, {"work"}, 0)
    waits = [x for x in unf.mdp.states if x != SINK and x[0] == "waiting"]
    assert waits
    for x in waits:
        v = x[1][0]
        expected = all(ok(t, 60 - v - 3) for t in fig1.delta[("waiting", "wait")])
        assert ("wait" in safe[x]) == expected
        # three minutes for the wait, then back home and the bike
        assert expected == (v <= 10)
    assert any(x[1][0] == 10 for x in waits)


def test_passes_shrink_and_stabilise(fig1):
    snaps = []
    fig1_safe(fig1, on_pass=lambda i, s: snaps.append(dict(s)))
    assert len(snaps) >= 2
    for a, b in zip(snaps, snaps[1:]):
        assert all(set(b[x]) <= set(a[x]) for x in a)
    assert snaps[-1] == snaps[-2]


def test_fig1_expectation(fig1):
    r = solve_sspwe(fig1, "work", 60, 38)
    assert r.decision is Decision.YES
    assert r.achieved["worst_case"] == 58
    assert r.achieved["expectation"] == F(186671, 5000)
    assert evaluate_worst_case(fig1, r.witness, "work") <= 60
    assert exact_expectation(induce_chain(fig1, r.witness), {"work"}) == F(186671, 5000)


def test_fig1_tight_expectation(fig1):
    assert solve_sspwe(fig1, "work", 60, 33).decision is Decision.NO


def test_worst_case_infeasible(fig1):
    r = solve_sspwe(fig1, "work", 44, 1000)
    assert solve_spg(fig1, "work", 44).decision is Decision.NO
    assert r.decision is Decision.NO and r.achieved["expectation"] == INF


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8))
def test_matches_history_recursion(seed, worst):
    m = random_mdp(random.Random(seed))
    T = m.target_set("goal")
    want = oracle_sspwe(m, T, worst)
    r = solve_sspwe(m, T, worst, 10**6)
    assert r.achieved["expectation"] == want
    if want != INF:
        assert r.decision is Decision.YES
        assert evaluate_worst_case(m, r.witness, T) <= worst
        assert exact_expectation(induce_chain(m, r.witness), T) == want
        # the sandwich: safety needs SP-G within the bound, and the constraint cannot help
        assert oracle_spg(m, T) <= worst
        assert oracle_sspe(m, T) <= want
    else:
        assert oracle_spg(m, T) > worst
