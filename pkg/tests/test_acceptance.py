"""Acceptance criteria 1-9, each asserted at its stated tolerance.

Every test appends one (criterion, passed, detail) line to ``conftest.ACCEPTANCE``;
the pytest terminal summary prints them. Run directly with
``python3 tests/test_acceptance.py``.
"""

import math
import random
import sys
import time
from fractions import Fraction as F

import pytest

from conftest import ACCEPTANCE, load_model, load_strategy
from oracles import (enumerate_event_probability, oracle_spg, oracle_sspe, oracle_sspp, oracle_ssppq_feasible,
                     oracle_sspwe, random_mdp, vertex_enumeration)
from stochpath.bwc import solve_sspwe
from stochpath.classic import evaluate_worst_case, solve_spg, solve_sspe, solve_sspp
from stochpath.model import INF, Distribution, exact_event_probability, exact_expectation, induce_chain
from stochpath.multienv import MultiEnvQuery, evaluate_multienv, solve_sspme_gap
from stochpath.percentile import PercentileConstraint, PercentileQuery, solve_ssppq
from stochpath.report import Decision
from stochpath.simulate import SimConstraint, simulate
from test_lp import build, random_lp

FIG3_QUERY = MultiEnvQuery("work", (40, 40, 50, 75), (F(95, 100),) * 4, F(1, 100))
FIG2_QUERY = PercentileQuery((PercentileConstraint("work", "time", 40, F(4, 5)),
                              PercentileConstraint("work", "cost", 10, F(1, 2))))


def record(criterion, checks, detail):
    failed = [name for name, ok in checks.items() if not ok]
    ok = not failed
    ACCEPTANCE.append((criterion, ok, detail + ("" if ok else f" [failed: {', '.join(failed)}]")))
    assert ok, f"criterion {criterion}: {', '.join(failed)}; {detail}"


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_criterion_1_sspe():
    fig1 = load_model("commute.mdp")
    r, secs = timed(solve_sspe, fig1, "work")
    w = r.witness
    record(1, {
        "value 33": r.achieved["expectation"] == 33,
        "pure memoryless": w.is_pure() and w.is_memoryless(),
        "plays car": w.next_action[(fig1.initial, w.memory[0])] == Distribution.dirac("car"),
        "runtime < 1 s": secs < 1,
    }, f"expectation={r.achieved['expectation']} in {secs:.3f}s")


def test_criterion_2_sspp():
    fig1 = load_model("commute.mdp")
    yes, s1 = timed(solve_sspp, fig1, "work", 40, F(95, 100))
    no, s2 = timed(solve_sspp, fig1, "work", 40, 1)
    brute = oracle_sspp(fig1, {"work"}, 40)
    record(2, {
        "YES at 95/100": yes.decision is Decision.YES,
        "achieved exactly 99/100": yes.achieved["probability"] == F(99, 100),
        "witness verified": enumerate_event_probability(fig1, yes.witness, {"work"}, 0, 40)
        == yes.achieved["probability"],
        "NO at 1": no.decision is Decision.NO and brute < 1,
        "runtime < 1 s": s1 + s2 < 1,
    }, f"achieved={yes.achieved['probability']} (budget recursion optimum {brute}), "
       f"alpha=1 -> {no.decision.value}, {s1 + s2:.3f}s")


def test_criterion_3_spg():
    fig1 = load_model("commute.mdp")
    r, secs = timed(solve_spg, fig1, "work", 60)
    wait = evaluate_worst_case(fig1, load_strategy("wait-forever.strat"), "work")
    record(3, {
        "YES": r.decision is Decision.YES,
        "value 45": r.achieved["worst_case"] == 45 == oracle_spg(fig1, {"work"}),
        "bike": r.witness.next_action[(fig1.initial, r.witness.memory[0])] == Distribution.dirac("bike"),
        "wait-forever is inf": wait == INF,
        "runtime < 1 s": secs < 1,
    }, f"worst_case={r.achieved['worst_case']}, wait-forever={wait}, {secs:.3f}s")


def test_criterion_4_sspwe():
    fig1 = load_model("commute.mdp")
    r, s1 = timed(solve_sspwe, fig1, "work", 60, 38)
    no, s2 = timed(solve_sspwe, fig1, "work", 60, 33)
    worst = evaluate_worst_case(fig1, r.witness, "work") if r.witness else INF
    expect = exact_expectation(induce_chain(fig1, r.witness), {"work"}) if r.witness else INF
    record(4, {
        "YES": r.decision is Decision.YES,
        "worst case 58": worst == 58,
        "expectation exactly 7469/200": expect == F(7469, 200),
        "NO at 33": no.decision is Decision.NO,
        "runtime < 5 s": s1 + s2 < 5,
    }, f"worst={worst}, expectation={expect} (oracle {oracle_sspwe(fig1, {'work'}, 60)}), "
       f"l2=33 -> {no.decision.value}, {s1 + s2:.3f}s")


def test_criterion_5_ssppq():
    fig2 = load_model("commute2d.mdp")
    r, secs = timed(solve_ssppq, fig2, FIG2_QUERY)
    bt, coin = load_strategy("bus-then-taxi.strat"), load_strategy("coin.strat")
    bt_time = exact_event_probability(induce_chain(fig2, bt), {"work"}, 0, 40)
    bt_cost = exact_event_probability(induce_chain(fig2, bt), {"work"}, 1, 10)
    coin_time = exact_event_probability(induce_chain(fig2, coin), {"work"}, 0, 40)
    record(5, {
        "YES": r.decision is Decision.YES,
        "bus-then-taxi time 997/1000": bt_time == F(997, 1000),
        "bus-then-taxi cost 7/10": bt_cost == F(7, 10),
        "coin time exactly 102/125": coin_time == F(102, 125),
        "runtime < 5 s": secs < 5,
    }, f"achieved={tuple(str(v) for v in r.achieved.values())}, bus-then-taxi=({bt_time}, {bt_cost}), coin time={coin_time}, "
       f"{secs:.3f}s")


def test_criterion_6_sspme():
    fig3 = load_model("commute-env.mdp")
    t0 = time.perf_counter()
    paper = evaluate_multienv(fig3, load_strategy("paper-sec6.strat"), FIG3_QUERY)
    r = solve_sspme_gap(fig3, FIG3_QUERY)
    verified = evaluate_multienv(fig3, r.witness, FIG3_QUERY) if r.witness else ()
    secs = time.perf_counter() - t0
    lower = (F(99, 100), F(99, 100), F(972, 1000), F(99, 100))
    record(6, {
        "paper strategy vector": paper == (F(9981, 10000), F(99, 100), F(243, 250), F(9999, 10000)),
        "paper lower bounds": all(p >= b for p, b in zip(paper, lower)),
        "YES": r.decision is Decision.YES,
        "witness verified": bool(verified) and all(p >= a for p, a in zip(verified, FIG3_QUERY.thresholds)),
        "runtime < 60 s": secs < 60,
    }, f"paper strategy={tuple(str(p) for p in paper)}, witness={tuple(str(p) for p in verified)}, {secs:.2f}s")


def _random_checks(seed):
    """One random MDP against every oracle; returns the list of mismatches."""
    rng = random.Random(seed)
    bad = []
    m = random_mdp(rng)
    T = m.target_set("goal")

    if solve_sspe(m, T).achieved["expectation"] != oracle_sspe(m, T):
        bad.append("sspe")

    bound = rng.randint(0, 8)
    opt = oracle_sspp(m, T, bound)
    if solve_sspp(m, T, bound, opt).decision is not Decision.YES:
        bad.append("sspp-yes")
    if opt < 1 and solve_sspp(m, T, bound, (1 + opt) / 2).decision is not Decision.NO:
        bad.append("sspp-no")

    wc = oracle_spg(m, T)
    if (solve_spg(m, T, bound).decision is Decision.YES) != (wc <= bound):
        bad.append("spg")

    worst = rng.randint(1, 8)
    best = oracle_sspwe(m, T, worst)
    if best == INF:
        if solve_sspwe(m, T, worst, 10**6).decision is not Decision.NO:
            bad.append("sspwe-unsafe")
    else:
        if solve_sspwe(m, T, worst, best).decision is not Decision.YES:
            bad.append("sspwe-yes")
        if best > 0 and solve_sspwe(m, T, worst, best - F(1, 100)).decision is not Decision.NO:
            bad.append("sspwe-no")

    m2 = random_mdp(rng, dims=2)
    T2 = m2.target_set("goal")
    other = frozenset({m2.states[rng.randrange(len(m2.states))]}) | T2
    cons = [(T2, 0, rng.randint(0, 8)), (other, 1, rng.randint(0, 8))]
    alphas = (F(rng.randint(0, 10), 10), F(rng.randint(0, 10), 10))
    q = PercentileQuery(tuple(PercentileConstraint(t, k, b, a) for (t, k, b), a in zip(cons, alphas)))
    if (solve_ssppq(m2, q).decision is Decision.YES) != oracle_ssppq_feasible(m2, cons, alphas):
        bad.append("ssppq")
    return bad


def test_criterion_7_oracle_suite():
    mismatches = {}
    for seed in range(200):
        bad = _random_checks(seed)
        if bad:
            mismatches[seed] = bad
    record(7, {"zero mismatches": not mismatches},
           f"200 random MDPs x 5 problems, mismatches={mismatches or 0}")


def test_criterion_8_lp_kernel():
    from stochpath.lp import solve_lp
    violations = []
    for seed in range(100):
        rng = random.Random(seed)
        data = random_lp(rng, rng.randint(1, 4), rng.randint(1, 5))
        lp = build(*data)
        res = solve_lp(lp)
        status, value = vertex_enumeration(*data)
        if res.status != status:
            violations.append((seed, "status"))
        elif status == "optimal" and (res.objective != value or not lp.is_feasible(res.values)
                                      or lp.evaluate(res.values) != value):
            violations.append((seed, "optimum"))
        elif status == "infeasible" and not res.certificate.verify():
            violations.append((seed, "certificate"))
    record(8, {"zero violations": not violations}, f"100 random LPs, violations={violations or 0}")


def _witness_battery():
    """(model, strategy, constraints, exact values) for the witnesses of criteria 1-6."""
    fig1, fig2, fig3 = load_model("commute.mdp"), load_model("commute2d.mdp"), load_model("commute-env.mdp")
    work = frozenset({"work"})
    out = []
    w = solve_sspe(fig1, "work").witness
    out.append(("1", fig1, w, [SimConstraint("mean", work)], {"mean": F(33)}))
    w = solve_sspp(fig1, "work", 40, F(95, 100)).witness
    out.append(("2", fig1, w, [SimConstraint("p40", work, 0, 40)],
                {"p40": exact_event_probability(induce_chain(fig1, w), work, 0, 40)}))
    w = solve_spg(fig1, "work", 60).witness
    out.append(("3", fig1, w, [SimConstraint("p60", work, 0, 60), SimConstraint("mean", work)],
                {"p60": F(1), "mean": exact_expectation(induce_chain(fig1, w), work)}))
    w = solve_sspwe(fig1, "work", 60, 38).witness
    out.append(("4", fig1, w, [SimConstraint("p60", work, 0, 60), SimConstraint("mean", work)],
                {"p60": F(1), "mean": exact_expectation(induce_chain(fig1, w), work)}))
    w = solve_ssppq(fig2, FIG2_QUERY).witness
    ch = induce_chain(fig2, w)
    out.append(("5", fig2, w, [SimConstraint("time", work, 0, 40), SimConstraint("cost", work, 1, 10)],
                {"time": exact_event_probability(ch, work, 0, 40), "cost": exact_event_probability(ch, work, 1, 10)}))
    w = solve_sspme_gap(fig3, FIG3_QUERY).witness
    for i, (env, b) in enumerate(zip(fig3.environments(), FIG3_QUERY.bounds)):
        out.append((f"6/{fig3.env_names[i]}", env, w, [SimConstraint("p", work, 0, b)],
                    {"p": exact_event_probability(induce_chain(env, w), work, 0, b)}))
    return out


def test_criterion_9_simulation():
    runs = 100_000
    battery = _witness_battery()
    good_seeds = 0
    misses = []
    for seed in range(20):
        ok = True
        for name, model, strategy, cons, exact in battery:
            rep = simulate(model, strategy, cons, runs=runs, seed=seed)
            for c in cons:
                est, p = rep.empirical[c.label], exact[c.label]
                if c.bound is None:
                    tol = rep.ci_halfwidth[c.label]
                else:
                    tol = 3 * math.sqrt(float(p) * (1 - float(p)) / runs)
                if not abs(est - float(p)) <= tol:
                    ok = False
                    misses.append((seed, name, c.label))
        good_seeds += ok
    record(9, {">= 19/20 seeds within 3 sigma": good_seeds >= 19},
           f"{good_seeds}/20 seeds, {len(battery)} witness runs per seed, misses={misses or 0}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
