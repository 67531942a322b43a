import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_strategy
from oracles import enumerate_event_probability, oracle_sspp, random_distribution, random_mdp
from stochpath.model import Distribution, MooreStrategy, WeightedMdp, exact_event_probability, induce_chain
from stochpath.multienv import MultiEnvMdp, MultiEnvQuery, belief_support_product, evaluate_multienv, solve_sspme_gap
from stochpath.report import Decision

FIG3_BOUNDS = (40, 40, 50, 75)


def fig3_query(alpha=F(95, 100), eps=F(1, 100)):
    return MultiEnvQuery("work", FIG3_BOUNDS, (alpha,) * 4, eps)


def learn_in_one_step():
    """Action ``a`` reveals the environment: it moves to ``t`` in env 0 and stays in env 1."""
    states = ("s", "t", "g")
    enabled = {"s": ("a", "b"), "t": ("c",), "g": ("z",)}
    delta = {("s", "a"): Distribution.dirac("t"), ("s", "b"): Distribution.dirac("s"),
             ("t", "c"): Distribution.dirac("g"), ("g", "z"): Distribution.dirac("g")}
    base = WeightedMdp(states, "s", enabled, delta, {x: (1,) for x in "abcz"})
    env1 = {("s", "a"): Distribution.dirac("s"), ("s", "b"): Distribution.dirac("g")}
    return MultiEnvMdp(base, ("e0", "e1"), ({}, env1))


def swapped_coin():
    states = ("s", "t")
    enabled = {"s": ("a",), "t": ("z",)}
    base = WeightedMdp(states, "s", enabled,
                       {("s", "a"): Distribution({"t": F(9, 10), "s": F(1, 10)}), ("t", "z"): Distribution.dirac("t")},
                       {"a": (1,), "z": (1,)})
    swapped = {("s", "a"): Distribution({"t": F(1, 10), "s": F(9, 10)})}
    return MultiEnvMdp(base, ("x", "y"), ({}, swapped))


def random_memdp(rng, k=2):
    base = random_mdp(rng)
    blocks = []
    for _ in range(k - 1):
        block = {}
        for key in base.delta:
            if rng.random() < 0.4:
                block[key] = random_distribution(rng, base.states)
        blocks.append(block)
    return MultiEnvMdp(base, tuple(f"e{i}" for i in range(k)), ({},) + tuple(blocks))


class TestEvaluate:
    def test_paper_strategy(self, fig3):
        vec = evaluate_multienv(fig3, load_strategy("paper-sec6.strat"), fig3_query())
        assert vec == (F(9981, 10000), F(99, 100), F(243, 250), F(9999, 10000))
        assert all(p >= b for p, b in zip(vec, (F(99, 100), F(99, 100), F(972, 1000), F(99, 100))))

    def test_car_then_alternative(self, fig3):
        s = MooreStrategy.memoryless({"home": "car", "h2": "alternative"}, fig3.base)
        q = MultiEnvQuery("work", (40,) * 4, (0,) * 4)
        assert evaluate_multienv(fig3, s, q) == (F(9, 10),) * 4

    def test_car_without_alternative_fails_under_accident(self, fig3):
        s = MooreStrategy.memoryless({"home": "car", "h2": "go_h2"}, fig3.base)
        q = MultiEnvQuery("work", (1000,) * 4, (0,) * 4)
        vec = evaluate_multienv(fig3, s, q)
        assert vec[1] == 0 and vec[3] == 0 and vec[0] > 0

    def test_single_environment(self, fig1):
        me = MultiEnvMdp(fig1, ("only",), ({},))
        s = load_strategy("car.strat")
        q = MultiEnvQuery("work", (40,), (0,))
        assert evaluate_multienv(me, s, q) == (exact_event_probability(induce_chain(fig1, s), {"work"}, 0, 40),)

    def test_wrong_arity(self, fig3):
        with pytest.raises(ValueError):
            evaluate_multienv(fig3, load_strategy("paper-sec6.strat"), MultiEnvQuery("work", (40,), (0,)))


class TestBeliefs:
    def test_fig3_train_excludes_strike(self, fig3):
        bp = belief_support_product(fig3)
        (succ,) = [y for y in bp.edges[(("station", frozenset(range(4))), "wait")] if y[0] == "train"]
        assert succ[1] == frozenset({0, 1})

    def test_single_environment_is_the_model(self, fig1):
        bp = belief_support_product(MultiEnvMdp(fig1, ("only",), ({},)))
        assert {s for s, _ in bp.states} == set(fig1.states)
        assert bp.supports() == {frozenset({0})}

    def test_swapped_probabilities_never_shrink(self):
        bp = belief_support_product(swapped_coin())
        assert bp.supports() == {frozenset({0, 1})}
        assert not bp.pinned
        assert bp.limit_pairs == {(0, 1)}

    def test_one_step_pins(self):
        bp = belief_support_product(learn_in_one_step())
        assert ("t", frozenset({0})) in bp.pinned
        assert ("s", frozenset({1})) in bp.pinned

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 3))
    def test_supports_shrink_along_edges(self, seed, k):
        bp = belief_support_product(random_memdp(random.Random(seed), k))
        for (x, _), succs in bp.edges.items():
            for y in succs:
                assert y[1] and y[1] <= x[1]


class TestGap:
    def test_fig3(self, fig3):
        r = solve_sspme_gap(fig3, fig3_query())
        assert r.decision is Decision.YES
        vec = evaluate_multienv(fig3, r.witness, fig3_query())
        assert all(p >= F(95, 100) for p in vec)
        for env, b, p in zip(fig3.environments(), FIG3_BOUNDS, vec):
            assert enumerate_event_probability(env, r.witness, {"work"}, 0, b) == p

    def test_fig3_impossible(self, fig3):
        r = solve_sspme_gap(fig3, MultiEnvQuery("work", (30, 40, 50, 75), (F(95, 100),) * 4, F(1, 100)))
        assert r.decision is Decision.NO

    def test_epsilon_zero_rejected(self, fig3):
        with pytest.raises(ValueError):
            solve_sspme_gap(fig3, fig3_query(eps=0))

    def test_learning_gadget(self):
        r = solve_sspme_gap(learn_in_one_step(), MultiEnvQuery("g", (2, 2), (1, 1), F(1, 100)))
        assert r.decision is Decision.YES

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6), st.integers(0, 6), st.fractions(0, 1, max_denominator=10))
    def test_single_environment_degenerates(self, seed, bound, alpha):
        m = random_mdp(random.Random(seed))
        T = m.target_set("goal")
        opt = oracle_sspp(m, T, bound)
        eps = F(1, 20)
        for k in (1, 2):
            me = MultiEnvMdp(m, tuple(f"e{i}" for i in range(k)), ({},) * k)
            r = solve_sspme_gap(me, MultiEnvQuery(T, (bound,) * k, (alpha,) * k, eps))
            if opt >= alpha:
                assert r.decision is Decision.YES
            elif opt < alpha - eps:
                assert r.decision is Decision.NO
            else:
                assert r.decision is not Decision.YES

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 6), st.fractions(0, 1, max_denominator=10))
    def test_sound_verdicts(self, seed, bound, alpha):
        me = random_memdp(random.Random(seed))
        T = me.base.target_set("goal")
        q = MultiEnvQuery(T, (bound, bound + 1), (alpha, alpha), F(1, 20))
        r = solve_sspme_gap(me, q)
        if r.decision is Decision.YES:
            for env, b in zip(me.environments(), q.bounds):
                assert enumerate_event_probability(env, r.witness, T, 0, b) >= alpha
        elif r.decision is Decision.NO:
            assert any(oracle_sspp(env, T, b) < alpha - q.epsilon for env, b in zip(me.environments(), q.bounds))
