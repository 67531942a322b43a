import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS, corpus_text
from oracles import random_mdp, random_strategy
from stochpath.multienv import MultiEnvMdp
from stochpath.textfmt import (ParseError, format_rational, parse_model, parse_query, parse_rational, parse_strategy,
                               serialize_model, serialize_query, serialize_strategy)

HEADER = "mdp x dims 1\nstate a init\n"


def parse_error(text):
    with pytest.raises(ParseError) as info:
        parse_model(text)
    return info.value


@pytest.mark.parametrize("name", sorted(p.name for p in CORPUS.iterdir() if p.name.endswith(".mdp")))
def test_model_round_trip(name):
    m = parse_model(corpus_text(name))
    again = parse_model(serialize_model(m))
    assert serialize_model(again) == serialize_model(m)
    if isinstance(m, MultiEnvMdp):
        assert [e.delta for e in again.environments()] == [e.delta for e in m.environments()]
    else:
        assert again.delta == m.delta and again.weight == m.weight and again.states == m.states


@pytest.mark.parametrize("name", sorted(p.name for p in CORPUS.iterdir() if p.name.endswith(".query")))
def test_query_round_trip(name):
    q = parse_query(corpus_text(name))
    assert parse_query(serialize_query(q)) == q


@pytest.mark.parametrize("name", sorted(p.name for p in CORPUS.iterdir() if p.name.endswith(".strat")))
def test_strategy_round_trip(name):
    s = parse_strategy(corpus_text(name))
    again = parse_strategy(serialize_strategy(s))
    assert again == s


def test_fig1_shape(fig1):
    assert len(fig1.states) == 7
    assert len(fig1.actions) == 10
    assert fig1.initial == "home"


def test_fig2_shape(fig2):
    assert fig2.dims == 2
    assert fig2.dim_names == ("time", "cost")
    assert fig2.weight["taxi"] == (10, 20)


def test_fig3_env_blocks(fig3):
    assert fig3.env_names == ("()", "(A)", "(S)", "(AS)")
    text = serialize_model(fig3)
    assert [ln for ln in text.splitlines() if ln.startswith("env")] == ["env ()", "env (A)", "env (S)", "env (AS)"]


def test_lowest_terms():
    m = parse_model(HEADER + "action a go weight 1 -> a 14/20, a2 6/20\nstate a2\naction a2 go2 weight 1 -> a 1\n")
    assert "a 7/10" in serialize_model(m)


class TestErrors:
    def test_empty(self):
        e = parse_error("")
        assert "expected 'mdp' header" in str(e)
        assert (e.line, e.col) == (1, 1)

    def test_duplicate_state(self):
        e = parse_error(HEADER + "state a\n")
        assert "duplicate state" in str(e) and e.line == 3

    def test_sum_not_one(self):
        e = parse_error(HEADER + "action a go weight 1 -> a 1/2\n")
        assert "sum to 1/2" in str(e)

    def test_undeclared(self):
        assert "undeclared state 'b'" in str(parse_error(HEADER + "action a go weight 1 -> b 1\n"))

    def test_no_init(self):
        assert "initial" in str(parse_error("mdp x dims 1\nstate a\naction a go weight 1 -> a 1\n"))

    def test_weight_arity(self):
        assert parse_error("mdp x dims 2\nstate a init\naction a go weight 1 -> a 1\n").line == 3

    def test_query_prob_above_one(self):
        with pytest.raises(ParseError, match="exceeds 1"):
            parse_query("constraint dim=1 target=work bound<=40 prob>=3/2")

    def test_unknown_problem(self):
        with pytest.raises(ParseError):
            parse_query("problem foo")


def test_constraint_record():
    q = parse_query("constraint dim=1 target=work bound<=40 prob>=4/5")
    (c,) = q.constraints
    assert (c.dim, c.target, c.bound, c.prob) == ("1", "work", 40, F(4, 5))


def test_rationals():
    assert parse_rational("0.95") == F(19, 20)
    assert parse_rational("3/6") == F(1, 2)
    assert parse_rational("1e3") is None
    assert format_rational(F(14, 20)) == "7/10"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 2))
def test_random_round_trip(seed, dims):
    rng = random.Random(seed)
    m = random_mdp(rng, dims=dims)
    again = parse_model(serialize_model(m))
    assert (again.states, again.initial, again.delta, again.weight, again.enabled) == \
        (m.states, m.initial, m.delta, m.weight, m.enabled)
    s = random_strategy(rng, m)
    s2 = parse_strategy(serialize_strategy(s))
    assert (s2.initial_memory, dict(s2.next_action)) == (s.initial_memory, dict(s.next_action))
    assert {k: v for k, v in s2.memory_update.items()} == {k: v for k, v in s.memory_update.items()}
