"""Glue between parsed queries and the solvers, shared by the CLI and tests."""

from __future__ import annotations

from .bwc import solve_sspwe
from .classic import evaluate_worst_case, solve_spg, solve_sspe, solve_sspp
from .model import MooreStrategy, WeightedMdp, exact_event_probability, exact_expectation, induce_chain
from .multienv import MultiEnvMdp, MultiEnvQuery, evaluate_multienv, solve_sspme_gap
from .percentile import PercentileConstraint, PercentileQuery, solve_ssppq, verify_percentiles
from .report import SolveReport
from .simulate import SimConstraint
from .textfmt import PROBLEMS, Query, resolve_dim


class QueryError(ValueError):
    pass


def _need(value, what: str, problem: str):
    if value is None:
        raise QueryError(f"{problem} query needs '{what}'")
    return value


def _plain_model(model, problem: str) -> WeightedMdp:
    if isinstance(model, MultiEnvMdp):
        raise QueryError(f"{problem} expects a single-environment model")
    return model


def problem_of(query: Query, problem: str | None) -> str:
    if problem is None:
        problem = query.problem
    elif query.problem is not None and query.problem != problem:
        raise QueryError(f"query is for '{query.problem}', not '{problem}'")
    if problem not in PROBLEMS:
        raise QueryError(f"unknown or missing problem {problem!r}")
    return problem


def _single_constraint(model: WeightedMdp, query: Query):
    if len(query.constraints) != 1:
        raise QueryError("sspp query needs exactly one constraint")
    c = query.constraints[0]
    return model.target_set(c.target), resolve_dim(model, c.dim), c.bound, c.prob


def percentile_query(model: WeightedMdp, query: Query) -> PercentileQuery:
    if not query.constraints:
        raise QueryError("ssppq query needs at least one constraint")
    return PercentileQuery(tuple(PercentileConstraint(c.target, resolve_dim(model, c.dim), c.bound, c.prob)
                                 for c in query.constraints))


def multienv_query(model: MultiEnvMdp, query: Query) -> MultiEnvQuery:
    by_name = {e.env: e for e in query.envs}
    if len(by_name) != len(query.envs):
        raise QueryError("environment listed twice in query")
    if set(by_name) != set(model.env_names):
        raise QueryError(f"query environments {sorted(by_name)} do not match model {list(model.env_names)}")
    clauses = [by_name[n] for n in model.env_names]
    return MultiEnvQuery(_need(query.target, "target", "sspme"), [c.bound for c in clauses],
                         [c.prob for c in clauses], query.epsilon if query.epsilon is not None else 0,
                         resolve_dim(model.base, query.dim))


def solve_query(model, query: Query, problem: str | None = None, mode: str = "exact",
                tol: float = 1e-10) -> SolveReport:
    problem = problem_of(query, problem)
    if problem == "sspme":
        if not isinstance(model, MultiEnvMdp):
            raise QueryError("sspme expects a model with env blocks")
        return solve_sspme_gap(model, multienv_query(model, query))
    model = _plain_model(model, problem)
    if problem == "sspe":
        return solve_sspe(model, _need(query.target, "target", problem), resolve_dim(model, query.dim),
                          query.expectation)
    if problem == "sspp":
        target, dim, bound, prob = _single_constraint(model, query)
        return solve_sspp(model, target, bound, prob, dim, mode=mode, tol=tol)
    if problem == "spg":
        return solve_spg(model, _need(query.target, "target", problem), _need(query.worstcase, "worstcase", problem),
                         resolve_dim(model, query.dim))
    if problem == "sspwe":
        return solve_sspwe(model, _need(query.target, "target", problem),
                           _need(query.worstcase, "worstcase", problem),
                           _need(query.expectation, "expectation", problem), resolve_dim(model, query.dim))
    return solve_ssppq(model, percentile_query(model, query))


def evaluate_query(model, strategy: MooreStrategy, query: Query, problem: str | None = None) -> dict:
    """Exact values of ``strategy`` under the query, keyed like the solver's ``achieved``."""
    problem = problem_of(query, problem)
    if problem == "sspme":
        if not isinstance(model, MultiEnvMdp):
            raise QueryError("sspme expects a model with env blocks")
        vec = evaluate_multienv(model, strategy, multienv_query(model, query))
        return {f"env_{n}": p for n, p in zip(model.env_names, vec)}
    model = _plain_model(model, problem)
    if problem == "sspp":
        target, dim, bound, _ = _single_constraint(model, query)
        return {"probability": exact_event_probability(induce_chain(model, strategy), target, dim, bound)}
    if problem == "ssppq":
        pq = percentile_query(model, query)
        cons = [(model.target_set(c.target), c.dim, c.bound, c.prob) for c in pq.constraints]
        return {f"constraint{i + 1}": p for i, p in enumerate(verify_percentiles(model, strategy, cons))}
    target = model.target_set(_need(query.target, "target", problem))
    dim = resolve_dim(model, query.dim)
    out = {}
    if problem in ("spg", "sspwe"):
        out["worst_case"] = evaluate_worst_case(model, strategy, target, dim)
    if problem in ("sspe", "sspwe"):
        out["expectation"] = exact_expectation(induce_chain(model, strategy), target, dim)
    return out


def thresholds_met(model, query: Query, values: dict, problem: str | None = None) -> dict:
    """Per-key pass/fail of evaluated values against the query's thresholds."""
    problem = problem_of(query, problem)
    if problem == "sspme":
        mq = multienv_query(model, query)
        return {f"env_{n}": values[f"env_{n}"] >= a for n, a in zip(model.env_names, mq.thresholds)}
    if problem == "sspp":
        return {"probability": values["probability"] >= query.constraints[0].prob}
    if problem == "ssppq":
        return {f"constraint{i + 1}": values[f"constraint{i + 1}"] >= c.prob
                for i, c in enumerate(query.constraints)}
    out = {}
    if "worst_case" in values and query.worstcase is not None:
        out["worst_case"] = values["worst_case"] <= query.worstcase
    if "expectation" in values and query.expectation is not None:
        out["expectation"] = values["expectation"] <= query.expectation
    return out


def simulation_plan(model, query: Query, problem: str | None = None) -> list:
    """``(environment model, SimConstraint list)`` pairs matching :func:`evaluate_query` keys."""
    problem = problem_of(query, problem)
    if problem == "sspme":
        if not isinstance(model, MultiEnvMdp):
            raise QueryError("sspme expects a model with env blocks")
        mq = multienv_query(model, query)
        target = model.base.target_set(mq.target)
        return [(model.environment(i), [SimConstraint(f"env_{n}", target, mq.dim, b)])
                for i, (n, b) in enumerate(zip(model.env_names, mq.bounds))]
    model = _plain_model(model, problem)
    if problem in ("sspp", "ssppq"):
        if problem == "sspp":
            _single_constraint(model, query)
        cons = [SimConstraint("probability" if problem == "sspp" else f"constraint{i + 1}",
                              model.target_set(c.target), resolve_dim(model, c.dim), c.bound)
                for i, c in enumerate(query.constraints)]
        return [(model, cons)]
    target = model.target_set(_need(query.target, "target", problem))
    dim = resolve_dim(model, query.dim)
    cons = [SimConstraint("expectation", target, dim, None)]
    if query.worstcase is not None:
        cons.append(SimConstraint(f"within_{query.worstcase}", target, dim, query.worstcase))
    return [(model, cons)]
