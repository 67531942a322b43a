"""Multi-constraint percentile queries over multi-dimensional weights.

Each constraint asks ``P[TS^{T_i}_{k_i} <= l_i] >= alpha_i``. Unfolding the
queried dimensions turns every constraint into reaching a set ``R_i`` of
unfolded states, leaving a multiple reachability problem.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

from .model import WeightedMdp, as_rational, exact_event_probability, induce_chain
from .reachability import frequency_lp, frequency_strategy, solve_multiple_reachability
from .report import Decision, SolveReport
from .unfolding import SINK, absorbing, build_unfolding, pull_back


@dataclass(frozen=True)
class PercentileConstraint:
    target: object
    dim: int | str
    bound: int
    prob: Fraction

    def __post_init__(self):
        object.__setattr__(self, "prob", as_rational(self.prob))
        if not 0 <= self.prob <= 1:
            raise ValueError(f"probability threshold {self.prob} outside [0, 1]")
        if self.bound < 0:
            raise ValueError(f"bound {self.bound} is negative")


@dataclass(frozen=True)
class PercentileQuery:
    constraints: tuple

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise ValueError("a percentile query needs at least one constraint")


def _resolved(model: WeightedMdp, query: PercentileQuery):
    return [(model.target_set(c.target), model.dim_index(c.dim), c.bound, c.prob) for c in query.constraints]


def verify_percentiles(model: WeightedMdp, strategy, constraints) -> tuple:
    """Exact ``P[TS^{T_i}_{k_i} <= l_i]`` for each resolved constraint."""
    chain = induce_chain(model, strategy)
    return tuple(exact_event_probability(chain, t, k, b) for t, k, b, _ in constraints)


def solve_ssppq(model: WeightedMdp, query: PercentileQuery, compress: bool = True) -> SolveReport:
    """Decide the query; YES comes with a memory-and-randomness witness verified exactly."""
    started = time.perf_counter()
    cons = _resolved(model, query)
    tracked = tuple(sorted({k for _, k, _, _ in cons}))
    caps = tuple(max(b for _, k, b, _ in cons if k == d) for d in tracked)
    unf = build_unfolding(model, caps, tracked, compress=compress)
    targets = []
    for t, k, b, _ in cons:
        targets.append(frozenset(x for x in unf.mdp.states
                                 if x != SINK and x[0] in t and unf.coordinate(x, k) is not None
                                 and unf.coordinate(x, k) <= b))
    res = solve_multiple_reachability(unf.mdp, targets, [a for *_, a in cons])
    stats = {"unfolded_states": len(unf.mdp.states), **res.stats}
    if not res.feasible:
        stats["wall_time_s"] = round(time.perf_counter() - started, 6)
        return SolveReport("ssppq", Decision.NO, None, {}, stats, {"unfolding": unf})
    strategy = pull_back(unf, res.strategy, name="ssppq")
    achieved = verify_percentiles(model, strategy, cons)
    if any(p < a for p, (*_, a) in zip(achieved, cons)):
        raise ArithmeticError(f"SSP-PQ witness failed verification: {achieved}")
    stats["wall_time_s"] = round(time.perf_counter() - started, 6)
    return SolveReport("ssppq", Decision.YES, strategy,
                       {f"constraint{i + 1}": p for i, p in enumerate(achieved)}, stats,
                       {"unfolding": unf, "strategy": strategy})


def fast_path_single(model: WeightedMdp, query: PercentileQuery) -> SolveReport:
    """Single dimension, single target: make the target copies absorbing and solve one LP."""
    started = time.perf_counter()
    cons = _resolved(model, query)
    if len({(t, k) for t, k, _, _ in cons}) != 1:
        raise ValueError("fast path needs every constraint on the same target and dimension")
    target, dim = cons[0][0], cons[0][1]
    unf = build_unfolding(model, max(b for _, _, b, _ in cons), (dim,))
    tprime = unf.target_prime(target)
    mdp = absorbing(unf.mdp, tprime)

    def sat(x):
        if x not in tprime:
            return frozenset()
        return frozenset(i for i, (_, _, b, _) in enumerate(cons) if x[1][0] <= b)

    sol = frequency_lp(mdp, sat, [a for *_, a in cons])
    stats = {"unfolded_states": len(unf.mdp.states), **sol.stats}
    if not sol.feasible:
        stats["wall_time_s"] = round(time.perf_counter() - started, 6)
        return SolveReport("ssppq", Decision.NO, None, {}, stats, {"unfolding": unf})
    on_unf = frequency_strategy(mdp, sol, name="ssppq-fast")
    strategy = pull_back(unf.restricted(mdp), on_unf, name="ssppq-fast", stop=lambda x: x in tprime)
    achieved = verify_percentiles(model, strategy, cons)
    if any(p < a for p, (*_, a) in zip(achieved, cons)):
        raise ArithmeticError(f"fast-path witness failed verification: {achieved}")
    stats["wall_time_s"] = round(time.perf_counter() - started, 6)
    return SolveReport("ssppq", Decision.YES, strategy,
                       {f"constraint{i + 1}": p for i, p in enumerate(achieved)}, stats,
                       {"unfolding": unf, "strategy": strategy})
