"""Expected, percentile and worst-case shortest paths.

* SSP-E: minimal expected truncated sum, by LP on the states that reach the
  target almost surely under some strategy.
* SSP-P: unfold accumulated weight up to the bound, then maximise the
  probability of reaching a target copy with weight within the bound.
* SP-G: the adversarial fixpoint table ``C(s, i)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

from .graph import backward_reachable, forward_reachable, tarjan_scc
from .model import (INF, MooreStrategy, WeightedMdp, as_rational, exact_event_probability, exact_expectation,
                    induce_chain)
from .reachability import solve_components, solve_sr, value_iteration
from .report import Decision, SolveReport
from .unfolding import build_unfolding, pull_back


def almost_sure_region(model: WeightedMdp, target) -> tuple[set, dict]:
    """States that reach ``target`` with probability one under some strategy.

    Returns the region and, per non-target region state, the actions that
    keep every successor inside it.
    """
    target = set(target)
    region = set(model.states)
    while True:
        allowed = {s: [a for a in model.enabled[s] if all(t in region for t in model.delta[(s, a)])]
                   for s in region if s not in target}

        def succ(s):
            if s in target:
                return ()
            return [t for a in allowed[s] for t in model.delta[(s, a)]]

        shrunk = backward_reachable(region, succ, target & region)
        if shrunk == region:
            return region, allowed
        region = shrunk


def solve_sspe(model: WeightedMdp, target, dim: int = 0, threshold=None) -> SolveReport:
    """Minimal expected truncated sum from the initial state, with a pure memoryless witness."""
    started = time.perf_counter()
    target = model.target_set(target)
    model.check_positive([dim])
    region, allowed = almost_sure_region(model, target)
    stats = {"states": len(model.states), "almost_sure_states": len(region)}
    if model.initial not in region:
        stats["wall_time_s"] = round(time.perf_counter() - started, 6)
        return SolveReport("sspe", Decision.NO, None, {"expectation": INF}, stats,
                           {"values": {s: INF for s in model.states}})

    def const(s, a):
        return Fraction(model.w(a, dim)) if a in allowed[s] else None

    fixed = {t: Fraction(0) for t in target}
    values, lp_stats = solve_components(model, [s for s in model.states if s in region], fixed, "max", const)
    stats.update(lp_stats)
    choice = {}
    for s in model.states:
        if s in target or s not in region:
            continue
        for a in allowed[s]:
            if model.w(a, dim) + sum(p * values[t] for t, p in model.delta[(s, a)].items()) == values[s]:
                choice[s] = a
                break
    strategy = MooreStrategy.memoryless(choice, model, name="sspe")
    value = values[model.initial]
    check = exact_expectation(induce_chain(model, strategy), target, dim)
    if check != value:
        raise ArithmeticError(f"SSP-E witness yields {check}, LP optimum {value}")
    all_values = {s: values.get(s, INF) for s in model.states}
    ok = threshold is None or value <= as_rational(threshold)
    stats["wall_time_s"] = round(time.perf_counter() - started, 6)
    return SolveReport("sspe", Decision.YES if ok else Decision.NO, strategy if ok else None,
                       {"expectation": value}, stats, {"values": all_values, "strategy": strategy})


def solve_sspp(model: WeightedMdp, target, bound: int, threshold, dim: int = 0,
               mode: str = "exact", tol: float = 1e-10) -> SolveReport:
    """Decide ``P[TS <= bound] >= threshold`` and return an accumulated-weight-memory witness."""
    started = time.perf_counter()
    target = model.target_set(target)
    alpha = as_rational(threshold)
    if not 0 <= alpha <= 1:
        raise ValueError(f"threshold {alpha} outside [0, 1]")
    unf = build_unfolding(model, bound, (dim,))
    tprime = unf.target_prime(target)
    sr = solve_sr(unf.mdp, tprime)
    achieved = sr.values[unf.mdp.initial]
    stats = {"unfolded_states": len(unf.mdp.states), **{k: v for k, v in sr.stats.items() if k != "states"}}
    if mode == "float":
        approx = value_iteration(unf.mdp, tprime, tol)[unf.mdp.initial]
        stats["float_value"] = approx
        stats["float_gap"] = abs(approx - float(achieved))
    strategy = pull_back(unf, sr.strategy, name="sspp", stop=lambda x: x in tprime)
    check = exact_event_probability(induce_chain(model, strategy), target, dim, bound)
    if check != achieved:
        raise ArithmeticError(f"SSP-P witness yields {check}, SR value {achieved}")
    ok = achieved >= alpha
    stats["wall_time_s"] = round(time.perf_counter() - started, 6)
    return SolveReport("sspp", Decision.YES if ok else Decision.NO, strategy if ok else None,
                       {"probability": achieved}, stats,
                       {"unfolding": unf, "values": sr.values, "strategy": strategy})


@dataclass(frozen=True)
class WorstCaseTable:
    """``values[(s, i)]``: least bound on the truncated sum guaranteed within ``i`` steps."""

    values: dict
    n: int

    def final(self, s):
        return self.values[(s, self.n)]


def worst_case_table(model: WeightedMdp, target, dim: int = 0) -> WorstCaseTable:
    target = model.target_set(target)
    n = len(model.states)
    values = {(s, 0): (0 if s in target else INF) for s in model.states}
    for i in range(1, n + 1):
        for s in model.states:
            prev = values[(s, i - 1)]
            if s in target:
                values[(s, i)] = 0
                continue
            best = prev
            for a in model.enabled[s]:
                worst = max(values[(t, i - 1)] for t in model.delta[(s, a)])
                best = min(best, model.w(a, dim) + worst)
            values[(s, i)] = best
    return WorstCaseTable(values, n)


def solve_spg(model: WeightedMdp, target, bound: int, dim: int = 0) -> SolveReport:
    """Worst-case shortest path: can every outcome reach ``target`` within ``bound``?"""
    started = time.perf_counter()
    target = model.target_set(target)
    model.check_positive([dim])
    table = worst_case_table(model, target, dim)
    choice = {}
    for s in model.states:
        if s in target or table.final(s) == INF:
            continue
        for a in model.enabled[s]:
            if model.w(a, dim) + max(table.final(t) for t in model.delta[(s, a)]) == table.final(s):
                choice[s] = a
                break
    strategy = MooreStrategy.memoryless(choice, model, name="spg")
    value = table.final(model.initial)
    ok = value <= bound
    stats = {"states": len(model.states), "wall_time_s": round(time.perf_counter() - started, 6)}
    return SolveReport("spg", Decision.YES if ok else Decision.NO, strategy if ok else None,
                       {"worst_case": value}, stats, {"table": table, "strategy": strategy})


def evaluate_worst_case(model: WeightedMdp, strategy: MooreStrategy, target, dim: int = 0):
    """Largest truncated sum over all outcomes consistent with the strategy's supports."""
    target = model.target_set(target)
    chain = induce_chain(model, strategy)

    def succ(c):
        if c[0] in target:
            return []
        return [n for _, n, _ in chain.edges[c]]

    # only the part of the chain before the first target visit matters
    before = forward_reachable(list(chain.initial), succ)
    live = [c for c in chain.states if c in before and c[0] not in target]
    live_set = set(live)
    for comp in tarjan_scc(live, lambda c: [n for n in succ(c) if n in live_set]):
        if len(comp) > 1 or comp[0] in succ(comp[0]):
            return INF
    longest: dict = {}
    for comp in tarjan_scc([c for c in chain.states if c in before], succ):
        c = comp[0]
        if c[0] in target:
            longest[c] = 0
        else:
            longest[c] = max(chain.model.w(a, dim) + longest[n] for a, n, _ in chain.edges[c])
    return max(longest[c] for c in chain.initial)
