"""Beyond worst-case shortest path: worst-case bound plus expected-value bound.

Unfold up to the worst-case bound, keep only actions that surely reach the
target within it (a greatest fixpoint), then minimise the expectation on the
restricted unfolding.
"""

from __future__ import annotations

import time
from typing import Callable

from .classic import evaluate_worst_case, solve_sspe
from .model import INF, WeightedMdp, as_rational, exact_expectation, induce_chain
from .report import Decision, SolveReport
from .unfolding import SINK, UnfoldedMdp, absorbing, build_unfolding, pull_back, restrict_actions


def compute_safe_actions(unfolded: UnfoldedMdp, targets_prime, on_pass: Callable | None = None) -> dict:
    """Greatest fixpoint of actions whose every successor keeps a safe action.

    Target copies keep all their actions. Synchronous passes: each pass reads
    only the previous pass's sets, so ``A_{i+1} <= A_i`` pointwise.
    ``on_pass(i, sets)`` is called with the sets after every pass.
    """
    mdp = unfolded.mdp
    tp = set(targets_prime)
    safe = {x: (() if x == SINK else tuple(mdp.enabled[x])) for x in mdp.states}
    passes = 0
    while True:
        passes += 1
        nonempty = {x for x, acts in safe.items() if acts}
        nxt = {}
        for x in mdp.states:
            if x in tp:
                nxt[x] = safe[x]
                continue
            nxt[x] = tuple(a for a in safe[x] if all(t in nonempty for t in mdp.delta[(x, a)]))
        changed = sum(1 for x in mdp.states if nxt[x] != safe[x])
        safe = nxt
        if on_pass is not None:
            on_pass(passes, safe)
        if not changed:
            return safe


def solve_sspwe(model: WeightedMdp, target, worst_bound: int, expectation_bound, dim: int = 0) -> SolveReport:
    """Is there a strategy with every outcome ``<= worst_bound`` and expectation ``<= expectation_bound``?"""
    started = time.perf_counter()
    target = model.target_set(target)
    ell2 = as_rational(expectation_bound)
    unf = build_unfolding(model, worst_bound, (dim,))
    tprime = unf.target_prime(target)
    safe = compute_safe_actions(unf, tprime)
    stats = {"unfolded_states": len(unf.mdp.states),
             "safe_states": sum(1 for acts in safe.values() if acts)}
    x0 = unf.mdp.initial
    if not safe[x0]:
        stats["wall_time_s"] = round(time.perf_counter() - started, 6)
        return SolveReport("sspwe", Decision.NO, None, {"worst_case": INF, "expectation": INF}, stats,
                           {"safe": safe, "unfolding": unf})
    restricted = absorbing(restrict_actions(unf.mdp, {x: a for x, a in safe.items() if a and x not in tprime}),
                           tprime)
    sub = solve_sspe(restricted, tprime & frozenset(restricted.states), dim)
    stats["restricted_states"] = len(restricted.states)
    stats.update({k: v for k, v in sub.stats.items() if k.startswith("lp")})
    value = sub.achieved["expectation"]
    strategy = pull_back(unf.restricted(restricted), sub.detail["strategy"], name="sspwe",
                         stop=lambda x: x in tprime)
    worst = evaluate_worst_case(model, strategy, target, dim)
    expect = exact_expectation(induce_chain(model, strategy), target, dim)
    if worst > worst_bound or expect != value:
        raise ArithmeticError(f"SSP-WE witness check failed: worst {worst}, expectation {expect} vs {value}")
    ok = value <= ell2
    stats["wall_time_s"] = round(time.perf_counter() - started, 6)
    return SolveReport("sspwe", Decision.YES if ok else Decision.NO, strategy if ok else None,
                       {"worst_case": worst, "expectation": value}, stats,
                       {"safe": safe, "unfolding": unf, "strategy": strategy})
