"""Maximal reachability probabilities and multiple reachability.

Single-target values come from the minimisation LP
``min sum x_s  s.t.  x_s >= sum_t delta(s,a,t) x_t`` with ``x = 1`` on the
target and ``x = 0`` where the target is unreachable. The LP decomposes along
strongly connected components, so it is solved one component at a time with
downstream values fixed.

Multiple reachability works on the product with the set of constraints
satisfied so far and solves a visit-frequency LP; see
:func:`solve_multiple_reachability`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .graph import backward_reachable, maximal_end_components, tarjan_scc
from .lp import LinearProgram, solve_lp
from .model import Distribution, MooreStrategy, WeightedMdp, as_rational, induce_chain, reach_probability
from .unfolding import ProductMdp, pull_back


@dataclass
class ReachabilityResult:
    values: dict
    strategy: MooreStrategy
    stats: dict = field(default_factory=dict)


def _component_lp(comp, model, value, sense, const_of):
    """Solve the LP restricted to one SCC with downstream values fixed.

    ``sense='min'`` gives least fixpoints of ``x >= const + P x`` (reachability),
    ``'max'`` greatest fixpoints of ``x <= const + P x`` (expected cost).
    """
    lp = LinearProgram(sense)
    names = {s: f"x{i}" for i, s in enumerate(comp)}
    for s in comp:
        lp.add_variable(names[s], lower=None if sense == "max" else 0)
    lp.set_objective({names[s]: 1 for s in comp})
    for s in comp:
        for a in model.enabled[s]:
            rhs = const_of(s, a)
            if rhs is None:
                continue
            coeffs = {names[s]: Fraction(1)}
            for t, p in model.delta[(s, a)].items():
                if t in names:
                    coeffs[names[t]] = coeffs.get(names[t], 0) - p
                else:
                    rhs += p * value[t]
            lp.add_constraint(coeffs, ">=" if sense == "min" else "<=", rhs)
    res = solve_lp(lp)
    if res.status != "optimal":
        raise ArithmeticError(f"component LP is {res.status}")
    return {s: res.values[names[s]] for s in comp}, res.pivots, lp.size


def _single_state(s, model, value, sense, const_of):
    """Closed form for a one-state component: best ``(const + p_out) / (1 - p_self)``."""
    best = None
    for a in model.enabled[s]:
        self_p = Fraction(0)
        rest = const_of(s, a)
        if rest is None:
            continue
        for t, p in model.delta[(s, a)].items():
            if t == s:
                self_p += p
            else:
                rest += p * value[t]
        if self_p == 1:
            continue
        cand = rest / (1 - self_p)
        if best is None or (cand > best if sense == "min" else cand < best):
            best = cand
    return best


def solve_components(model: WeightedMdp, states, fixed: dict, sense: str, const_of) -> tuple[dict, dict]:
    """Fixpoint values on ``states`` by per-component LPs in reverse topological order."""
    value = dict(fixed)
    states = [s for s in states if s not in fixed]
    inside = set(states)
    stats = {"lp_components": 0, "lp_pivots": 0, "lp_max_size": (0, 0)}

    def succ(s):
        return [t for a in model.enabled[s] for t in model.delta[(s, a)] if t in inside]

    for comp in tarjan_scc(states, succ):
        if len(comp) == 1:
            v = _single_state(comp[0], model, value, sense, const_of)
            value[comp[0]] = Fraction(0) if v is None else v
            continue
        vals, pivots, size = _component_lp(comp, model, value, sense, const_of)
        value.update(vals)
        stats["lp_components"] += 1
        stats["lp_pivots"] += pivots
        if size[0] * max(size[1], 1) > stats["lp_max_size"][0] * max(stats["lp_max_size"][1], 1):
            stats["lp_max_size"] = size
    return value, stats


def can_reach(model: WeightedMdp, target) -> set:
    return backward_reachable(model.states, model.successors, set(target) & set(model.states))


def value_iteration(model: WeightedMdp, target, tol: float = 1e-10, max_iter: int = 10**6) -> dict:
    """Floating-point maximal reachability, iterated until the sup-norm change is below ``tol``."""
    target = set(target)
    good = can_reach(model, target)
    trans = {
        s: [[(t, float(p)) for t, p in model.delta[(s, a)].items()] for a in model.enabled[s]]
        for s in model.states if s in good and s not in target
    }
    x = {s: (1.0 if s in target else 0.0) for s in model.states}
    for _ in range(max_iter):
        delta = 0.0
        for s, acts in trans.items():
            v = max(sum(p * x[t] for t, p in row) for row in acts)
            delta = max(delta, abs(v - x[s]))
            x[s] = v
        if delta < tol:
            break
    return x


def argmax_strategy(model: WeightedMdp, target, values: dict, name: str = "sr") -> MooreStrategy:
    """Pure memoryless witness: an optimal action that also makes attractor progress."""
    target = set(target)
    optimal = {}
    for s in model.states:
        if s in target or values[s] == 0:
            continue
        optimal[s] = [a for a in model.enabled[s]
                      if sum(p * values[t] for t, p in model.delta[(s, a)].items()) == values[s]]
    choice = {}
    attractor = set(target)
    pending = [s for s in model.states if s in optimal]
    while pending:
        newly = {}
        for s in pending:
            for a in optimal[s]:
                if any(t in attractor for t in model.delta[(s, a)]):
                    newly[s] = a
                    break
        if not newly:
            raise ArithmeticError("optimal actions make no progress; values are not a fixpoint")
        choice.update(newly)
        attractor.update(newly)
        pending = [s for s in pending if s not in newly]
    return MooreStrategy.memoryless(choice, model, name=name)


def solve_sr(model: WeightedMdp, target, mode: str = "exact", tol: float = 1e-10) -> ReachabilityResult:
    """Maximal probability of reaching ``target`` from every state, with a pure memoryless witness."""
    target = frozenset(target) & frozenset(model.states)
    if mode == "float":
        vals = value_iteration(model, target, tol)
        return ReachabilityResult(vals, None, {"mode": "float"})
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    good = can_reach(model, target)
    fixed = {s: Fraction(1) for s in target}
    fixed.update({s: Fraction(0) for s in model.states if s not in good})
    values, stats = solve_components(model, model.states, fixed, "min", lambda s, a: Fraction(0))
    strategy = argmax_strategy(model, target, values)
    stats["states"] = len(model.states)
    return ReachabilityResult(values, strategy, stats)


# -- multiple reachability ---------------------------------------------------

def subset_key(sat: frozenset) -> str:
    return "S" + ("+".join(str(i + 1) for i in sorted(sat)) if sat else "-")


def subset_product(model: WeightedMdp, targets: Sequence) -> ProductMdp:
    """Product with the set of target indices visited so far; states are ``(x, S)``."""
    targets = [frozenset(t) for t in targets]

    def hits(x):
        return frozenset(i for i, t in enumerate(targets) if x in t)

    def lift(y, a, x2):
        return (x2, y[1] | hits(x2))

    def split(y):
        return y[0], subset_key(y[1])

    y0 = (model.initial, hits(model.initial))
    order = [y0]
    seen = {y0}
    queue = deque(order)
    enabled, delta = {}, {}
    while queue:
        y = queue.popleft()
        x = y[0]
        enabled[y] = model.enabled[x]
        for a in model.enabled[x]:
            acc: dict = {}
            for x2, p in model.delta[(x, a)].items():
                y2 = lift(y, a, x2)
                acc[y2] = acc.get(y2, 0) + p
                if y2 not in seen:
                    seen.add(y2)
                    order.append(y2)
                    queue.append(y2)
            delta[(y, a)] = Distribution(acc)
    mdp = WeightedMdp(tuple(order), y0, enabled, delta, model.weight, model.dims,
                      f"{model.name}-subsets", model.dim_names, {})
    return ProductMdp(mdp, model, split, lift, {"product_states": len(order)})


def satisfied(y) -> frozenset:
    return y[1]


@dataclass
class FrequencySolution:
    feasible: bool
    flows: dict
    stops: dict
    terminal: set
    mec_actions: dict
    stats: dict


def frequency_lp(mdp: WeightedMdp, sat, thresholds: Sequence, terminal=None) -> FrequencySolution:
    """Visit-frequency LP for reaching satisfied-sets with given probabilities.

    ``sat(x)`` is the set of objectives credited if the run settles in ``x``.
    Terminal states (by default, those from which ``sat`` cannot change) stop
    all incoming flow. End-component states get an extra stop variable, since a
    strategy may remain in an end component forever.
    """
    states = mdp.states
    if terminal is None:
        growing = {x for x in states
                   if any(sat(t) != sat(x) for a in mdp.enabled[x] for t in mdp.delta[(x, a)])}
        live = backward_reachable(states, mdp.successors, growing)
        terminal = {x for x in states if x not in live}
    terminal = set(terminal)
    order = [mdp.initial]
    seen = {mdp.initial}
    queue = deque(order)
    while queue:
        x = queue.popleft()
        if x in terminal:
            continue
        for t in mdp.successors(x):
            if t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)
    transient = [x for x in order if x not in terminal]
    in_set = set(transient)
    mecs = maximal_end_components(transient, lambda x: mdp.enabled[x],
                                  lambda x, a: mdp.delta[(x, a)].support)
    mec_actions = {}
    for comp, allowed in mecs:
        for x in comp:
            mec_actions[x] = allowed[x]
    stoppers = [x for x in order if x in terminal or x in mec_actions]

    lp = LinearProgram("max")
    yv = {}
    for i, x in enumerate(transient):
        for j, a in enumerate(mdp.enabled[x]):
            yv[(x, a)] = lp.add_variable(f"y{i}_{j}")
    zv = {x: lp.add_variable(f"z{i}") for i, x in enumerate(stoppers)}
    inflow: dict = {x: {} for x in order}
    for (x, a), var in yv.items():
        for t, p in mdp.delta[(x, a)].items():
            inflow[t][var] = inflow[t].get(var, 0) + p
    for x in order:
        coeffs: dict = {}
        if x in in_set:
            for a in mdp.enabled[x]:
                coeffs[yv[(x, a)]] = Fraction(1)
        if x in zv:
            coeffs[zv[x]] = coeffs.get(zv[x], 0) + 1
        for var, p in inflow[x].items():
            coeffs[var] = coeffs.get(var, 0) - p
        lp.add_constraint(coeffs, "=", 1 if x == mdp.initial else 0)
    for i, alpha in enumerate(thresholds):
        coeffs = {zv[x]: 1 for x in stoppers if i in sat(x)}
        lp.add_constraint(coeffs, ">=", as_rational(alpha))
    # prefer witnesses with large margins on every objective
    lp.set_objective({zv[x]: len(sat(x)) for x in stoppers if sat(x)})
    res = solve_lp(lp)
    stats = {"lp_variables": lp.size[0], "lp_constraints": lp.size[1], "lp_pivots": res.pivots,
             "lp_status": res.status}
    if res.status != "optimal":
        return FrequencySolution(False, {}, {}, terminal, mec_actions, stats)
    flows = {k: res.values[v] for k, v in yv.items()}
    stops = {x: res.values[v] for x, v in zv.items()}
    return FrequencySolution(True, flows, stops, terminal, mec_actions, stats)


def frequency_strategy(mdp: WeightedMdp, sol: FrequencySolution, name: str = "multi") -> MooreStrategy:
    """Randomised strategy with a transient/stay mode bit.

    In mode ``t`` actions are drawn proportionally to their flows. Entering a
    state switches to mode ``s`` with the share of flow that stops there; in
    mode ``s`` the machine stays inside the end component forever.
    """
    next_action = {}
    updates = {}
    stop_prob = {}
    for x in mdp.states:
        out = sum((sol.flows.get((x, a), 0) for a in mdp.enabled[x]), Fraction(0))
        z = sol.stops.get(x, Fraction(0))
        if x in sol.terminal:
            stop_prob[x] = Fraction(1)
        elif out + z > 0:
            stop_prob[x] = z / (out + z)
        else:
            stop_prob[x] = Fraction(0)
        if out > 0:
            next_action[(x, "t")] = Distribution(
                (a, sol.flows[(x, a)] / out) for a in mdp.enabled[x] if sol.flows.get((x, a), 0) > 0)
        else:
            next_action[(x, "t")] = Distribution.dirac(mdp.enabled[x][0])
        stay = sol.mec_actions.get(x) or mdp.enabled[x]
        next_action[(x, "s")] = Distribution.dirac(stay[0])

    def mode(x):
        q = stop_prob.get(x, Fraction(0))
        return Distribution((("s", q), ("t", 1 - q)))

    for x in mdp.states:
        for a in mdp.enabled[x]:
            for t in mdp.delta[(x, a)]:
                d = mode(t)
                if d != Distribution.dirac("t"):
                    updates[(a, t, "t")] = d
    return MooreStrategy(("t", "s"), next_action, updates, mode(mdp.initial), name)


@dataclass
class MultiReachResult:
    feasible: bool
    strategy: MooreStrategy | None
    achieved: tuple
    stats: dict = field(default_factory=dict)


def solve_multiple_reachability(model: WeightedMdp, targets: Sequence, thresholds: Sequence) -> MultiReachResult:
    """Decide whether one strategy reaches each ``targets[i]`` with probability ``>= thresholds[i]``.

    On YES the witness is a Moore machine on ``model`` and ``achieved`` holds
    the exactly verified reachability probabilities.
    """
    if len(targets) != len(thresholds):
        raise ValueError("one threshold per target set")
    thresholds = [as_rational(a) for a in thresholds]
    for a in thresholds:
        if not 0 <= a <= 1:
            raise ValueError(f"threshold {a} outside [0, 1]")
    prod = subset_product(model, targets)
    sol = frequency_lp(prod.mdp, satisfied, thresholds)
    stats = dict(prod.stats, **sol.stats)
    if not sol.feasible:
        return MultiReachResult(False, None, (), stats)
    on_product = frequency_strategy(prod.mdp, sol)
    strategy = pull_back(prod, on_product, name="multi-reach", stop=lambda y: y in sol.terminal)
    chain = induce_chain(model, strategy)
    achieved = tuple(reach_probability(chain, frozenset(t)) for t in targets)
    if any(p < a for p, a in zip(achieved, thresholds)):
        raise ArithmeticError(f"frequency witness failed verification: {achieved} vs {thresholds}")
    stats["chain_states"] = len(chain.states)
    return MultiReachResult(True, strategy, achieved, stats)
