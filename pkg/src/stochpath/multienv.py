"""Multi-environment MDPs: one state space, several transition functions.

A single strategy has to meet a percentile constraint in every environment
without being told which environment it is in. Histories still leak
information: an observed transition that is impossible in some environment
rules that environment out, and likelihood ratios sharpen the guess.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from itertools import combinations

from .classic import solve_sspp
from .model import Distribution, MooreStrategy, WeightedMdp, as_rational, exact_event_probability, induce_chain
from .report import Decision, SolveReport


@dataclass(frozen=True)
class MultiEnvMdp:
    """``base`` plus per-environment overrides of transitions and weights.

    ``overrides[i]`` maps ``(state, action)`` to a replacement distribution;
    ``weight_overrides[i]`` maps actions to replacement weight vectors.
    """

    base: WeightedMdp
    env_names: tuple
    overrides: tuple
    weight_overrides: tuple = ()

    def __post_init__(self):
        if not self.env_names:
            raise ValueError("a multi-environment MDP needs at least one environment")
        if len(self.overrides) != len(self.env_names):
            raise ValueError("one override block per environment")
        if not self.weight_overrides:
            object.__setattr__(self, "weight_overrides", tuple({} for _ in self.env_names))
        for block in self.overrides:
            for key in block:
                if key not in self.base.delta:
                    raise ValueError(f"override for undefined pair {key!r}")

    @property
    def k(self) -> int:
        return len(self.env_names)

    @cached_property
    def _envs(self) -> tuple:
        out = []
        for name, block, wblock in zip(self.env_names, self.overrides, self.weight_overrides):
            delta = dict(self.base.delta)
            delta.update(block)
            weight = dict(self.base.weight)
            weight.update(wblock)
            out.append(replace(self.base, delta=delta, weight=weight, name=f"{self.base.name}{name}"))
        return tuple(out)

    def environment(self, i) -> WeightedMdp:
        """The MDP of environment ``i`` (index or name)."""
        if not isinstance(i, int):
            i = self.env_names.index(i)
        return self._envs[i]

    def environments(self) -> tuple:
        return self._envs


@dataclass(frozen=True)
class MultiEnvQuery:
    """``P_i[TS^target <= bounds[i]] >= thresholds[i]`` in every environment ``i``."""

    target: object
    bounds: tuple
    thresholds: tuple
    epsilon: Fraction = Fraction(0)
    dim: int | str = 0

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple(int(b) for b in self.bounds))
        object.__setattr__(self, "thresholds", tuple(as_rational(a) for a in self.thresholds))
        object.__setattr__(self, "epsilon", as_rational(self.epsilon))
        if len(self.bounds) != len(self.thresholds):
            raise ValueError("one threshold per bound")
        for a in self.thresholds:
            if not 0 <= a <= 1:
                raise ValueError(f"threshold {a} outside [0, 1]")
        if any(b < 0 for b in self.bounds):
            raise ValueError(f"bounds must be nonnegative, got {self.bounds}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


def _check_query(model: MultiEnvMdp, query: MultiEnvQuery) -> tuple[frozenset, int]:
    if len(query.bounds) != model.k:
        raise ValueError(f"query has {len(query.bounds)} environment clauses, model has {model.k} environments")
    target = model.base.target_set(query.target)
    dim = model.base.dim_index(query.dim)
    for env in model.environments():
        env.check_positive([dim])
    return target, dim


def evaluate_multienv(model: MultiEnvMdp, strategy: MooreStrategy, query: MultiEnvQuery) -> tuple:
    """Exact ``P_i[TS <= bounds[i]]`` for each environment."""
    target, dim = _check_query(model, query)
    return tuple(exact_event_probability(induce_chain(env, strategy), target, dim, b)
                 for env, b in zip(model.environments(), query.bounds))


# -- belief supports ----------------------------------------------------------

@dataclass
class BeliefProduct:
    """Reachable pairs ``(s, B)`` with ``B`` the environments consistent with the history.

    ``pinned`` are the pairs whose history identifies the environment
    uniquely. ``limit_pairs`` lists environment pairs that no history tells
    apart with certainty although some reachable choice has different
    probabilities in the two, so repeated observation separates them only
    statistically.
    """

    states: tuple
    initial: tuple
    edges: dict
    pinned: frozenset
    limit_pairs: frozenset

    def supports(self) -> set:
        return {b for _, b in self.states}


def belief_support_product(model: MultiEnvMdp) -> BeliefProduct:
    envs = model.environments()
    base = model.base
    x0 = (base.initial, frozenset(range(model.k)))
    order = [x0]
    seen = {x0}
    queue = deque(order)
    edges: dict = {}
    while queue:
        x = queue.popleft()
        s, b = x
        for a in base.enabled[s]:
            out = []
            succs = {t for i in b for t in envs[i].delta[(s, a)]}
            for t in sorted(succs, key=base.state_index.__getitem__):
                b2 = frozenset(i for i in b if envs[i].delta[(s, a)].get(t, 0) > 0)
                y = (t, b2)
                out.append(y)
                if y not in seen:
                    seen.add(y)
                    order.append(y)
                    queue.append(y)
            edges[(x, a)] = tuple(out)
    separated = set()
    differing = set()
    for (s, b) in order:
        for i, j in combinations(sorted(b), 2):
            for a in base.enabled[s]:
                di, dj = envs[i].delta[(s, a)], envs[j].delta[(s, a)]
                if set(di.support) != set(dj.support):
                    separated.add((i, j))
                elif di != dj:
                    differing.add((i, j))
    pinned = frozenset(x for x in order if len(x[1]) == 1)
    return BeliefProduct(tuple(order), x0, edges, pinned, frozenset(differing - separated))


# -- gap procedure ------------------------------------------------------------

_DONE = "done"


class _Scalarised:
    """Backward induction maximising ``sum_i lam_i P_i[TS <= l_i]`` over history-dependent pure strategies.

    Information states are ``(s, v, b)``: the current state, the per-environment
    accumulated weight (``None`` once above that environment's bound) and the
    normalised posterior ``b_i`` proportional to ``lam_i`` times the history's
    likelihood in environment ``i``. The history's contribution only depends on
    this triple, so it is a sufficient memory.
    """

    def __init__(self, model: MultiEnvMdp, target, dim, bounds, lam):
        self.envs = model.environments()
        self.base = model.base
        self.target = target
        self.dim = dim
        self.bounds = bounds
        total = sum(lam)
        self.b0 = tuple(Fraction(x) / total for x in lam)
        self.memo: dict = {}
        self.choice: dict = {}

    def start(self):
        return (self.base.initial, tuple(0 for _ in self.envs), self.b0)

    def settled(self, node) -> bool:
        s, v, b = node
        return s in self.target or all(v[i] is None or b[i] == 0 for i in range(len(v)))

    def reward(self, node) -> Fraction:
        s, v, b = node
        if s not in self.target:
            return Fraction(0)
        return sum((b[i] for i in range(len(v)) if v[i] is not None), Fraction(0))

    def successors(self, node, a):
        s, v, b = node
        v2 = []
        for i, env in enumerate(self.envs):
            x = v[i]
            if x is not None:
                x += env.w(a, self.dim)
                if x > self.bounds[i]:
                    x = None
            v2.append(x)
        v2 = tuple(v2)
        out = {}
        for i, env in enumerate(self.envs):
            if b[i] == 0:
                continue
            for t, p in env.delta[(s, a)].items():
                out.setdefault(t, [Fraction(0)] * len(b))[i] = b[i] * p
        result = []
        for t in sorted(out, key=self.base.state_index.__getitem__):
            raw = out[t]
            mass = sum(raw)
            result.append((mass, (t, v2, tuple(x / mass for x in raw))))
        return result

    def value(self, node) -> Fraction:
        if node in self.memo:
            return self.memo[node]
        if self.settled(node):
            val = self.reward(node)
        else:
            val = None
            for a in self.base.enabled[node[0]]:
                cand = sum((m * self.value(n) for m, n in self.successors(node, a)), Fraction(0))
                if val is None or cand > val:
                    val, self.choice[node] = cand, a
        self.memo[node] = val
        return val

    def strategy(self, name: str) -> MooreStrategy:
        """The argmax choices as a Moore machine whose memory names information states."""
        root = self.start()
        self.value(root)
        labels = {root: "n0"}
        order = [root]
        queue = deque(order)
        next_action = {}
        updates = {}
        while queue:
            node = queue.popleft()
            lab = labels[node]
            a = self.choice[node]
            next_action[(node[0], lab)] = Distribution.dirac(a)
            for _, n2 in self.successors(node, a):
                if self.settled(n2):
                    lab2 = _DONE
                else:
                    if n2 not in labels:
                        labels[n2] = f"n{len(labels)}"
                        order.append(n2)
                        queue.append(n2)
                    lab2 = labels[n2]
                if lab2 != lab:
                    updates[(a, n2[0], lab)] = Distribution.dirac(lab2)
        for s in self.base.states:
            next_action[(s, _DONE)] = Distribution.dirac(self.base.enabled[s][0])
        memory = tuple(labels[n] for n in order) + (_DONE,)
        if self.settled(root):
            return MooreStrategy((_DONE,), {k: d for k, d in next_action.items() if k[1] == _DONE},
                                 {}, Distribution.dirac(_DONE), name)
        return MooreStrategy(memory, next_action, updates, Distribution.dirac("n0"), name)


def mix_strategies(strategies, weights, name: str = "mixture") -> MooreStrategy:
    """Pick ``strategies[j]`` with probability ``weights[j]`` once, at the start."""
    memory, next_action, updates, init = [], {}, {}, {}
    for j, (st, q) in enumerate(zip(strategies, weights)):
        if q == 0:
            continue
        tag = f"c{j}:"
        memory.extend(tag + str(m) for m in st.memory)
        for (s, m), d in st.next_action.items():
            next_action[(s, tag + str(m))] = d
        for (a, s2, m), d in st.memory_update.items():
            updates[(a, s2, tag + str(m))] = Distribution((tag + str(m2), p) for m2, p in d.items())
        for m, p in st.initial_memory.items():
            init[tag + str(m)] = init.get(tag + str(m), 0) + q * p
    return MooreStrategy(tuple(memory), next_action, updates, Distribution(init), name)


def _grid(step: Fraction):
    q = step
    while q < 1:
        yield q
        q += step


def solve_sspme_gap(model: MultiEnvMdp, query: MultiEnvQuery, grid: Fraction = Fraction(1, 8),
                    rounds: int = 12) -> SolveReport:
    """Three-valued ε-gap decision.

    NO only when some environment alone cannot reach ``alpha_i - epsilon``.
    Otherwise scalarised backward induction is run for a sequence of
    environment weightings (raising the weight of violated clauses), then
    grid mixtures of pairs of the resulting strategies are tried. A YES is
    always re-verified exactly; anything else is UNKNOWN.
    """
    started = time.perf_counter()
    if query.epsilon <= 0:
        raise ValueError("the gap procedure needs epsilon > 0; the exact problem is not supported")
    target, dim = _check_query(model, query)
    alphas = query.thresholds
    stats: dict = {"environments": model.k}
    optima = []
    for env, b, a in zip(model.environments(), query.bounds, alphas):
        opt = solve_sspp(env, target, b, a, dim).achieved["probability"]
        optima.append(opt)
    stats["single_env_optima"] = [str(p) for p in optima]
    blocked = [i for i, (p, a) in enumerate(zip(optima, alphas)) if p < a - query.epsilon]
    if blocked:
        stats["blocking_environments"] = [model.env_names[i] for i in blocked]
        stats["wall_time_s"] = round(time.perf_counter() - started, 6)
        return SolveReport("sspme", Decision.NO, None,
                           {f"optimum_{model.env_names[i]}": optima[i] for i in blocked}, stats)

    def finish(strategy, vec):
        stats["wall_time_s"] = round(time.perf_counter() - started, 6)
        achieved = {f"env_{name}": p for name, p in zip(model.env_names, vec)}
        return SolveReport("sspme", Decision.YES, strategy, achieved, stats, {"strategy": strategy})

    candidates = []
    lam = [Fraction(1)] * model.k
    for r in range(rounds):
        sc = _Scalarised(model, target, dim, query.bounds, lam)
        st = sc.strategy(f"sspme-{r}")
        vec = evaluate_multienv(model, st, query)
        stats["search_rounds"] = r + 1
        stats["max_information_states"] = max(stats.get("max_information_states", 0), len(sc.memo))
        if all(p >= a for p, a in zip(vec, alphas)):
            return finish(st, vec)
        candidates.append((st, vec))
        lam = [w * 2 if p < a else w for w, p, a in zip(lam, vec, alphas)]
    for (s1, v1), (s2, v2) in combinations(candidates, 2):
        for q in _grid(grid):
            mixed = [q * x + (1 - q) * y for x, y in zip(v1, v2)]
            if all(p >= a for p, a in zip(mixed, alphas)):
                st = mix_strategies([s1, s2], [q, 1 - q], name="sspme-mix")
                vec = evaluate_multienv(model, st, query)
                if all(p >= a for p, a in zip(vec, alphas)):
                    return finish(st, vec)
    stats["wall_time_s"] = round(time.perf_counter() - started, 6)
    return SolveReport("sspme", Decision.UNKNOWN, None, {}, stats)
