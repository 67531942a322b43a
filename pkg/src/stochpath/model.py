"""Weighted MDPs, Moore-machine strategies, induced chains and truncated sums.

All probabilities are exact :class:`fractions.Fraction` values. ``INF`` is the
distinguished infinite truncated sum (runs that never reach their target).
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Iterable

from .graph import backward_reachable, tarjan_scc
from .linalg import solve_exact

INF = math.inf

State = Hashable
Action = Hashable


class InvalidStrategy(ValueError):
    """The strategy plays an action that is not enabled, or is undefined somewhere reachable."""


class NonPositiveWeight(ValueError):
    """A weight on a queried dimension is not strictly positive."""


def as_rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a probability")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"refusing inexact value {x!r}; use int, str or Fraction")


class Distribution(Mapping):
    """Immutable finite distribution with exact rational weights.

    Zero-probability entries are dropped. With ``check=True`` the total must be
    exactly one; ``check=False`` exists so malformed models can be represented
    and diagnosed by :func:`validate_model`.
    """

    __slots__ = ("_p", "_hash")

    def __init__(self, probs=(), check: bool = True):
        items = probs.items() if isinstance(probs, Mapping) else probs
        acc: dict = {}
        for key, p in items:
            p = as_rational(p)
            if p < 0:
                raise ValueError(f"negative probability {p} for {key!r}")
            if p:
                acc[key] = acc.get(key, 0) + p
        if check and sum(acc.values()) != 1:
            raise ValueError(f"distribution sums to {sum(acc.values())}, not 1")
        self._p = acc
        self._hash = None

    @classmethod
    def dirac(cls, key) -> "Distribution":
        return cls({key: 1})

    def __getitem__(self, key):
        return self._p[key]

    def get(self, key, default=0):
        return self._p.get(key, default)

    def __iter__(self):
        return iter(self._p)

    def __len__(self):
        return len(self._p)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._p.items()))
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{k!r}: {v}" for k, v in self._p.items())
        return f"Distribution({{{inner}}})"

    @property
    def support(self) -> tuple:
        return tuple(self._p)

    def total(self) -> Fraction:
        return sum(self._p.values(), Fraction(0))

    def is_dirac(self) -> bool:
        return len(self._p) == 1


@dataclass(frozen=True)
class WeightedMdp:
    """Finite MDP with integer action weights in ``dims`` dimensions.

    ``enabled[s]`` lists actions in declaration order; that order is the
    tie-breaking order of every argmin/argmax extraction.
    """

    states: tuple
    initial: State
    enabled: Mapping
    delta: Mapping
    weight: Mapping
    dims: int = 1
    name: str = "mdp"
    dim_names: tuple = ()
    groups: Mapping = field(default_factory=dict)

    @cached_property
    def state_index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def actions(self) -> tuple:
        seen: dict = {}
        for s in self.states:
            for a in self.enabled.get(s, ()):
                seen.setdefault(a, None)
        return tuple(seen)

    def actions_at(self, s) -> tuple:
        return self.enabled[s]

    def succ(self, s, a) -> Distribution:
        return self.delta[(s, a)]

    def w(self, a, dim: int = 0) -> int:
        return self.weight[a][dim]

    def successors(self, s):
        """All states reachable in one step from ``s`` under some action."""
        out: dict = {}
        for a in self.enabled[s]:
            for t in self.delta[(s, a)]:
                out[t] = None
        return tuple(out)

    def target_set(self, target) -> frozenset:
        """Resolve a group name, a state id, or an iterable of states."""
        if not isinstance(target, (set, frozenset, list)):
            if target in self.groups:
                return frozenset(self.groups[target])
            if target in self.state_index:
                return frozenset([target])
            if not isinstance(target, tuple):
                raise KeyError(f"unknown target {target!r}")
        missing = [t for t in target if t not in self.state_index]
        if missing:
            raise KeyError(f"unknown target states {missing}")
        return frozenset(target)

    def dim_index(self, dim) -> int:
        """Resolve a 0-based index or a dimension name."""
        if isinstance(dim, int):
            if not 0 <= dim < self.dims:
                raise IndexError(f"dimension {dim} out of range for {self.dims} dims")
            return dim
        if dim in self.dim_names:
            return self.dim_names.index(dim)
        raise KeyError(f"unknown dimension {dim!r}")

    def check_positive(self, dims: Iterable[int], actions: Iterable | None = None) -> None:
        acts = self.actions if actions is None else actions
        for k in dims:
            for a in acts:
                if self.weight[a][k] < 1:
                    raise NonPositiveWeight(
                        f"nonpositive weight {self.weight[a][k]} for action {a!r} on dimension {k}")


def validate_model(model: WeightedMdp, positive_dims: Iterable[int] = ()) -> list[str]:
    """Human-readable diagnostics; empty iff every model invariant holds."""
    diags: list[str] = []
    index = set(model.states)
    if len(index) != len(model.states):
        diags.append("duplicate state identifiers")
    if model.initial not in index:
        diags.append(f"initial state {model.initial!r} is not declared")
    if model.dims < 1:
        diags.append("dims must be positive")
    for s in model.states:
        acts = model.enabled.get(s, ())
        if not acts:
            diags.append(f"state {s!r} has no enabled action")
        for a in acts:
            dist = model.delta.get((s, a))
            if dist is None:
                diags.append(f"missing distribution at ({s},{a})")
                continue
            if dist.total() != 1:
                diags.append(f"distribution not stochastic at ({s},{a}): sums to {dist.total()}")
            for t in dist:
                if t not in index:
                    diags.append(f"undeclared successor {t!r} at ({s},{a})")
    for (s, a) in model.delta:
        if a not in model.enabled.get(s, ()):
            diags.append(f"distribution defined for disabled pair ({s},{a})")
    for a in model.actions:
        w = model.weight.get(a)
        if w is None or len(w) != model.dims:
            diags.append(f"weight of action {a!r} does not have {model.dims} components")
            continue
        for k in positive_dims:
            if w[k] < 1:
                diags.append(f"nonpositive weight {w[k]} for action {a!r} on dimension {k + 1}")
    for g, members in model.groups.items():
        for t in members:
            if t not in index:
                diags.append(f"group {g!r} names undeclared state {t!r}")
    return diags


@dataclass(frozen=True)
class MooreStrategy:
    """Stochastic Moore machine.

    ``next_action[(s, m)]`` is a distribution over actions and
    ``memory_update[(a, s2, m)]`` a distribution over memory elements, where
    ``s2`` is the state just entered. Missing updates keep the memory; a
    missing action choice is only tolerated where exactly one action is enabled.
    """

    memory: tuple
    next_action: Mapping
    memory_update: Mapping
    initial_memory: Distribution
    name: str = "strategy"

    def action_dist(self, model: WeightedMdp, s, m) -> Distribution:
        dist = self.next_action.get((s, m))
        if dist is None:
            acts = model.enabled[s]
            if len(acts) == 1:
                return Distribution.dirac(acts[0])
            raise InvalidStrategy(f"no action defined at state {s!r} with memory {m!r}")
        enabled = model.enabled[s]
        for a in dist:
            if a not in enabled:
                raise InvalidStrategy(f"action {a!r} is not enabled at state {s!r}")
        return dist

    def update_dist(self, a, s2, m) -> Distribution:
        dist = self.memory_update.get((a, s2, m))
        return Distribution.dirac(m) if dist is None else dist

    def is_pure(self) -> bool:
        return (self.initial_memory.is_dirac()
                and all(d.is_dirac() for d in self.next_action.values())
                and all(d.is_dirac() for d in self.memory_update.values()))

    def is_memoryless(self) -> bool:
        return len(self.memory) == 1

    @classmethod
    def memoryless(cls, choice: Mapping, model: WeightedMdp | None = None,
                   name: str = "memoryless", fill: bool = True) -> "MooreStrategy":
        """Build from ``state -> action`` or ``state -> Distribution``.

        With ``fill`` and a model, unlisted states play their first enabled action.
        """
        nxt = {}
        for s, c in choice.items():
            nxt[(s, "0")] = c if isinstance(c, Distribution) else Distribution.dirac(c)
        if fill and model is not None:
            for s in model.states:
                if (s, "0") not in nxt:
                    nxt[(s, "0")] = Distribution.dirac(model.enabled[s][0])
        return cls(("0",), nxt, {}, Distribution.dirac("0"), name)


@dataclass(frozen=True)
class RunPrefix:
    states: tuple
    actions: tuple

    def is_valid(self, model: WeightedMdp) -> bool:
        if len(self.states) != len(self.actions) + 1:
            return False
        for i, a in enumerate(self.actions):
            s, t = self.states[i], self.states[i + 1]
            if a not in model.enabled.get(s, ()) or model.delta[(s, a)].get(t, 0) <= 0:
                return False
        return True

    def reaches(self, target) -> bool:
        return any(s in target for s in self.states)


def truncated_sum(model: WeightedMdp, run: RunPrefix, target, dim: int = 0):
    """Weight on ``dim`` accumulated until the first visit of ``target``.

    Returns ``INF`` when the prefix never visits the target; use
    :meth:`RunPrefix.reaches` to tell that apart from a genuinely infinite run.
    """
    if not run.is_valid(model):
        raise ValueError("invalid run prefix")
    total = 0
    for i, s in enumerate(run.states):
        if s in target:
            return total
        if i < len(run.actions):
            total += model.w(run.actions[i], dim)
    return INF


@dataclass(frozen=True)
class InducedChain:
    """Markov chain ``D^sigma`` over reachable (state, memory) pairs.

    ``edges[c]`` lists ``(action, successor, probability)``; the action is kept
    because weights live on actions.
    """

    model: WeightedMdp
    states: tuple
    initial: Distribution
    edges: Mapping

    def trans(self, c) -> Distribution:
        return Distribution((nxt, p) for _, nxt, p in self.edges[c])


def induce_chain(model: WeightedMdp, strategy: MooreStrategy) -> InducedChain:
    init = Distribution(((model.initial, m), p) for m, p in strategy.initial_memory.items())
    order = list(init)
    seen = set(order)
    queue = deque(order)
    edges: dict = {}
    while queue:
        c = queue.popleft()
        s, m = c
        acc: dict = {}
        for a, pa in strategy.action_dist(model, s, m).items():
            for s2, ps in model.delta[(s, a)].items():
                for m2, pm in strategy.update_dist(a, s2, m).items():
                    key = (a, (s2, m2))
                    acc[key] = acc.get(key, 0) + pa * ps * pm
        edges[c] = tuple((a, nxt, p) for (a, nxt), p in acc.items())
        for (_, nxt) in acc:
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    return InducedChain(model, tuple(order), init, edges)


def _positive_edge_weight(chain: InducedChain, a, dim: int) -> int:
    w = chain.model.w(a, dim)
    if w < 1:
        raise NonPositiveWeight(f"nonpositive weight {w} for action {a!r} on dimension {dim}")
    return w


def exact_event_probability(chain: InducedChain, target, dim: int, bound: int) -> Fraction:
    """``P[TS^target_dim <= bound]`` by backward induction on (chain state, weight)."""
    if bound < 0:
        return Fraction(0)
    nodes: dict = {}
    stack = [(c, 0) for c in chain.initial]
    for n in stack:
        nodes[n] = None
    while stack:
        c, v = stack.pop()
        if c[0] in target:
            continue
        for a, nxt, _ in chain.edges[c]:
            v2 = v + _positive_edge_weight(chain, a, dim)
            if v2 <= bound and (nxt, v2) not in nodes:
                nodes[(nxt, v2)] = None
                stack.append((nxt, v2))
    value: dict = {}
    # successors carry strictly larger accumulated weight
    for c, v in sorted(nodes, key=lambda n: -n[1]):
        if c[0] in target:
            value[(c, v)] = Fraction(1)
            continue
        acc = Fraction(0)
        for a, nxt, p in chain.edges[c]:
            v2 = v + chain.model.w(a, dim)
            if v2 <= bound:
                acc += p * value[(nxt, v2)]
        value[(c, v)] = acc
    return sum((p * value[(c, 0)] for c, p in chain.initial.items()), Fraction(0))


def _transient_part(chain: InducedChain, target) -> list:
    """Chain states reachable from the start without passing through the target."""
    seen = dict.fromkeys(chain.initial)
    queue = deque(seen)
    while queue:
        c = queue.popleft()
        if c[0] in target:
            continue
        for _, nxt, _ in chain.edges[c]:
            if nxt not in seen:
                seen[nxt] = None
                queue.append(nxt)
    return list(seen)


def _solve_by_components(nodes: list, succ, equation) -> dict:
    """Solve ``x_c = const_c + sum coeff * x_c'`` component by component.

    ``equation(c)`` returns ``(const, [(coeff, c'), ...])``.
    """
    node_set = set(nodes)
    value: dict = {}
    for comp in tarjan_scc(nodes, lambda c: [n for n in succ(c) if n in node_set]):
        idx = {c: i for i, c in enumerate(comp)}
        n = len(comp)
        matrix = [[Fraction(0)] * n for _ in range(n)]
        rhs = [Fraction(0)] * n
        for c in comp:
            i = idx[c]
            matrix[i][i] += 1
            const, terms = equation(c)
            rhs[i] += const
            for coeff, nxt in terms:
                if nxt in idx:
                    matrix[i][idx[nxt]] -= coeff
                else:
                    rhs[i] += coeff * value[nxt]
        if n == 1:
            sol = [rhs[0] / matrix[0][0]]
        else:
            sol = solve_exact(matrix, rhs)
        for c in comp:
            value[c] = sol[idx[c]]
    return value


def reach_probability(chain: InducedChain, target) -> Fraction:
    """Exact probability that the chain ever visits a state whose MDP state is in ``target``."""
    nodes = _transient_part(chain, target)
    succ = lambda c: [] if c[0] in target else [n for _, n, _ in chain.edges[c]]
    good = backward_reachable(nodes, succ, {c for c in nodes if c[0] in target})

    def equation(c):
        if c[0] in target:
            return Fraction(1), []
        if c not in good:
            return Fraction(0), []
        return Fraction(0), [(p, n) for _, n, p in chain.edges[c]]

    value = _solve_by_components(nodes, succ, equation)
    return sum((p * value[c] for c, p in chain.initial.items()), Fraction(0))


def exact_expectation(chain: InducedChain, target, dim: int = 0):
    """``E[TS^target_dim]``; ``INF`` iff the target is missed with positive probability."""
    nodes = _transient_part(chain, target)
    succ = lambda c: [] if c[0] in target else [n for _, n, _ in chain.edges[c]]
    goal = {c for c in nodes if c[0] in target}
    good = backward_reachable(nodes, succ, goal)
    if any(c not in good for c in nodes):
        return INF

    def equation(c):
        if c[0] in target:
            return Fraction(0), []
        const = Fraction(0)
        terms = []
        for a, n, p in chain.edges[c]:
            const += p * _positive_edge_weight(chain, a, dim)
            terms.append((p, n))
        return const, terms

    value = _solve_by_components(nodes, succ, equation)
    return sum((p * value[c] for c, p in chain.initial.items()), Fraction(0))
