"""Products of an MDP with finite bookkeeping, and pulling strategies back.

A :class:`ProductMdp` is an MDP whose states shadow base-model states plus
some extra information (accumulated weights, satisfied-constraint sets).
``split(x)`` recovers ``(base_state, key)`` and ``lift(x, a, s2)`` the product
successor reached when the base model moves to ``s2``. Together they let a
strategy computed on the product be replayed on the base model as a Moore
machine whose memory is ``key``.

The weight unfolding tracks accumulated weight on selected dimensions. A
coordinate that exceeds its cap becomes ``None`` (written ``_``); when
compressing, a state whose every coordinate is exceeded collapses into the
single :data:`SINK`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .model import Distribution, MooreStrategy, WeightedMdp

SINK = "⊥"
SINK_ACTION = "⊥"
_OFF = object()


@dataclass(frozen=True)
class ProductMdp:
    mdp: WeightedMdp
    base: WeightedMdp
    split: Callable
    lift: Callable
    stats: dict = field(default_factory=dict)

    def restricted(self, mdp: WeightedMdp) -> "ProductMdp":
        """Same bookkeeping over a sub-MDP (fewer actions or absorbing states)."""
        return replace(self, mdp=mdp)


def format_vector(v: tuple) -> str:
    return "v" + ".".join("_" if x is None else str(x) for x in v)


@dataclass(frozen=True)
class UnfoldedMdp(ProductMdp):
    tracked: tuple = (0,)
    caps: tuple = (0,)
    compress: bool = True

    def coordinate(self, x, dim: int):
        """Accumulated weight of ``x`` on model dimension ``dim`` (``None`` once exceeded)."""
        if x == SINK:
            return None
        return x[1][self.tracked.index(dim)]

    def target_prime(self, target, dim: int | None = None, bound: int | None = None) -> frozenset:
        """States ``(s, v)`` with ``s`` in ``target`` and ``v[dim] <= bound``."""
        dim = self.tracked[0] if dim is None else dim
        j = self.tracked.index(dim)
        bound = self.caps[j] if bound is None else bound
        return frozenset(
            x for x in self.mdp.states
            if x != SINK and x[0] in target and x[1][j] is not None and x[1][j] <= bound)


def build_unfolding(model: WeightedMdp, bounds, tracked_dims: Sequence[int] | None = None,
                    compress: bool = True) -> UnfoldedMdp:
    """Unfold ``model`` with accumulated weights capped at ``bounds``.

    ``bounds`` is an int (one tracked dimension, dimension 0 by default) or a
    sequence aligned with ``tracked_dims``. Without compression every
    coordinate is capped at the largest bound and fully exceeded states are
    kept, one per base state.
    """
    if isinstance(bounds, int):
        bounds = (bounds,)
    bounds = tuple(bounds)
    if tracked_dims is None:
        tracked_dims = tuple(range(len(bounds)))
    tracked = tuple(tracked_dims)
    if len(tracked) != len(bounds):
        raise ValueError("one bound per tracked dimension is required")
    if len(set(tracked)) != len(tracked):
        raise ValueError("tracked dimensions must be distinct")
    if any(b < 0 for b in bounds):
        raise ValueError(f"bounds must be nonnegative, got {bounds}")
    caps = bounds if compress else (max(bounds),) * len(bounds)
    model.check_positive(tracked)

    def step(v, a):
        out = []
        for j, k in enumerate(tracked):
            x = v[j]
            if x is not None:
                x += model.weight[a][k]
                if x > caps[j]:
                    x = None
            out.append(x)
        return tuple(out)

    def lift(x, a, s2):
        if x == SINK:
            return SINK
        v2 = step(x[1], a)
        if compress and all(c is None for c in v2):
            return SINK
        return (s2, v2)

    def split(x):
        if x == SINK:
            return None, "sink"
        return x[0], format_vector(x[1])

    x0 = (model.initial, (0,) * len(tracked))
    order = [x0]
    seen = {x0}
    queue = deque(order)
    enabled: dict = {}
    delta: dict = {}
    while queue:
        x = queue.popleft()
        if x == SINK:
            enabled[x] = (SINK_ACTION,)
            delta[(x, SINK_ACTION)] = Distribution.dirac(SINK)
            continue
        s, v = x
        enabled[x] = model.enabled[s]
        for a in model.enabled[s]:
            succ: dict = {}
            for s2, p in model.delta[(s, a)].items():
                x2 = lift(x, a, s2)
                succ[x2] = succ.get(x2, 0) + p
                if x2 not in seen:
                    seen.add(x2)
                    order.append(x2)
                    queue.append(x2)
            delta[(x, a)] = Distribution(succ)
    weight = dict(model.weight)
    if SINK in seen:
        weight[SINK_ACTION] = (1,) * model.dims
    groups = {g: frozenset(x for x in order if x != SINK and x[0] in members)
              for g, members in model.groups.items()}
    mdp = WeightedMdp(tuple(order), x0, enabled, delta, weight, model.dims,
                      f"{model.name}-unfolded", model.dim_names, groups)
    return UnfoldedMdp(mdp, model, split, lift, {"unfolded_states": len(order)},
                       tracked, caps, compress)


def absorbing(mdp: WeightedMdp, stop) -> WeightedMdp:
    """Copy of ``mdp`` where every state in ``stop`` loops on itself, and unreachable states are pruned."""
    delta = {}
    enabled = {}
    order = [mdp.initial]
    seen = {mdp.initial}
    queue = deque(order)
    while queue:
        x = queue.popleft()
        enabled[x] = mdp.enabled[x]
        for a in mdp.enabled[x]:
            d = Distribution.dirac(x) if x in stop else mdp.delta[(x, a)]
            delta[(x, a)] = d
            for y in d:
                if y not in seen:
                    seen.add(y)
                    order.append(y)
                    queue.append(y)
    groups = {g: frozenset(m) & seen for g, m in mdp.groups.items()}
    return WeightedMdp(tuple(order), mdp.initial, enabled, delta, mdp.weight, mdp.dims,
                       mdp.name, mdp.dim_names, groups)


def restrict_actions(mdp: WeightedMdp, allowed) -> WeightedMdp:
    """Sub-MDP keeping ``allowed[x]`` (nonempty) at reachable states."""
    enabled = {}
    delta = {}
    order = [mdp.initial]
    seen = {mdp.initial}
    queue = deque(order)
    while queue:
        x = queue.popleft()
        acts = tuple(allowed[x]) if x in allowed else mdp.enabled[x]
        if not acts:
            raise ValueError(f"no allowed action at reachable state {x!r}")
        enabled[x] = acts
        for a in acts:
            delta[(x, a)] = mdp.delta[(x, a)]
            for y in mdp.delta[(x, a)]:
                if y not in seen:
                    seen.add(y)
                    order.append(y)
                    queue.append(y)
    groups = {g: frozenset(m) & seen for g, m in mdp.groups.items()}
    return WeightedMdp(tuple(order), mdp.initial, enabled, delta, mdp.weight, mdp.dims,
                       mdp.name, mdp.dim_names, groups)


def pull_back(product: ProductMdp, strategy: MooreStrategy, name: str | None = None,
              stop=None) -> MooreStrategy:
    """Replay a strategy on ``product.mdp`` as a Moore machine on ``product.base``.

    Memory labels are the product keys, suffixed with ``|m`` when the product
    strategy itself has memory. Once the product reaches a sink, or a state
    that ``product.mdp`` does not contain (it was pruned or made absorbing),
    the machine enters memory ``sink`` and plays each state's first action.
    ``stop(x)`` marks further product states after which behaviour no longer
    matters (the objective is settled); they are treated like the sink.
    """
    base = product.base
    memoryful = not strategy.is_memoryless()

    known = product.mdp.state_index

    def is_sink(x):
        return x is _OFF or product.split(x)[0] is None

    def label(x, m):
        if is_sink(x):
            return "sink"
        _, key = product.split(x)
        return f"{key}|{m}" if memoryful else key

    next_action: dict = {}
    updates: dict = {}
    memory: dict = {}
    init: dict = {}
    queue = deque()
    seen = set()

    def visit(s, x, m):
        node = (s, x, m) if is_sink(x) else (x, m)
        if node not in seen:
            seen.add(node)
            queue.append((s, x, m))

    for m, p in strategy.initial_memory.items():
        x0 = product.mdp.initial
        lab = label(x0, m)
        init[lab] = init.get(lab, 0) + p
        visit(base.initial, x0, m)

    while queue:
        s, x, m = queue.popleft()
        lab = label(x, m)
        memory.setdefault(lab, None)
        if is_sink(x):
            a = base.enabled[s][0]
            next_action[(s, lab)] = Distribution.dirac(a)
            for s2 in base.delta[(s, a)]:
                visit(s2, x, m)
            continue
        dist = strategy.action_dist(product.mdp, x, m)
        prev = next_action.get((s, lab))
        if prev is not None and prev != dist:
            raise ValueError(f"inconsistent pullback at {(s, lab)!r}")
        next_action[(s, lab)] = dist
        for a in dist:
            for s2 in base.delta[(s, a)]:
                x2 = product.lift(x, a, s2)
                if x2 not in known or (stop is not None and stop(x2)):
                    x2 = _OFF
                acc: dict = {}
                mem = {m: 1} if x2 is _OFF else strategy.update_dist(a, x2, m)
                for m2, p in mem.items():
                    lab2 = label(x2, m2)
                    acc[lab2] = acc.get(lab2, 0) + p
                    visit(s2, x2, m2)
                upd = Distribution(acc)
                key = (a, s2, lab)
                if key in updates and updates[key] != upd:
                    raise ValueError(f"inconsistent memory update at {key!r}")
                if not (upd.is_dirac() and lab in upd):
                    updates[key] = upd
    return MooreStrategy(tuple(memory), next_action, updates, Distribution(init),
                         name or f"{strategy.name}-pulled-back")
