"""Small graph utilities shared by the solvers: SCCs, reachability, end components."""

from __future__ import annotations

from collections import deque
from typing import Callable, Hashable, Iterable


def forward_reachable(starts: Iterable[Hashable], succ: Callable) -> set:
    seen = set(starts)
    queue = deque(seen)
    while queue:
        node = queue.popleft()
        for nxt in succ(node):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def backward_reachable(nodes: Iterable[Hashable], succ: Callable, goal: set) -> set:
    """Nodes from which some node in ``goal`` is reachable (goal included)."""
    nodes = list(nodes)
    preds: dict = {n: [] for n in nodes}
    for n in nodes:
        for m in succ(n):
            preds.setdefault(m, []).append(n)
    seen = {g for g in goal}
    queue = deque(seen)
    while queue:
        node = queue.popleft()
        for p in preds.get(node, ()):
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return seen


def tarjan_scc(nodes: Iterable[Hashable], succ: Callable) -> list[list]:
    """Strongly connected components, successors before predecessors.

    Iterative so that long chains (unfoldings) do not hit the recursion limit.
    """
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[list] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(succ(nxt))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    top = stack.pop()
                    on_stack.discard(top)
                    comp.append(top)
                    if top == node:
                        break
                out.append(comp)
    return out


def maximal_end_components(states: Iterable, actions: Callable, support: Callable) -> list[tuple[set, dict]]:
    """MEC decomposition by iterated SCC refinement.

    ``actions(s)`` lists enabled actions, ``support(s, a)`` the successor states.
    Successors outside ``states`` count as leaving. Returns ``(states, allowed)``
    pairs where ``allowed[s]`` are the actions that stay inside the component.
    """
    alive = set(states)
    allowed = {s: [a for a in actions(s)] for s in alive}
    while True:
        def succ(s):
            for a in allowed[s]:
                for t in support(s, a):
                    if t in alive:
                        yield t

        comps = tarjan_scc(sorted(alive, key=repr), succ)
        comp_of = {}
        for i, comp in enumerate(comps):
            for s in comp:
                comp_of[s] = i
        changed = False
        for s in list(alive):
            keep = [a for a in allowed[s]
                    if all(t in alive and comp_of[t] == comp_of[s] for t in support(s, a))]
            if len(keep) != len(allowed[s]):
                allowed[s] = keep
                changed = True
        dead = [s for s in alive if not allowed[s]]
        if dead:
            changed = True
            for s in dead:
                alive.discard(s)
        if not changed:
            return [(set(c), {s: allowed[s] for s in c}) for c in comps]
