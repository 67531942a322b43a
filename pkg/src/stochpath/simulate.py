"""Monte Carlo cross-checks of exact results.

Runs are sampled in blocks of :data:`BLOCK` runs; block ``j`` draws from
``numpy.random.SeedSequence(seed, spawn_key=(j,))`` with PCG64, so results do
not depend on how blocks are spread over threads. ``STOCHPATH_THREADS`` caps
the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import MooreStrategy, WeightedMdp, induce_chain

BLOCK = 8192


@dataclass(frozen=True)
class SimConstraint:
    """Event ``TS^target_dim <= bound``; with ``bound=None`` the mean of ``TS`` is estimated instead."""

    label: str
    target: frozenset
    dim: int = 0
    bound: int | None = None


@dataclass(frozen=True)
class SimulationReport:
    runs: int
    seed: int
    empirical: dict
    ci_halfwidth: dict
    truncated_at: int
    unresolved: int = 0

    def to_text(self) -> str:
        lines = [f"runs      {self.runs}", f"seed      {self.seed}", f"step_cap  {self.truncated_at}",
                 f"unresolved {self.unresolved}"]
        for k in self.empirical:
            lines.append(f"estimate  {k} = {self.empirical[k]!r} +- {self.ci_halfwidth[k]!r}")
        return "\n".join(lines) + "\n"

    def to_record(self) -> dict:
        return {"runs": self.runs, "seed": self.seed, "step_cap": self.truncated_at,
                "unresolved": self.unresolved,
                "empirical": {k: _num(v) for k, v in self.empirical.items()},
                "ci_halfwidth": {k: _num(v) for k, v in self.ci_halfwidth.items()}}


def _num(x: float):
    return "inf" if math.isinf(x) else x


class _CompiledChain:
    """Induced chain flattened into arrays for vectorised stepping."""

    def __init__(self, model: WeightedMdp, strategy: MooreStrategy, constraints):
        chain = induce_chain(model, strategy)
        index = {c: i for i, c in enumerate(chain.states)}
        width = max(len(e) for e in chain.edges.values())
        n = len(chain.states)
        self.cum = np.ones((n, width))
        self.next = np.zeros((n, width), dtype=np.int64)
        dims = sorted({c.dim for c in constraints})
        self.dims = dims
        self.w = np.zeros((n, width, len(dims)), dtype=np.int64)
        for c, edges in chain.edges.items():
            i = index[c]
            acc = 0.0
            for j, (a, nxt, p) in enumerate(edges):
                acc += float(p)
                self.cum[i, j] = acc
                self.next[i, j] = index[nxt]
                self.w[i, j] = [model.w(a, d) for d in dims]
            self.cum[i, len(edges) - 1:] = 1.0
            self.next[i, len(edges):] = self.next[i, len(edges) - 1]
        self.init_states = np.array([index[c] for c in chain.initial], dtype=np.int64)
        self.init_cum = np.cumsum([float(p) for p in chain.initial.values()])
        self.init_cum[-1] = 1.0
        self.in_target = np.array([[c[0] in k.target for c in chain.states] for k in constraints],
                                  dtype=bool).reshape(len(constraints), n)


def _sample_block(cc: _CompiledChain, constraints, seed: int, block: int, runs: int, cap: int):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))
    cur = cc.init_states[np.searchsorted(cc.init_cum, rng.random(runs), side="right").clip(
        max=len(cc.init_states) - 1)]
    acc = np.zeros((runs, len(cc.dims)), dtype=np.int64)
    q = len(constraints)
    ts = np.full((q, runs), -1, dtype=np.int64)
    for k in range(q):
        ts[k, cc.in_target[k, cur]] = 0
    rows = np.arange(runs)
    for _ in range(cap):
        live = (ts < 0).any(axis=0)
        if not live.any():
            break
        idx = rows[live]
        u = rng.random(len(idx))
        st = cur[idx]
        j = (u[:, None] >= cc.cum[st]).sum(axis=1).clip(max=cc.cum.shape[1] - 1)
        acc[idx] += cc.w[st, j]
        cur[idx] = cc.next[st, j]
        for k in range(q):
            newly = idx[(ts[k, idx] < 0) & cc.in_target[k, cur[idx]]]
            ts[k, newly] = acc[newly, cc.dims.index(constraints[k].dim)]
    return ts


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("STOCHPATH_THREADS", "1")))
    except ValueError:
        return 1


def simulate(model: WeightedMdp, strategy: MooreStrategy, constraints, runs: int = 100_000,
             seed: int = 0, step_cap: int | None = None) -> SimulationReport:
    """Sample ``runs`` runs of the induced chain and estimate every constraint.

    Runs that have not reached a constraint's target after ``step_cap`` steps
    count as ``TS = inf`` for it. The default cap is ``10 * (l + |S|)`` with
    ``l`` the largest bound.
    """
    constraints = list(constraints)
    if runs < 1:
        raise ValueError("runs must be positive")
    if step_cap is None:
        ell = max((c.bound for c in constraints if c.bound is not None), default=0)
        step_cap = 10 * (ell + len(model.states))
    if step_cap < 1:
        raise ValueError("step_cap must be at least 1")
    cc = _CompiledChain(model, strategy, constraints)
    sizes = [min(BLOCK, runs - b * BLOCK) for b in range(math.ceil(runs / BLOCK))]
    jobs = [(b, n) for b, n in enumerate(sizes)]
    threads = min(_threads(), len(jobs))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda job: _sample_block(cc, constraints, seed, job[0], job[1], step_cap), jobs))
    else:
        parts = [_sample_block(cc, constraints, seed, b, n, step_cap) for b, n in jobs]
    ts = np.concatenate(parts, axis=1)
    empirical, half = {}, {}
    for k, c in enumerate(constraints):
        reached = ts[k] >= 0
        if c.bound is None:
            if not reached.all():
                empirical[c.label], half[c.label] = math.inf, math.inf
                continue
            vals = ts[k].astype(float)
            empirical[c.label] = float(vals.mean())
            half[c.label] = float(3 * vals.std(ddof=1) / math.sqrt(runs)) if runs > 1 else math.inf
        else:
            p = float((reached & (ts[k] <= c.bound)).sum()) / runs
            empirical[c.label] = p
            half[c.label] = 3 * math.sqrt(p * (1 - p) / runs)
    unresolved = int((ts < 0).any(axis=0).sum())
    return SimulationReport(runs, seed, empirical, half, step_cap, unresolved)
