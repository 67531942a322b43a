"""Exact two-phase simplex over Fractions with Bland's anti-cycling rule.

The tableau is stored row-sparse (``dict`` per row): the LPs built by the
solvers are flow systems with a handful of nonzeros per row.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO

from .model import as_rational

_TRACE: contextvars.ContextVar[IO | None] = contextvars.ContextVar("lp_trace", default=None)


@contextlib.contextmanager
def lp_trace(stream: IO):
    """Dump every tableau to ``stream`` while the block runs."""
    token = _TRACE.set(stream)
    try:
        yield
    finally:
        _TRACE.reset(token)


@dataclass
class Variable:
    name: str
    lower: Fraction | None = Fraction(0)
    upper: Fraction | None = None


@dataclass
class LinearConstraint:
    coeffs: dict
    relation: str
    rhs: Fraction


class LinearProgram:
    """``min``/``max`` of a linear objective subject to linear constraints and bounds."""

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError(f"bad sense {sense!r}")
        self.sense = sense
        self.variables: list[Variable] = []
        self._index: dict = {}
        self.objective: dict = {}
        self.constraints: list[LinearConstraint] = []

    def add_variable(self, name, lower=0, upper=None) -> str:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        lo = None if lower is None else as_rational(lower)
        hi = None if upper is None else as_rational(upper)
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, lo, hi))
        return name

    def set_objective(self, coeffs: dict, sense: str | None = None) -> None:
        if sense is not None:
            if sense not in ("min", "max"):
                raise ValueError(f"bad sense {sense!r}")
            self.sense = sense
        self._check(coeffs)
        self.objective = {k: as_rational(v) for k, v in coeffs.items() if v}

    def add_constraint(self, coeffs: dict, relation: str, rhs) -> None:
        if relation not in ("<=", "=", ">="):
            raise ValueError(f"bad relation {relation!r}")
        self._check(coeffs)
        self.constraints.append(LinearConstraint(
            {k: as_rational(v) for k, v in coeffs.items() if v}, relation, as_rational(rhs)))

    def _check(self, coeffs):
        for k in coeffs:
            if k not in self._index:
                raise KeyError(f"unknown variable {k!r}")

    @property
    def size(self) -> tuple[int, int]:
        return len(self.variables), len(self.constraints)

    def is_feasible(self, values: dict) -> bool:
        """Exact substitution check of every constraint and bound."""
        for v in self.variables:
            x = values[v.name]
            if v.lower is not None and x < v.lower:
                return False
            if v.upper is not None and x > v.upper:
                return False
        for c in self.constraints:
            lhs = sum((a * values[k] for k, a in c.coeffs.items()), Fraction(0))
            if c.relation == "<=" and lhs > c.rhs:
                return False
            if c.relation == ">=" and lhs < c.rhs:
                return False
            if c.relation == "=" and lhs != c.rhs:
                return False
        return True

    def evaluate(self, values: dict) -> Fraction:
        return sum((a * values[k] for k, a in self.objective.items()), Fraction(0))


@dataclass
class FarkasCertificate:
    """``y`` with ``y.A <= 0`` and ``y.b > 0`` for the standard form ``A x = b, x >= 0``."""

    y: list
    rows: list
    rhs: list
    ncols: int

    def verify(self) -> bool:
        col = [Fraction(0)] * self.ncols
        for yi, row in zip(self.y, self.rows):
            for j, a in row.items():
                col[j] += yi * a
        yb = sum((yi * b for yi, b in zip(self.y, self.rhs)), Fraction(0))
        return all(c <= 0 for c in col) and yb > 0


@dataclass
class LPResult:
    status: str
    values: dict = field(default_factory=dict)
    objective: Fraction | None = None
    pivots: int = 0
    certificate: object = None


class _Tableau:
    def __init__(self, rows, rhs, basis, ncols):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.ncols = ncols
        self.cost: dict = {}
        self.obj = Fraction(0)
        self.pivots = 0

    def price(self, c: dict):
        """Reduced costs of objective ``c`` (dict col -> coeff) for the current basis."""
        cost = dict(c)
        obj = Fraction(0)
        for i, b in enumerate(self.basis):
            cb = c.get(b, 0)
            if not cb:
                continue
            obj += cb * self.rhs[i]
            for j, a in self.rows[i].items():
                v = cost.get(j, 0) - cb * a
                if v:
                    cost[j] = v
                else:
                    cost.pop(j, None)
        self.cost = cost
        self.obj = obj

    def pivot(self, r, j):
        prow = self.rows[r]
        piv = prow[j]
        if piv != 1:
            inv = 1 / piv
            for k in prow:
                prow[k] *= inv
            self.rhs[r] *= inv
        br = self.rhs[r]
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            f = row.get(j)
            if not f:
                continue
            for k, v in prow.items():
                nv = row.get(k, 0) - f * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            self.rhs[i] -= f * br
        f = self.cost.get(j)
        if f:
            for k, v in prow.items():
                nv = self.cost.get(k, 0) - f * v
                if nv:
                    self.cost[k] = nv
                else:
                    self.cost.pop(k, None)
            self.obj += f * br
        self.basis[r] = j
        self.pivots += 1

    def run(self, allowed, trace=None):
        """Bland's rule minimisation. Returns 'optimal' or ('unbounded', column)."""
        while True:
            if trace is not None:
                self.dump(trace)
            entering = min((j for j, v in self.cost.items() if v < 0 and j in allowed), default=None)
            if entering is None:
                return "optimal"
            best = None
            for i, row in enumerate(self.rows):
                a = row.get(entering)
                if a is not None and a > 0:
                    key = (self.rhs[i] / a, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return ("unbounded", entering)
            self.pivot(best[1], entering)

    def dump(self, out):
        out.write(f"-- tableau after {self.pivots} pivots, objective {self.obj}\n")
        out.write("   cost: " + " ".join(f"c{j}={v}" for j, v in sorted(self.cost.items())) + "\n")
        for i, row in enumerate(self.rows):
            terms = " ".join(f"{v}*c{j}" for j, v in sorted(row.items()))
            out.write(f"   c{self.basis[i]} | {terms} = {self.rhs[i]}\n")


def _standard_form(lp: LinearProgram):
    """Rewrite into ``min c.x, A x = b, x >= 0``.

    Each original variable becomes ``const + sum(coef * std_col)``.
    """
    ncols = 0
    expr = []
    extra_rows = []
    for v in lp.variables:
        if v.lower is not None:
            col = ncols
            ncols += 1
            expr.append((v.lower, [(col, Fraction(1))]))
            if v.upper is not None:
                extra_rows.append(({col: Fraction(1)}, "<=", v.upper - v.lower))
        elif v.upper is not None:
            col = ncols
            ncols += 1
            expr.append((v.upper, [(col, Fraction(-1))]))
        else:
            expr.append((Fraction(0), [(ncols, Fraction(1)), (ncols + 1, Fraction(-1))]))
            ncols += 2

    def translate(coeffs):
        row: dict = {}
        const = Fraction(0)
        for name, a in coeffs.items():
            c0, terms = expr[lp._index[name]]
            const += a * c0
            for col, f in terms:
                nv = row.get(col, 0) + a * f
                if nv:
                    row[col] = nv
                else:
                    row.pop(col, None)
        return row, const

    raw = []
    for c in lp.constraints:
        row, const = translate(c.coeffs)
        raw.append((row, c.relation, c.rhs - const))
    raw.extend(extra_rows)
    rows, rhs = [], []
    for row, rel, b in raw:
        row = dict(row)
        if rel != "=":
            row[ncols] = Fraction(1) if rel == "<=" else Fraction(-1)
            ncols += 1
        if b < 0:
            row = {k: -v for k, v in row.items()}
            b = -b
        rows.append(row)
        rhs.append(b)
    cost, _ = translate(lp.objective)
    if lp.sense == "max":
        cost = {k: -v for k, v in cost.items()}
    return rows, rhs, ncols, cost, expr


def solve_lp(lp: LinearProgram) -> LPResult:
    """Exact optimum, or an infeasibility / unboundedness certificate."""
    trace = _TRACE.get()
    rows, rhs, ncols, cost, expr = _standard_form(lp)
    std_rows = [dict(r) for r in rows]
    std_rhs = list(rhs)
    m = len(rows)
    art0 = ncols
    tab = _Tableau([dict(r) for r in rows], list(rhs), [art0 + i for i in range(m)], ncols + m)
    for i in range(m):
        tab.rows[i][art0 + i] = Fraction(1)
    if trace is not None:
        trace.write(f"== LP with {len(lp.variables)} variables, {len(lp.constraints)} constraints; phase 1\n")
    tab.price({art0 + i: Fraction(1) for i in range(m)})
    tab.run(set(range(ncols + m)), trace)
    if tab.obj > 0:
        y = [1 - tab.cost.get(art0 + i, 0) for i in range(m)]
        cert = FarkasCertificate(y, std_rows, std_rhs, ncols)
        return LPResult("infeasible", pivots=tab.pivots, certificate=cert)

    # drive zero-level artificials out of the basis, dropping redundant rows
    i = 0
    while i < len(tab.rows):
        if tab.basis[i] >= art0:
            j = min((k for k, v in tab.rows[i].items() if k < art0 and v != 0), default=None)
            if j is None:
                tab.rows.pop(i)
                tab.rhs.pop(i)
                tab.basis.pop(i)
                continue
            tab.pivot(i, j)
        i += 1
    for row in tab.rows:
        for k in [k for k in row if k >= art0]:
            del row[k]

    if trace is not None:
        trace.write("== phase 2\n")
    tab.price(cost)
    status = tab.run(set(range(art0)), trace)
    x = [Fraction(0)] * ncols
    for i, b in enumerate(tab.basis):
        x[b] = tab.rhs[i]
    values = {}
    for v, (c0, terms) in zip(lp.variables, expr):
        values[v.name] = c0 + sum((f * x[col] for col, f in terms), Fraction(0))
    if status != "optimal":
        col = status[1]
        d = [Fraction(0)] * ncols
        d[col] = Fraction(1)
        for i, b in enumerate(tab.basis):
            a = tab.rows[i].get(col, 0)
            if a:
                d[b] = -a
        ray = {v.name: sum((f * d[c] for c, f in terms), Fraction(0))
               for v, (c0, terms) in zip(lp.variables, expr)}
        return LPResult("unbounded", values, None, tab.pivots, {"point": values, "ray": ray})
    return LPResult("optimal", values, lp.evaluate(values), tab.pivots)
