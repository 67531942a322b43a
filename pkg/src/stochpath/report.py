"""Solver outcomes and their machine-readable rendering."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .model import MooreStrategy


class Decision(enum.Enum):
    YES = "YES"
    NO = "NO"
    UNKNOWN = "UNKNOWN"

    @property
    def exit_code(self) -> int:
        return {"YES": 0, "NO": 1, "UNKNOWN": 2}[self.value]


def render_value(x) -> dict | str:
    """Exact value as ``{"exact": "p/q", "decimal": "..."}``; infinity as ``"inf"``."""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, (int, Fraction)):
        f = Fraction(x)
        exact = str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
        return {"exact": exact, "decimal": f"{float(f):.10g}"}
    if isinstance(x, (list, tuple)):
        return [render_value(v) for v in x]
    return x


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (int, float, str, bool)) or x is None:
        return x
    return str(x)


@dataclass
class SolveReport:
    """Decision plus witness and exactly verified achieved values.

    ``detail`` holds solver internals (value tables, products) and is never
    serialised.
    """

    problem: str
    decision: Decision
    witness: MooreStrategy | None = None
    achieved: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict, repr=False)

    def to_record(self) -> dict:
        return {
            "problem": self.problem,
            "decision": self.decision.value,
            "witness": None if self.witness is None else self.witness.name,
            "achieved": {k: render_value(v) for k, v in self.achieved.items()},
            "stats": _plain(self.stats),
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def to_text(self) -> str:
        lines = [f"problem   {self.problem}", f"decision  {self.decision.value}"]
        for k, v in self.achieved.items():
            lines.append(f"achieved  {k} = {format_value(v)}")
        if self.witness is not None:
            lines.append(f"witness   {self.witness.name} ({len(self.witness.memory)} memory states)")
        for k, v in self.stats.items():
            lines.append(f"stat      {k} = {_plain(v)}")
        return "\n".join(lines) + "\n"


def format_value(x) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, (list, tuple)):
        return "(" + ", ".join(format_value(v) for v in x) + ")"
    if isinstance(x, (int, Fraction)):
        f = Fraction(x)
        if f.denominator == 1:
            return str(f.numerator)
        return f"{f.numerator}/{f.denominator} ({float(f):.10g})"
    return str(x)
