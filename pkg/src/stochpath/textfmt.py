"""Line-oriented text formats for models (.mdp), queries (.query) and strategies (.strat).

Model::

    mdp commute dims 2 dimnames time cost
    state home init
    state work target work
    action home bus weight 30 3 -> work 7/10, home 3/10
    env (A)
    action h2 go_h2 weight 15 -> h2 1

Query::

    problem ssppq
    constraint dim=time target=work bound<=40 prob>=4/5

Strategy::

    strategy bus-then-taxi
    memory first later
    init first 1
    act home first -> bus 1
    upd bus home first -> later 1

Rationals are integers, ``p/q`` fractions or decimals with at most nine
fractional digits; all are converted exactly. ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .model import Distribution, MooreStrategy, WeightedMdp
from .multienv import MultiEnvMdp

_TOKEN = re.compile(r"[^\s,]+|,")
_RATIONAL = re.compile(r"^(\d+)(?:/(\d+)|\.(\d{1,9}))?$")
_INT = re.compile(r"^-?\d+$")

PROBLEMS = ("sspe", "sspp", "spg", "sspwe", "ssppq", "sspme")


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


@dataclass
class _Tok:
    text: str
    line: int
    col: int


class _Line:
    """Cursor over the tokens of one record."""

    def __init__(self, toks: list, line: int, length: int):
        self.toks = toks
        self.i = 0
        self.line = line
        self.end_col = length + 1

    def error(self, message: str, tok: _Tok | None = None) -> ParseError:
        if tok is None:
            tok = self.toks[self.i] if self.i < len(self.toks) else None
        col = tok.col if tok is not None else self.end_col
        return ParseError(message, self.line, col)

    def peek(self) -> str | None:
        return self.toks[self.i].text if self.i < len(self.toks) else None

    def next(self, what: str) -> _Tok:
        if self.i >= len(self.toks):
            raise self.error(f"expected {what}")
        tok = self.toks[self.i]
        if tok.text == ",":
            raise self.error(f"expected {what}, found ','")
        self.i += 1
        return tok

    def expect(self, word: str) -> _Tok:
        tok = self.next(f"'{word}'")
        if tok.text != word:
            raise self.error(f"expected '{word}', found '{tok.text}'", tok)
        return tok

    def accept(self, text: str) -> bool:
        if self.peek() == text:
            self.i += 1
            return True
        return False

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def finish(self) -> None:
        if not self.done():
            raise self.error(f"unexpected '{self.toks[self.i].text}'")

    def rational(self, what: str = "probability") -> Fraction:
        tok = self.next(what)
        value = parse_rational(tok.text)
        if value is None:
            raise self.error(f"bad {what} '{tok.text}'", tok)
        return value

    def integer(self, what: str = "integer") -> int:
        tok = self.next(what)
        if not _INT.match(tok.text):
            raise self.error(f"bad {what} '{tok.text}'", tok)
        return int(tok.text)

    def weighted_list(self, what: str):
        """``<id> <p>, <id> <p>, ...`` until the end of the record."""
        items = []
        while True:
            key = self.next(what)
            p = self.rational()
            items.append((key, p))
            if self.done():
                return items
            if not self.accept(","):
                raise self.error("expected ',' between entries")


def parse_rational(text: str) -> Fraction | None:
    m = _RATIONAL.match(text)
    if not m:
        return None
    whole, den, frac = m.groups()
    if den is not None:
        if int(den) == 0:
            return None
        return Fraction(int(whole), int(den))
    if frac is not None:
        return Fraction(int(whole + frac), 10 ** len(frac))
    return Fraction(int(whole))


def format_rational(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _records(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = [_Tok(m.group(), lineno, m.start() + 1) for m in _TOKEN.finditer(body)]
        if toks:
            yield _Line(toks, lineno, len(body.rstrip()))


def _checked_distribution(cur: _Line, items, first_tok: _Tok) -> Distribution:
    total = sum((p for _, p in items), Fraction(0))
    if total != 1:
        raise cur.error(f"probabilities sum to {format_rational(total)}, not 1", first_tok)
    seen = set()
    for key, _ in items:
        if key.text in seen:
            raise cur.error(f"duplicate entry '{key.text}'", key)
        seen.add(key.text)
    return Distribution((k.text, p) for k, p in items)


# -- models -------------------------------------------------------------------

def parse_model(text: str) -> WeightedMdp | MultiEnvMdp:
    records = iter(_records(text))
    head = next(records, None)
    if head is None or head.peek() != "mdp":
        if head is None:
            raise ParseError("expected 'mdp' header", 1, 1)
        raise head.error("expected 'mdp' header")
    head.expect("mdp")
    name = head.next("model name").text
    head.expect("dims")
    dims_tok = head.toks[head.i] if not head.done() else None
    dims = head.integer("dimension count")
    if dims < 1:
        raise head.error("dims must be positive", dims_tok)
    dim_names: tuple = ()
    if head.accept("dimnames"):
        names = []
        while not head.done():
            names.append(head.next("dimension name").text)
        if len(names) != dims:
            raise head.error(f"expected {dims} dimension names, got {len(names)}")
        if len(set(names)) != len(names):
            raise head.error("duplicate dimension name")
        dim_names = tuple(names)
    head.finish()

    states: list = []
    state_tok: dict = {}
    initial = None
    groups: dict = {}
    enabled: dict = {}
    delta: dict = {}
    weight: dict = {}
    refs: list = []
    env_names: list = []
    env_over: list = []
    env_weight: list = []

    for cur in records:
        kw = cur.next("keyword")
        if kw.text == "state":
            if env_names:
                raise cur.error("state declarations must precede env blocks", kw)
            sid = cur.next("state id")
            if sid.text in state_tok:
                raise cur.error(f"duplicate state '{sid.text}'", sid)
            state_tok[sid.text] = sid
            states.append(sid.text)
            while not cur.done():
                opt = cur.next("'init' or 'target'")
                if opt.text == "init":
                    if initial is not None:
                        raise cur.error("second initial state", opt)
                    initial = sid.text
                elif opt.text == "target":
                    g = cur.next("target group")
                    groups.setdefault(g.text, [])
                    if sid.text not in groups[g.text]:
                        groups[g.text].append(sid.text)
                else:
                    raise cur.error(f"expected 'init' or 'target', found '{opt.text}'", opt)
        elif kw.text == "action":
            s = cur.next("state id")
            a = cur.next("action id")
            cur.expect("weight")
            w = tuple(cur.integer("weight") for _ in range(dims))
            arrow = cur.expect("->")
            items = cur.weighted_list("successor state")
            dist = _checked_distribution(cur, items, arrow)
            refs.append((cur, s))
            refs.extend((cur, k) for k, _ in items)
            if env_names:
                if (s.text, a.text) not in delta:
                    raise cur.error(f"env override for undeclared action '{a.text}' at '{s.text}'", a)
                if (s.text, a.text) in env_over[-1]:
                    raise cur.error(f"duplicate override of '{a.text}' at '{s.text}'", a)
                env_over[-1][(s.text, a.text)] = dist
                if w != weight[a.text]:
                    env_weight[-1][a.text] = w
                continue
            if (s.text, a.text) in delta:
                raise cur.error(f"duplicate action '{a.text}' at state '{s.text}'", a)
            if a.text in weight and weight[a.text] != w:
                raise cur.error(f"action '{a.text}' redeclared with a different weight", a)
            weight[a.text] = w
            enabled.setdefault(s.text, []).append(a.text)
            delta[(s.text, a.text)] = dist
        elif kw.text == "env":
            en = cur.next("environment name")
            if en.text in env_names:
                raise cur.error(f"duplicate environment '{en.text}'", en)
            env_names.append(en.text)
            env_over.append({})
            env_weight.append({})
        else:
            raise cur.error(f"unknown record '{kw.text}'", kw)
        cur.finish()

    for cur, tok in refs:
        if tok.text not in state_tok:
            raise cur.error(f"undeclared state '{tok.text}'", tok)
    for s in states:
        if s not in enabled:
            tok = state_tok[s]
            raise ParseError(f"state '{s}' has no action", tok.line, tok.col)
    if initial is None:
        raise ParseError("no initial state declared", 1, 1)
    model = WeightedMdp(tuple(states), initial, {s: tuple(v) for s, v in enabled.items()}, delta, weight,
                        dims, name, dim_names, {g: tuple(v) for g, v in groups.items()})
    if env_names:
        return MultiEnvMdp(model, tuple(env_names), tuple(env_over), tuple(env_weight))
    return model


def _action_line(model: WeightedMdp, s, a, dist, weight) -> str:
    succ = ", ".join(f"{t} {format_rational(p)}" for t, p in dist.items())
    w = " ".join(str(x) for x in weight)
    return f"action {s} {a} weight {w} -> {succ}"


def serialize_model(model: WeightedMdp | MultiEnvMdp) -> str:
    """Canonical text: declaration order, lowest-terms rationals."""
    envs = None
    if isinstance(model, MultiEnvMdp):
        envs = model
        model = model.base
    head = f"mdp {model.name} dims {model.dims}"
    if model.dim_names:
        head += " dimnames " + " ".join(model.dim_names)
    lines = [head]
    member: dict = {s: [] for s in model.states}
    for g, ms in model.groups.items():
        for s in ms:
            member[s].append(g)
    for s in model.states:
        line = f"state {s}"
        if s == model.initial:
            line += " init"
        for g in member[s]:
            line += f" target {g}"
        lines.append(line)
    for s in model.states:
        for a in model.enabled[s]:
            lines.append(_action_line(model, s, a, model.delta[(s, a)], model.weight[a]))
    if envs is not None:
        for name, block, wblock in zip(envs.env_names, envs.overrides, envs.weight_overrides):
            lines.append(f"env {name}")
            for (s, a), dist in block.items():
                lines.append(_action_line(model, s, a, dist, wblock.get(a, model.weight[a])))
    return "\n".join(lines) + "\n"


# -- queries ------------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    """Percentile constraint ``P[TS^target_dim <= bound] >= prob``.

    ``dim`` is kept as written: a 1-based index or a dimension name.
    """

    target: str
    dim: str
    bound: int
    prob: Fraction


@dataclass(frozen=True)
class EnvConstraint:
    env: str
    bound: int
    prob: Fraction


@dataclass(frozen=True)
class Query:
    problem: str | None = None
    target: str | None = None
    dim: str | None = None
    constraints: tuple = ()
    worstcase: int | None = None
    expectation: Fraction | None = None
    envs: tuple = ()
    epsilon: Fraction | None = None


def resolve_dim(model: WeightedMdp, dim: str | int | None) -> int:
    """0-based dimension index from a 1-based number or a dimension name."""
    if dim is None:
        return 0
    if isinstance(dim, int):
        return model.dim_index(dim)
    if dim.isdigit():
        return model.dim_index(int(dim) - 1)
    return model.dim_index(dim)


def _keyval(cur: _Line, key: str, rel: str) -> tuple[_Tok, str]:
    tok = cur.next(f"{key}{rel}")
    prefix = key + rel
    if not tok.text.startswith(prefix) or len(tok.text) == len(prefix):
        raise cur.error(f"expected '{prefix}<value>'", tok)
    return tok, tok.text[len(prefix):]


def _prob(cur: _Line, tok: _Tok, text: str) -> Fraction:
    p = parse_rational(text)
    if p is None:
        raise cur.error(f"bad probability '{text}'", tok)
    if p > 1:
        raise cur.error(f"probability {format_rational(p)} exceeds 1", tok)
    return p


def _bound(cur: _Line, tok: _Tok, text: str) -> int:
    if not text.isdigit():
        raise cur.error(f"bad bound '{text}'", tok)
    return int(text)


def parse_query(text: str) -> Query:
    fields: dict = {"constraints": [], "envs": []}
    for cur in _records(text):
        kw = cur.next("keyword")
        k = kw.text
        if k == "problem":
            tok = cur.next("problem name")
            if tok.text not in PROBLEMS:
                raise cur.error(f"unknown problem '{tok.text}'", tok)
            fields["problem"] = tok.text
        elif k == "target":
            fields["target"] = cur.next("target").text
        elif k == "dim":
            fields["dim"] = cur.next("dimension").text
        elif k == "constraint":
            _, dim = _keyval(cur, "dim", "=")
            _, target = _keyval(cur, "target", "=")
            bt, b = _keyval(cur, "bound", "<=")
            pt, p = _keyval(cur, "prob", ">=")
            fields["constraints"].append(Constraint(target, dim, _bound(cur, bt, b), _prob(cur, pt, p)))
        elif k.startswith("worstcase<="):
            fields["worstcase"] = _bound(cur, kw, k[len("worstcase<="):])
        elif k.startswith("expectation<="):
            v = parse_rational(k[len("expectation<="):])
            if v is None:
                raise cur.error(f"bad expectation bound '{k}'", kw)
            fields["expectation"] = v
        elif k == "env":
            name = cur.next("environment name").text
            bt, b = _keyval(cur, "bound", "<=")
            pt, p = _keyval(cur, "prob", ">=")
            fields["envs"].append(EnvConstraint(name, _bound(cur, bt, b), _prob(cur, pt, p)))
        elif k == "epsilon":
            fields["epsilon"] = cur.rational("epsilon")
        else:
            raise cur.error(f"unknown query record '{k}'", kw)
        cur.finish()
    fields["constraints"] = tuple(fields["constraints"])
    fields["envs"] = tuple(fields["envs"])
    return Query(**fields)


def serialize_query(q: Query) -> str:
    lines = []
    if q.problem is not None:
        lines.append(f"problem {q.problem}")
    if q.target is not None:
        lines.append(f"target {q.target}")
    if q.dim is not None:
        lines.append(f"dim {q.dim}")
    for c in q.constraints:
        lines.append(f"constraint dim={c.dim} target={c.target} bound<={c.bound} prob>={format_rational(c.prob)}")
    if q.worstcase is not None:
        lines.append(f"worstcase<={q.worstcase}")
    if q.expectation is not None:
        lines.append(f"expectation<={format_rational(q.expectation)}")
    for e in q.envs:
        lines.append(f"env {e.env} bound<={e.bound} prob>={format_rational(e.prob)}")
    if q.epsilon is not None:
        lines.append(f"epsilon {format_rational(q.epsilon)}")
    return "\n".join(lines) + "\n"


# -- strategies ---------------------------------------------------------------

def parse_strategy(text: str) -> MooreStrategy:
    name = "strategy"
    memory: list = []
    init = None
    nxt: dict = {}
    upd: dict = {}
    for cur in _records(text):
        kw = cur.next("keyword")
        if kw.text == "strategy":
            name = cur.next("strategy name").text
        elif kw.text == "memory":
            while not cur.done():
                m = cur.next("memory element")
                if m.text in memory:
                    raise cur.error(f"duplicate memory element '{m.text}'", m)
                memory.append(m.text)
        elif kw.text == "init":
            if init is not None:
                raise cur.error("second 'init' record", kw)
            init = _checked_distribution(cur, cur.weighted_list("memory element"), kw)
        elif kw.text == "act":
            s = cur.next("state").text
            m = cur.next("memory element").text
            arrow = cur.expect("->")
            if (s, m) in nxt:
                raise cur.error(f"duplicate 'act' for ({s}, {m})", kw)
            nxt[(s, m)] = _checked_distribution(cur, cur.weighted_list("action"), arrow)
        elif kw.text == "upd":
            a = cur.next("action").text
            s = cur.next("state").text
            m = cur.next("memory element").text
            arrow = cur.expect("->")
            if (a, s, m) in upd:
                raise cur.error(f"duplicate 'upd' for ({a}, {s}, {m})", kw)
            items = cur.weighted_list("memory element")
            for tok, _ in items:
                if tok.text not in memory:
                    raise cur.error(f"undeclared memory element '{tok.text}'", tok)
            upd[(a, s, m)] = _checked_distribution(cur, items, arrow)
        else:
            raise cur.error(f"unknown strategy record '{kw.text}'", kw)
        cur.finish()
    if not memory:
        raise ParseError("no 'memory' record", 1, 1)
    if init is None:
        raise ParseError("no 'init' record", 1, 1)
    for m in list(init) + [k[1] for k in nxt] + [k[2] for k in upd]:
        if m not in memory:
            raise ParseError(f"undeclared memory element '{m}'", 1, 1)
    return MooreStrategy(tuple(memory), nxt, upd, init, name)


def serialize_strategy(strategy: MooreStrategy) -> str:
    def dist(d):
        return ", ".join(f"{k} {format_rational(p)}" for k, p in d.items())

    lines = [f"strategy {strategy.name}", "memory " + " ".join(str(m) for m in strategy.memory),
             f"init {dist(strategy.initial_memory)}"]
    for (s, m), d in strategy.next_action.items():
        lines.append(f"act {s} {m} -> {dist(d)}")
    for (a, s, m), d in strategy.memory_update.items():
        lines.append(f"upd {a} {s} {m} -> {dist(d)}")
    return "\n".join(lines) + "\n"


def read_file(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()
