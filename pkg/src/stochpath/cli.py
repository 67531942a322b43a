"""``stochpath`` command line.

Exit codes: 0 YES (or success), 1 NO, 2 UNKNOWN, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib.resources import files
from pathlib import Path

from .api import evaluate_query, problem_of, simulation_plan, solve_query, thresholds_met
from .lp import lp_trace
from .model import NonPositiveWeight, validate_model
from .multienv import MultiEnvMdp
from .report import format_value, render_value
from .simulate import simulate
from .textfmt import PROBLEMS, ParseError, parse_model, parse_query, parse_strategy, read_file, serialize_strategy

INPUT_ERROR = 3
EXAMPLE_MODELS = ("commute.mdp", "commute2d.mdp", "commute-env.mdp")


class InputError(Exception):
    pass


def _load(path, parser, what: str):
    try:
        text = read_file(path)
    except OSError as e:
        raise InputError(f"cannot read {what} {path}: {e.strerror or e}") from e
    try:
        return parser(text)
    except ParseError as e:
        raise InputError(f"{path}:{e}") from e


def _append_report(path, line: str) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")


def cmd_solve(args) -> int:
    model = _load(args.model, parse_model, "model")
    query = _load(args.query, parse_query, "query")
    trace = open(args.dump_lp, "w", encoding="utf-8") if args.dump_lp else None
    try:
        if trace is not None:
            with lp_trace(trace):
                report = solve_query(model, query, args.problem, args.mode, args.tol)
        else:
            report = solve_query(model, query, args.problem, args.mode, args.tol)
    finally:
        if trace is not None:
            trace.close()
    sys.stdout.write(report.to_text())
    if args.out and report.witness is not None:
        Path(args.out).write_text(serialize_strategy(report.witness), encoding="utf-8")
    if args.report:
        _append_report(args.report, report.to_json_line())
    return report.decision.exit_code


def cmd_evaluate(args) -> int:
    model = _load(args.model, parse_model, "model")
    strategy = _load(args.strategy, parse_strategy, "strategy")
    query = _load(args.query, parse_query, "query")
    values = evaluate_query(model, strategy, query, args.problem)
    met = thresholds_met(model, query, values, args.problem)
    for k, v in values.items():
        verdict = "" if k not in met else ("  pass" if met[k] else "  FAIL")
        sys.stdout.write(f"value     {k} = {format_value(v)}{verdict}\n")
    if args.report:
        record = {"problem": problem_of(query, args.problem), "strategy": strategy.name,
                  "values": {k: render_value(v) for k, v in values.items()},
                  "pass": met}
        _append_report(args.report, json.dumps(record, sort_keys=True))
    return 0 if all(met.values()) else 1


def cmd_simulate(args) -> int:
    model = _load(args.model, parse_model, "model")
    strategy = _load(args.strategy, parse_strategy, "strategy")
    query = _load(args.query, parse_query, "query")
    plan = simulation_plan(model, query, args.problem)
    for env_model, cons in plan:
        rep = simulate(env_model, strategy, cons, args.runs, args.seed, args.step_cap)
        sys.stdout.write(rep.to_text())
        if args.report:
            _append_report(args.report, json.dumps(rep.to_record(), sort_keys=True))
    return 0


def cmd_validate(args) -> int:
    model = _load(args.model, parse_model, "model")
    models = model.environments() if isinstance(model, MultiEnvMdp) else (model,)
    bad = False
    for m in models:
        diags = validate_model(m, range(m.dims))
        for d in diags:
            sys.stdout.write(f"{m.name}: {d}\n")
        bad = bad or bool(diags)
    if args.query:
        query = _load(args.query, parse_query, "query")
        try:
            if query.problem is not None:
                plan = simulation_plan(model, query)
                sys.stdout.write(f"query: {query.problem}, {sum(len(c) for _, c in plan)} clause(s)\n")
        except (ValueError, LookupError) as e:
            sys.stdout.write(f"query: {e}\n")
            bad = True
    if args.strategy:
        _load(args.strategy, parse_strategy, "strategy")
    if not bad:
        sys.stdout.write(f"{model.base.name if isinstance(model, MultiEnvMdp) else model.name}: ok\n")
    return INPUT_ERROR if bad else 0


def cmd_examples(args) -> int:
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = files("stochpath") / "corpus"
    names = sorted(p.name for p in corpus.iterdir()) if args.all else EXAMPLE_MODELS
    for name in names:
        (out / name).write_text((corpus / name).read_text(encoding="utf-8"), encoding="utf-8")
        sys.stdout.write(f"wrote {out / name}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochpath", description="Strategy synthesis for weighted MDPs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="decide a query and synthesise a witness strategy")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--out", help="write the witness strategy here on YES")
    p.add_argument("--report", help="append a JSON-lines record here")
    p.add_argument("--mode", choices=("exact", "float"), default="exact")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--dump-lp", help="write every simplex tableau here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="exact values of a strategy")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="Monte Carlo estimates for a strategy")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--runs", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step-cap", type=int)
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="check model, query and strategy files")
    p.add_argument("--model", required=True)
    p.add_argument("--query")
    p.add_argument("--strategy")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("examples", help="write the example models to a directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--all", action="store_true", help="also write example queries and strategies")
    p.set_defaults(func=cmd_examples)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return INPUT_ERROR if e.code else 0
    try:
        return args.func(args)
    except (InputError, NonPositiveWeight, ValueError, LookupError) as e:
        msg = e.args[0] if isinstance(e, LookupError) and e.args else e
        sys.stderr.write(f"stochpath: error: {msg}\n")
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
