"""Strategy synthesis for weighted MDPs with exact verification."""

from .api import evaluate_query, solve_query
from .bwc import compute_safe_actions, solve_sspwe
from .classic import evaluate_worst_case, solve_spg, solve_sspe, solve_sspp, worst_case_table
from .lp import LinearProgram, lp_trace, solve_lp
from .model import (INF, Distribution, InducedChain, InvalidStrategy, MooreStrategy, NonPositiveWeight, RunPrefix,
                    WeightedMdp, exact_event_probability, exact_expectation, induce_chain, reach_probability,
                    truncated_sum, validate_model)
from .multienv import (MultiEnvMdp, MultiEnvQuery, belief_support_product, evaluate_multienv, mix_strategies,
                       solve_sspme_gap)
from .percentile import PercentileConstraint, PercentileQuery, fast_path_single, solve_ssppq
from .reachability import solve_multiple_reachability, solve_sr
from .report import Decision, SolveReport
from .simulate import SimConstraint, SimulationReport, simulate
from .textfmt import (ParseError, parse_model, parse_query, parse_strategy, serialize_model, serialize_query,
                      serialize_strategy)
from .unfolding import SINK, build_unfolding, pull_back

__all__ = [
    "INF", "SINK", "Decision", "Distribution", "InducedChain", "InvalidStrategy", "LinearProgram", "MooreStrategy",
    "MultiEnvMdp", "MultiEnvQuery", "NonPositiveWeight", "ParseError", "PercentileConstraint", "PercentileQuery",
    "RunPrefix", "SimConstraint", "SimulationReport", "SolveReport", "WeightedMdp", "belief_support_product",
    "build_unfolding", "compute_safe_actions", "evaluate_multienv", "evaluate_query", "evaluate_worst_case",
    "exact_event_probability", "exact_expectation", "fast_path_single", "induce_chain", "lp_trace",
    "mix_strategies", "parse_model", "parse_query", "parse_strategy", "pull_back", "reach_probability",
    "serialize_model", "serialize_query", "serialize_strategy", "simulate", "solve_lp", "solve_multiple_reachability",
    "solve_query", "solve_spg", "solve_sspe", "solve_sspme_gap", "solve_sspp", "solve_ssppq",
    "solve_sspwe", "solve_sr", "truncated_sum", "validate_model", "worst_case_table",
]
