"""Size-change termination analysis for call-by-value λ-calculus."""
from .abstract import AnalysisResult, CallEdge, EvalFact, absint, absint_ext, analyze, simulate_check
from .graphs import SizeChangeGraph, call_combine, compose, graph_safe_for, identity_dec, identity_eq, make_graph
from .sct import Verdict, bounded_multipath_audit, closure, decide, report_lines, self_loops
from .semantics import State, church_value, eval, eval_instrumented, eval_subst, flatten, graph_basis, initial_state, measure, state_geq, trace_calls, valuate
from .syntax import Grammar, Program, free_vars, is_closed, parse_grammar, parse_program, subexps

__all__ = [
    "AnalysisResult", "CallEdge", "EvalFact", "absint", "absint_ext", "analyze", "simulate_check",
    "SizeChangeGraph", "call_combine", "compose", "graph_safe_for", "identity_dec", "identity_eq", "make_graph",
    "Verdict", "bounded_multipath_audit", "closure", "decide", "report_lines", "self_loops",
    "State", "church_value", "eval", "eval_instrumented", "eval_subst", "flatten", "graph_basis", "initial_state", "measure", "state_geq",
    "trace_calls", "valuate",
    "Grammar", "Program", "free_vars", "is_closed", "parse_grammar", "parse_program", "subexps",
]
