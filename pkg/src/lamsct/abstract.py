"""Abstract interpretation: call edges and evaluation facts with size-change graphs.

Program points stand for all states over them.  The rules are applied to a
global least fixpoint over every subexpression of the program; the result
keeps the facts reachable from the root along call edges.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Union

from .graphs import (
    EQ,
    SizeChangeGraph,
    call_combine,
    compose,
    demote_into_eps,
    empty_graph,
    identity_dec,
    identity_eq,
    names_of,
    value_graph,
    var_graph,
)
from .semantics import EVAL_KIND, TIMEOUT, Instance, Step, eval_instrumented, initial_state
from .syntax import (
    EPS,
    App,
    Bool,
    Exp,
    Grammar,
    If,
    Lam,
    NonTerm,
    Num,
    Prim,
    Program,
    Var,
    free_vars,
    has_nonterminals,
    label_program,
)

NUM = "num"    # the one abstract numeral
BOOL = "bool"  # the one abstract truth value

ValuePoint = Union[int, str]


class AnalysisError(ValueError):
    """The program does not meet the analysis precondition."""


@dataclass(frozen=True)
class CallEdge:
    src: int
    kind: str
    dst: int
    graph: SizeChangeGraph

    def sort_key(self):
        return (self.src, self.kind, self.dst, self.graph.text())

    def to_json(self) -> dict:
        return {"src": self.src, "kind": self.kind, "dst": self.dst, "graph": self.graph.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "CallEdge":
        return cls(d["src"], d["kind"], d["dst"], SizeChangeGraph.from_json(d["graph"]))


@dataclass(frozen=True)
class EvalFact:
    subject: int
    value: ValuePoint
    graph: SizeChangeGraph

    def sort_key(self):
        return (self.subject, str(self.value), self.graph.text())

    def to_json(self) -> dict:
        return {"subject": self.subject, "value": self.value, "graph": self.graph.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "EvalFact":
        return cls(d["subject"], d["value"], SizeChangeGraph.from_json(d["graph"]))


@dataclass(frozen=True)
class AnalysisResult:
    program: Program
    edges: tuple[CallEdge, ...]
    evals: tuple[EvalFact, ...]
    reachable: frozenset[int]
    # every fact, reachable or not, for soundness cross-checks
    all_edges: tuple[CallEdge, ...] = field(default=(), repr=False)
    all_evals: tuple[EvalFact, ...] = field(default=(), repr=False)

    def edges_from(self, point: int) -> list[CallEdge]:
        return [e for e in self.edges if e.src == point]

    def evals_of(self, point: int) -> list[EvalFact]:
        return [f for f in self.all_evals if f.subject == point]

    def to_json(self) -> dict:
        return {
            "edges": [e.to_json() for e in self.edges],
            "evals": [f.to_json() for f in self.evals],
            "reachable": sorted(self.reachable),
        }


def value_names(program: Program, v: ValuePoint) -> frozenset[str]:
    if isinstance(v, str):
        return frozenset((EPS,))
    return names_of(program.points[v])


class _Engine:
    def __init__(self, program: Program, unused_binder_arcs: bool = False):
        self.p = program
        self.unused_binder_arcs = unused_binder_arcs
        self.nodes = sorted(program.subexps, key=lambda n: n.label)
        self.evals: dict[int, dict[tuple, None]] = {}
        self.edges: dict[tuple[int, str, int, SizeChangeGraph], None] = {}
        self.into: dict[int, list[tuple[int, SizeChangeGraph]]] = {}
        self.var_values: dict[str, set[ValuePoint]] = {}
        self.var_nodes: dict[str, list[Var]] = {}
        self.role: dict[int, list[tuple[Exp, str]]] = {}
        self.queue: deque = deque()
        for n in self.nodes:
            if isinstance(n, Var):
                self.var_nodes.setdefault(n.name, []).append(n)
            elif isinstance(n, App):
                self.role.setdefault(n.fun.label, []).append((n, "fun"))
                self.role.setdefault(n.arg.label, []).append((n, "arg"))
            elif isinstance(n, If):
                self.role.setdefault(n.cond.label, []).append((n, "cond"))

    # fact insertion -------------------------------------------------------

    def add_eval(self, subject: int, value: ValuePoint, g: SizeChangeGraph) -> None:
        facts = self.evals.setdefault(subject, {})
        key = (value, g)
        if key not in facts:
            facts[key] = None
            self.queue.append(("eval", subject, value, g))

    def add_edge(self, src: int, kind: str, dst: int, g: SizeChangeGraph) -> None:
        key = (src, kind, dst, g)
        if key not in self.edges:
            self.edges[key] = None
            self.queue.append(("edge", src, kind, dst, g))

    def add_var_value(self, x: str, v: ValuePoint) -> None:
        vals = self.var_values.setdefault(x, set())
        if v in vals:
            return
        vals.add(v)
        value_expr = self.p.points[v] if isinstance(v, int) else Num(None)
        g = var_graph(x, value_expr)
        for node in self.var_nodes.get(x, ()):
            self.add_eval(node.label, v, g)

    # rules ----------------------------------------------------------------

    def seed(self) -> None:
        for n in self.nodes:
            if isinstance(n, (Lam, Prim)):
                self.add_eval(n.label, n.label, value_graph(n))
            elif isinstance(n, Num):
                self.add_eval(n.label, NUM, value_graph(n))
            elif isinstance(n, Bool):
                self.add_eval(n.label, BOOL, value_graph(n))
            elif isinstance(n, App):
                src = names_of(n)
                self.add_edge(n.label, "r", n.fun.label, identity_dec(n.fun, src))
                self.add_edge(n.label, "d", n.arg.label, identity_dec(n.arg, src))
            elif isinstance(n, If):
                self.add_edge(n.label, "r", n.cond.label, identity_dec(n.cond, names_of(n)))
            elif isinstance(n, NonTerm):
                src = names_of(n)
                for body in self.p.bodies(n):
                    self.add_edge(n.label, "n", body.label, identity_eq(body, src))

    def combine(self, app: App, v1: ValuePoint, g1, v2: ValuePoint, g2) -> None:
        if isinstance(v1, str):
            return  # data in operator position: stuck
        f = self.p.points[v1]
        if isinstance(f, Lam):
            g = call_combine(g1, g2, f.var, f.body, self.unused_binder_arcs)
            self.add_edge(app.label, "c", f.body.label, g)
            self.add_var_value(f.var, v2)
        elif isinstance(f, Prim) and v2 == NUM:
            src = names_of(app)
            eps = (EPS,)
            if f.op == "pred":
                self.add_eval(app.label, NUM, demote_into_eps(g2, src))
            elif f.op == "succ":
                self.add_eval(app.label, NUM, empty_graph(src, eps))
            else:
                self.add_eval(app.label, BOOL, empty_graph(src, eps))

    def on_eval(self, subject: int, value: ValuePoint, g: SizeChangeGraph) -> None:
        for parent, role in self.role.get(subject, ()):
            if role == "fun":
                for v2, g2 in list(self.evals.get(parent.arg.label, ())):
                    self.combine(parent, value, g, v2, g2)
            elif role == "arg":
                for v1, g1 in list(self.evals.get(parent.fun.label, ())):
                    self.combine(parent, v1, g1, value, g)
            elif role == "cond" and value == BOOL:
                src = names_of(parent)
                for branch in (parent.then, parent.orelse):
                    self.add_edge(parent.label, "c", branch.label, identity_dec(branch, src))
        for src, gcall in list(self.into.get(subject, ())):
            self.add_eval(src, value, compose(gcall, g))

    def on_edge(self, src: int, kind: str, dst: int, g: SizeChangeGraph) -> None:
        if kind not in ("c", "n"):
            return
        self.into.setdefault(dst, []).append((src, g))
        for v, g2 in list(self.evals.get(dst, ())):
            self.add_eval(src, v, compose(g, g2))

    def run(self) -> AnalysisResult:
        self.seed()
        while self.queue:
            item = self.queue.popleft()
            if item[0] == "eval":
                self.on_eval(*item[1:])
            else:
                self.on_edge(*item[1:])
        all_edges = sorted(
            (CallEdge(s, k, d, g) for (s, k, d, g) in self.edges), key=CallEdge.sort_key
        )
        all_evals = sorted(
            (EvalFact(s, v, g) for s, facts in self.evals.items() for (v, g) in facts),
            key=EvalFact.sort_key,
        )
        succ: dict[int, set[int]] = {}
        for e in all_edges:
            succ.setdefault(e.src, set()).add(e.dst)
        root = self.p.root.label
        reach = {root}
        stack = [root]
        while stack:
            for nxt in succ.get(stack.pop(), ()):
                if nxt not in reach:
                    reach.add(nxt)
                    stack.append(nxt)
        return AnalysisResult(
            self.p,
            tuple(e for e in all_edges if e.src in reach),
            tuple(f for f in all_evals if f.subject in reach),
            frozenset(reach),
            tuple(all_edges),
            tuple(all_evals),
        )


def _as_program(p: Program | Exp, grammar: Grammar | None = None) -> Program:
    if isinstance(p, Program):
        return p
    return label_program(p, grammar, primitives=True)


def absint(p: Program | Exp, unused_binder_arcs: bool = False) -> AnalysisResult:
    """Analyse a closed program without nonterminals."""
    prog = _as_program(p)
    if has_nonterminals(prog.root):
        raise AnalysisError("program contains nonterminals; use absint_ext")
    if free_vars(prog.root):
        raise AnalysisError(f"program is not closed: free {sorted(free_vars(prog.root))}")
    return _Engine(prog, unused_binder_arcs).run()


def absint_ext(
    p: Program | Exp, grammar: Grammar | None = None, unused_binder_arcs: bool = False
) -> AnalysisResult:
    """Analyse a program whose nonterminals range over a grammar's language."""
    prog = _as_program(p, grammar)
    fv = free_vars(prog.root, prog.grammar)
    if fv:
        raise AnalysisError(f"program is not closed: free {sorted(fv)}")
    return _Engine(prog, unused_binder_arcs).run()


def analyze(program: Program, unused_binder_arcs: bool = False) -> AnalysisResult:
    """Dispatch on whether the program uses a grammar."""
    if has_nonterminals(program.root):
        return absint_ext(program, unused_binder_arcs=unused_binder_arcs)
    return absint(program, unused_binder_arcs)


# --------------------------------------------------------------------------
# Simulation of pure instances by the extended analysis


def graph_simulates(abstract: SizeChangeGraph, concrete: SizeChangeGraph) -> bool:
    """The relation T(abstract, concrete).

    The abstract graph may have more names; on the shared names it must be a
    subset of the concrete graph, and an extra source name may only carry
    its own ``=`` arc, and then only towards a name the concrete graph lacks.
    """
    if not (abstract.source >= concrete.source and abstract.target >= concrete.target):
        return False
    cmap = concrete.arc_map
    for p, lbl, q in abstract.arcs:
        if p in concrete.source:
            if q in concrete.target and cmap.get((p, q)) != lbl:
                return False
        else:
            if not (p == q and lbl == EQ and q not in concrete.target):
                return False
    return True


@dataclass
class SimulationReport:
    checked: int = 0
    timed_out: bool = False
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _projection(inst: Instance, e: Exp) -> list[int]:
    """Source-program points that may stand for node ``e`` of the instance."""
    out = [inst.origin[e.label]]
    via = inst.via.get(e.label)
    if via is not None:
        out.append(via)
    return out


def _value_point(inst: Instance, e: Exp) -> ValuePoint:
    if isinstance(e, Num):
        return NUM
    if isinstance(e, Bool):
        return BOOL
    return inst.origin[e.label]


def simulate_check(
    p: Program,
    inst: Instance,
    fuel: int = 100_000,
    result: AnalysisResult | None = None,
) -> SimulationReport:
    """Run the instance concretely and match every step against the analysis of ``p``."""
    result = result or absint_ext(p)
    edges: dict[tuple[int, str, int], list[SizeChangeGraph]] = {}
    for e in result.edges:
        edges.setdefault((e.src, e.kind, e.dst), []).append(e.graph)
    n_edges: dict[int, list[tuple[int, SizeChangeGraph]]] = {}
    for e in result.edges:
        if e.kind == "n":
            n_edges.setdefault(e.src, []).append((e.dst, e.graph))
    evals: dict[tuple[int, ValuePoint], list[SizeChangeGraph]] = {}
    for f in result.all_evals:
        evals.setdefault((f.subject, f.value), []).append(f.graph)

    value, steps = eval_instrumented(initial_state(inst.program), fuel)
    report = SimulationReport(timed_out=value is TIMEOUT)

    def candidates(u: int, kind: str, w: int) -> Iterable[SizeChangeGraph]:
        yield from edges.get((u, kind, w), ())
        for mid, gn in n_edges.get(u, ()):
            for g in edges.get((mid, kind, w), ()):
                yield compose(gn, g)

    for step in steps:
        report.checked += 1
        srcs = _projection(inst, step.src.expr)
        if step.kind == EVAL_KIND:
            v = _value_point(inst, step.dst.expr)
            found = any(
                graph_simulates(g, step.graph)
                for u in srcs for g in evals.get((u, v), ())
            )
        else:
            dsts = _projection(inst, step.dst.expr)
            found = any(
                graph_simulates(g, step.graph)
                for u in srcs for w in dsts for g in candidates(u, step.kind, w)
            )
        if not found:
            report.failures.append(_describe(inst, step))
    return report


def _describe(inst: Instance, step: Step) -> str:
    s, d = step.src.expr, step.dst.expr
    return (
        f"no simulating fact for {s.label}(origin {inst.origin.get(s.label)}) "
        f"-{step.kind}-> {d.label or d!r} with graph {step.graph}"
    )
