from __future__ import annotations

import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from lamsct.abstract import analyze
from lamsct.graphs import DEC, EQ, compose, make_graph
from lamsct.sct import (
    Closure,
    GraphSet,
    bounded_multipath_audit,
    decide,
    graph_set,
    idempotent_power,
    report_lines,
    self_loops,
)
from lamsct.semantics import TIMEOUT, eval, initial_state, substitute_bullets
from lamsct.syntax import parse_program

from conftest import PROGRAMS, TERMINATING, analysis, load
from strategies import self_graphs

EXPECTED = Path(__file__).parent / "expected"

# f(x,y) calls g(u,v,w) at 1; g calls itself at 2 and f at 3
A, B = 1, 2
G1 = make_graph("xy", "uvw", [("x", EQ, "u"), ("y", EQ, "v"), ("y", EQ, "w")])
G2 = make_graph("uvw", "uvw", [("u", EQ, "u"), ("v", DEC, "v")])
G3 = make_graph("uvw", "xy", [("u", DEC, "x"), ("w", EQ, "y")])
FIRST_ORDER = graph_set([(A, B, G1), (B, B, G2), (B, A, G3)])


def listing(name):
    return report_lines(analysis(name))[1:]


@pytest.mark.parametrize("name", sorted(p.stem for p in EXPECTED.glob("*.txt")))
def test_listing_matches(name):
    expected = (EXPECTED / f"{name}.txt").read_text(encoding="utf-8").splitlines()
    assert listing(name) == expected


@pytest.mark.parametrize("name,verdict", [("ackermann_y_shared", False), ("typable_nonsct", False)])
def test_verdicts(name, verdict):
    assert decide(analysis(name)).terminating is verdict


class TestFirstOrder:
    def test_closure_has_descending_v_loop(self):
        clo = Closure(FIRST_ORDER)
        g22 = compose(G2, G2)
        assert clo.contains(B, B, g22)
        assert ("v", DEC, "v") in g22.arcs

    def test_decides_yes(self):
        assert decide(FIRST_ORDER).terminating

    def test_audit_confirms(self):
        rep = bounded_multipath_audit(FIRST_ORDER, 6)
        assert rep.agrees and not rep.failing and not rep.missing

    def test_dropping_the_u_descent_breaks_it(self):
        weak = graph_set([(A, B, G1), (B, B, G2), (B, A, make_graph("uvw", "xy", [("u", EQ, "x"), ("w", EQ, "y")]))])
        assert not decide(weak).terminating


class TestClosure:
    def test_omega_self_graphs(self):
        clo = Closure(analysis("omega"))
        selfs = {(e.src, e.graph.text()) for e in clo.elements if e.src == e.dst}
        assert selfs == {(7, "[(y,=,y)]")}

    def test_single_edge(self):
        gs = graph_set([(1, 2, make_graph("x", "y", [("x", EQ, "y")]))])
        clo = Closure(gs)
        assert len(clo) == 1
        assert decide(gs).terminating

    def test_empty(self):
        assert decide(GraphSet(())).terminating
        rep = bounded_multipath_audit(GraphSet(()), 4)
        assert rep.cycles == 0 and rep.agrees

    @pytest.mark.parametrize("name", ["church_succ", "add_pow2", "ackermann_church", "add_pow2_grammar"])
    def test_closed_under_composition(self, name):
        clo = Closure(analysis(name))
        elems = clo.elements
        by_src = {}
        for e in elems:
            by_src.setdefault(e.src, []).append(e)
        for a in elems:
            for b in by_src.get(a.dst, ()):
                assert clo.contains(a.src, b.dst, compose(a.graph, b.graph))

    def test_witness_realizes_graph(self):
        r = analysis("ackermann_church")
        edges = {}
        for e in r.edges:
            edges.setdefault((e.src, e.dst), []).append(e.graph)
        for el in Closure(r).elements[:200]:
            hops = (el.src,) + el.witness + (el.dst,)
            graphs = [edges[(a, b)] for a, b in zip(hops, hops[1:])]
            # some choice of parallel edges composes to the element
            frontier = set(graphs[0])
            for options in graphs[1:]:
                frontier = {compose(g, h) for g in frontier for h in options}
            assert el.graph in frontier


def test_value_program_has_no_loops():
    r = analyze(parse_program(r"\x.x"))
    assert self_loops(r) == [] and decide(r).terminating


@settings(max_examples=200, deadline=None)
@given(self_graphs())
def test_idempotent_power_is_idempotent(g):
    p = idempotent_power(g)
    assert compose(p, p) == p


@pytest.mark.parametrize("name", sorted(PROGRAMS))
def test_audit_agrees(name):
    rep = bounded_multipath_audit(analysis(name), 6)
    assert rep.agrees, rep.lines()


@pytest.mark.parametrize("name", ["church_succ", "add_pow2", "min_y", "typable_nonsct"])
def test_verdict_order_independent(name):
    r = analysis(name)
    edges = list(r.edges)
    random.Random(3).shuffle(edges)
    assert decide(GraphSet(tuple(edges))).terminating == decide(r).terminating


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["church_succ", "add_pow2", "min_y", "ackermann_church"]), st.data())
def test_removing_arcs_never_helps(name, data):
    r = analysis(name)
    before = decide(r).terminating
    edges = []
    for e in r.edges:
        arcs = sorted(e.graph.arcs)
        keep = data.draw(st.lists(st.booleans(), min_size=len(arcs), max_size=len(arcs)))
        g = make_graph(e.graph.source, e.graph.target, [a for a, k in zip(arcs, keep) if k])
        edges.append(type(e)(e.src, e.kind, e.dst, g))
    after = decide(GraphSet(tuple(edges))).terminating
    assert not (after and not before)


@pytest.mark.parametrize("name", sorted(PROGRAMS))
def test_yes_means_terminates(name):
    if not decide(analysis(name)).terminating:
        return
    p = load(name)
    sub = TERMINATING.get(name)
    if p.bullets and not sub:
        sub = {i + 1: 2 for i in range(len(p.bullets))}
    run = substitute_bullets(p, sub) if sub else p
    assert eval(initial_state(run), 1_000_000, run.grammar) is not TIMEOUT


def test_report_is_byte_stable():
    a = "\n".join(report_lines(analyze(load("ackermann_y"))))
    b = "\n".join(report_lines(analyze(load("ackermann_y"))))
    assert a == b


def test_verbose_report_adds_eval_facts():
    lines = report_lines(analysis("omega"), verbose=True)
    assert "Evaluation facts:" in lines
    assert any(line.startswith("Counterexample: 7") for line in lines)


def test_unused_binder_arcs_option():
    """With the extra arcs for unused binders, the typable example is certified."""
    r = analyze(load("typable_nonsct"), unused_binder_arcs=True)
    assert decide(r).terminating
    assert "6 →* 6: [(eps,>,eps),(eps,>,a)] [12]" in report_lines(r)
