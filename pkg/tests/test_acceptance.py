"""Acceptance gate: one check per criterion, each reported as a PASS/FAIL line.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import sys
import time
from pathlib import Path

import pytest
from hypothesis import given, settings

sys.path.insert(0, str(Path(__file__).parent))

from conftest import PROGRAMS, TERMINATING, analysis, load, numerals_chooser  # noqa: E402
from strategies import composable_triples  # noqa: E402

from lamsct.abstract import BOOL, NUM, analyze, simulate_check  # noqa: E402
from lamsct.graphs import EQ, compose, graph_violations, identity  # noqa: E402
from lamsct.sct import bounded_multipath_audit, decide, report_lines  # noqa: E402
from lamsct.semantics import (  # noqa: E402
    EVAL_KIND,
    State,
    church_value,
    eval,
    eval_instrumented,
    eval_subst,
    flatten,
    initial_state,
    instantiate,
    substitute_bullets,
)
from lamsct.syntax import EPS, Bool, Num, alpha_equivalent, parse_program  # noqa: E402

EXPECTED = Path(__file__).parent / "expected"
RESULTS: dict[int, tuple[bool, str]] = {}


def expected(name: str) -> list[str]:
    return (EXPECTED / f"{name}.txt").read_text(encoding="utf-8").splitlines()


def loops(name: str) -> list[str]:
    return report_lines(analysis(name))[1:]


def church(n: int, s: str, z: str) -> str:
    body = z
    for _ in range(n):
        body = f"{s}@({body})"
    return f"(\\{s}.\\{z}.{body})"


# -- the criteria --------------------------------------------------------


def c1_omega():
    t = time.perf_counter()
    r = analyze(parse_program(r"(\x.x@x)@(\y.y@y)"))
    verdict = decide(r)
    elapsed = time.perf_counter() - t

    def var_arcs(g):
        return {a for a in g.arcs if EPS not in (a[0], a[2])}

    g0, g1, g2, g3 = set(), {("x", EQ, "x")}, {("x", EQ, "y")}, {("y", EQ, "y")}
    want = {
        (1, "r", 2): g0, (1, "d", 6): g0, (1, "c", 3): g0,
        (3, "r", 4): g1, (3, "d", 5): g1, (3, "c", 7): g2,
        (7, "r", 8): g3, (7, "d", 9): g3, (7, "c", 7): g3,
    }
    got = {(e.src, e.kind, e.dst): var_arcs(e.graph) for e in r.edges}
    ok = got == want and not verdict.terminating and elapsed < 1.0
    return ok, f"verdict {'Yes' if verdict.terminating else 'No'}, {elapsed:.3f}s"


def c2_church_succ():
    got = loops("church_succ")
    return got == expected("church_succ"), got[0]


def c3_add_pow2():
    got = loops("add_pow2")
    return got == expected("add_pow2"), f"{len(got) - 1} loops"


def c4_ackermann_church():
    got = loops("ackermann_church")
    return got == expected("ackermann_church"), f"{len(got) - 1} loops"


def c5_min_y():
    got = loops("min_y")
    return got == expected("min_y"), f"{len(got) - 1} loops"


def c6_ackermann_y():
    got = loops("ackermann_y")
    shared = decide(analysis("ackermann_y_shared")).terminating
    ok = got == expected("ackermann_y") and not shared
    return ok, f"{len(got) - 1} loops; shared instance verdict {'Yes' if shared else 'No'}"


def c7_typable_nonsct():
    v = decide(analysis("typable_nonsct"))
    return not v.terminating, f"verdict {'Yes' if v.terminating else 'No'}"


def c8_grammar():
    got = loops("add_pow2_grammar")
    ok = got == expected("add_pow2_grammar")
    return ok, f"{sum('(eps,>,eps)' in line for line in got)} grammar-point loops"


def _church_states():
    lam = parse_program(r"\r.\a.r@(r@a)").root
    e = lam.body.body

    def value(text):
        return eval(initial_state(parse_program(text)))

    succ = value(r"\k.\f.\x.f@(k@f@x)")
    two = value(church(2, "s", "z"))
    s = State(e, {"r": succ, "a": two})
    s_prime = State(e, {"r": State(lam.body, {"r": succ}), "a": two})
    return s, s_prime


def c9_exact_eval():
    s, s_prime = _church_states()
    four = church_value(flatten(eval(s)))
    six = church_value(flatten(eval(s_prime)))
    add = r"(\m.\n.\f.\x.m@f@(n@f@x))"
    mult = r"(\m1.\n1.\f1.\x1.m1@(n1@f1)@x1)"
    bad = []
    for m, n in itertools.product(range(6), repeat=2):
        for op, want in ((add, m + n), (mult, m * n)):
            p = parse_program(f"{op}@{church(m, 'a', 'b')}@{church(n, 'c', 'd')}")
            env_v = flatten(eval(initial_state(p)))
            if not alpha_equivalent(env_v, eval_subst(p.root)) or church_value(env_v) != want:
                bad.append((m, n))
    ok = four == 4 and six == 6 and not bad
    return ok, f"s⇓{four}, s′⇓{six}, {72 - len(bad)}/72 arithmetic cases agree"


def _runs():
    """(label, program) pairs for the safety and soundness suites."""
    for name, sub in sorted(TERMINATING.items()):
        p = load(name)
        yield name, (substitute_bullets(p, sub) if sub else p), 200_000
    yield "omega", load("omega"), 12_000


def c10_safety():
    checked = violations = 0
    for name, p, fuel in _runs():
        _, steps = eval_instrumented(initial_state(p), fuel, p.grammar)
        if name == "omega":
            steps = steps[:10_000]
            assert len(steps) == 10_000
        for st in steps:
            checked += 1
            violations += bool(graph_violations(st.graph, st.src, st.dst))
    grammar = load("add_pow2_grammar")
    for n1, n2 in itertools.product(range(4), repeat=2):
        inst = instantiate(grammar, numerals_chooser([n1, n2]))
        _, steps = eval_instrumented(initial_state(inst.program))
        for st in steps:
            checked += 1
            violations += bool(graph_violations(st.graph, st.src, st.dst))
    return violations == 0, f"{checked} steps, {violations} violations"


def _value_point(e):
    return NUM if isinstance(e, Num) else BOOL if isinstance(e, Bool) else e.label


def c11_soundness():
    missing = checked = 0
    for name, p, fuel in _runs():
        r = analysis(name)
        edges = {(e.src, e.kind, e.dst, e.graph) for e in r.edges}
        evals = {(f.subject, f.value, f.graph) for f in r.evals}
        _, steps = eval_instrumented(initial_state(p), fuel, p.grammar)
        for st in steps:
            checked += 1
            if st.kind == EVAL_KIND:
                key = (st.src.expr.label, _value_point(st.dst.expr), st.graph)
                missing += key not in evals
            else:
                missing += (st.src.expr.label, st.kind, st.dst.expr.label, st.graph) not in edges
    grammar = load("add_pow2_grammar")
    result = analysis("add_pow2_grammar")
    sim_fail = sim_steps = 0
    for n1, n2 in itertools.product(range(4), repeat=2):
        rep = simulate_check(grammar, instantiate(grammar, numerals_chooser([n1, n2])), 100_000, result)
        sim_steps += rep.checked
        sim_fail += len(rep.failures) + rep.timed_out
    ok = missing == 0 and sim_fail == 0
    return ok, f"{checked} exact steps ({missing} unmatched); {sim_steps} simulated steps ({sim_fail} failures)"


def c12_algebra_and_audit():
    @settings(max_examples=1000, deadline=None, database=None)
    @given(composable_triples())
    def laws(t):
        a, b, c = t
        assert compose(compose(a, b), c) == compose(a, compose(b, c))
        for g in (a, b, c):
            assert compose(identity(g.source), g) == g == compose(g, identity(g.target))

    laws()
    disagree = [n for n in sorted(PROGRAMS) if not bounded_multipath_audit(analysis(n), 6).agrees]
    return not disagree, f"1000 triples ok; audit bound 6 disagrees on {disagree or 'none'}"


CRITERIA = {
    1: ("Omega regression", c1_omega),
    2: ("Church succ loop", c2_church_succ),
    3: ("x+2^n loops", c3_add_pow2),
    4: ("second-order Ackermann loops", c4_ackermann_church),
    5: ("minimum with fixpoint combinator", c5_min_y),
    6: ("Ackermann two instances / shared instance", c6_ackermann_y),
    7: ("typable counterexample verdict", c7_typable_nonsct),
    8: ("grammar fixture loops", c8_grammar),
    9: ("exact evaluation correctness", c9_exact_eval),
    10: ("safety of instrumented graphs", c10_safety),
    11: ("abstraction soundness", c11_soundness),
    12: ("algebra laws and bounded audit", c12_algebra_and_audit),
}


def evaluate(number: int) -> tuple[bool, str]:
    _, fn = CRITERIA[number]
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure, reported like one
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    RESULTS[number] = (ok, detail)
    return ok, detail


def line(number: int) -> str:
    ok, detail = RESULTS[number]
    title = CRITERIA[number][0]
    return f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, detail = evaluate(number)
    print(line(number))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n in sorted(CRITERIA):
        evaluate(n)
        print(line(n))
        failed += not RESULTS[n][0]
    sys.exit(1 if failed else 0)
