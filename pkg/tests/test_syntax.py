from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from lamsct.syntax import (
    App,
    GrammarError,
    Lam,
    NonTerm,
    SyntaxError_,
    Var,
    alpha_equivalent,
    free_vars,
    is_closed,
    parse_expression,
    parse_grammar,
    parse_program,
    show,
    subexps,
    subterms,
)

from conftest import PROGRAMS, load, source

OMEGA = r"(\x.x@x)@(\y.y@y)"
CHURCH = r"C ::= \s.\z.A ; A ::= z ; A ::= s@A"


def shape(e):
    if isinstance(e, Var):
        return ("var", e.name)
    if isinstance(e, Lam):
        return ("lam", e.var, shape(e.body))
    if isinstance(e, App):
        return ("app", shape(e.fun), shape(e.arg))
    return (type(e).__name__, show(e))


class TestParseProgram:
    def test_omega_structure_and_points(self):
        p = parse_program(OMEGA)
        assert shape(p.root) == (
            "app",
            ("lam", "x", ("app", ("var", "x"), ("var", "x"))),
            ("lam", "y", ("app", ("var", "y"), ("var", "y"))),
        )
        assert sorted(p.points) == list(range(1, 10))
        assert [n.label for n in subterms(p.root)] == list(range(1, 10))

    def test_identity(self):
        assert shape(parse_program(r"\x.x").root) == ("lam", "x", ("var", "x"))

    def test_open_variable_parses(self):
        p = parse_program("x")
        assert isinstance(p.root, Var)
        assert not is_closed(p.root)

    def test_lambda_spelling_and_optional_at(self):
        a = parse_program("λf.λx.f (f x)").root
        b = parse_program(r"\f.\x.f@(f@x)").root
        assert shape(a) == shape(b)

    def test_multi_binder(self):
        e = parse_program(r"\c d.d").root
        assert shape(e) == ("lam", "c", ("lam", "d", ("var", "d")))

    def test_application_is_left_associative(self):
        e = parse_program("a b c").root
        assert shape(e) == ("app", ("app", ("var", "a"), ("var", "b")), ("var", "c"))

    def test_bare_lambda_extends_right(self):
        e = parse_program(r"f \x.x y").root
        assert shape(e) == ("app", ("var", "f"), ("lam", "x", ("app", ("var", "x"), ("var", "y"))))

    def test_brackets_and_comments(self):
        text = "-- comment\n[\\x.x] @ {\\y.y} -- trailing\n"
        assert shape(parse_program(text).root) == shape(parse_program(r"(\x.x)@(\y.y)").root)

    def test_syntax_error_has_position(self):
        with pytest.raises(SyntaxError_) as info:
            parse_program("(\\x.x\n  @ )")
        assert info.value.line == 2
        assert info.value.column > 0

    def test_unknown_nonterminal(self):
        with pytest.raises(SyntaxError_, match="unknown nonterminal"):
            parse_program("B")

    @pytest.mark.parametrize("text", ["succ@x", "if(x,y,z)", "3", "•"])
    def test_primitive_needs_extension(self, text):
        with pytest.raises(SyntaxError_, match="primitive"):
            parse_program(text)
        parse_program(text, primitives=True)

    def test_labels_are_deterministic(self, program_name):
        a = parse_program(source(program_name), primitives=PROGRAMS[program_name])
        b = parse_program(source(program_name), primitives=PROGRAMS[program_name])
        assert [(n.label, show(n)) for n in subterms(a.root)] == [
            (n.label, show(n)) for n in subterms(b.root)
        ]

    def test_labels_unique_and_dense(self, program_name):
        p = load(program_name)
        assert sorted(p.points) == list(range(1, len(p.points) + 1))

    def test_reused_binder_is_freshened(self):
        p = parse_program(r"(\x.x)@(\x.x)")
        binders = [n.var for n in subterms(p.root) if isinstance(n, Lam)]
        assert len(set(binders)) == 2
        assert alpha_equivalent(p.root, parse_program(r"(\x.x)@(\y.y)").root)

    def test_strict_alpha_rejects_reuse(self):
        with pytest.raises(SyntaxError_, match="bound at more than one"):
            parse_program(r"(\x.x)@(\x.x)", strict_alpha=True)

    def test_inline_grammar_header(self):
        p = load("add_pow2_grammar")
        assert p.grammar.nonterminals == ("C", "A")
        assert is_closed(p.root, p.grammar)

    def test_grammar_argument(self):
        p = parse_program("C", CHURCH)
        assert isinstance(p.root, NonTerm)
        assert len(p.grammar) == 3


class TestGrammar:
    def test_church_grammar(self):
        g = parse_grammar(CHURCH)
        assert set(g.nonterminals) == {"C", "A"}
        assert len(g.productions) == 3

    def test_newline_and_bar_separators(self):
        g = parse_grammar("C ::= \\s.\\z.A\nA ::= z | s@A")
        assert len(g.productions) == 3

    def test_empty(self):
        g = parse_grammar("")
        assert g.nonterminals == () and len(g) == 0

    def test_unit_productions_inlined(self):
        g = parse_grammar(r"X ::= Y ; Y ::= \a.a")
        assert [name for name, _ in g.productions] == ["X", "Y"]
        for _, body in g.productions:
            assert shape(body) == ("lam", "a", ("var", "a"))

    def test_unit_cycle_rejected(self):
        with pytest.raises(GrammarError):
            parse_grammar("A ::= B ; B ::= A")

    def test_no_unit_production_survives(self):
        g = parse_grammar(r"X ::= Y ; Y ::= Z ; Z ::= \a.a ; Z ::= \b.b@b")
        assert not any(isinstance(b, NonTerm) for _, b in g.productions)

    def test_unknown_nonterminal_in_body(self):
        with pytest.raises((SyntaxError_, GrammarError)):
            parse_grammar(r"A ::= \x.B")


class TestStructure:
    def church(self):
        return parse_program("C", CHURCH)

    def nt(self, p, name):
        return p.nonterminal_nodes[name]

    def test_free_vars_of_nonterminals(self):
        p = self.church()
        assert free_vars(self.nt(p, "A"), p.grammar) == {"s", "z"}
        assert free_vars(self.nt(p, "C"), p.grammar) == frozenset()

    def test_free_vars_plain(self):
        assert free_vars(Var("x")) == {"x"}
        assert free_vars(parse_program(r"\x.x@y").root) == {"y"}

    def test_closedness(self):
        p = self.church()
        assert is_closed(parse_program(OMEGA).root)
        assert is_closed(self.nt(p, "C"), p.grammar)
        assert not is_closed(self.nt(p, "A"), p.grammar)
        assert not is_closed(Lam("x", Var("y")))

    def test_subexps_of_nonterminal(self):
        p = self.church()
        got = sorted(show(e) for e in subexps(self.nt(p, "A"), p.grammar))
        assert got == sorted(["A", "z", "s@A", "s"])

    def test_subexps_variable(self):
        x = Var("x")
        assert subexps(x) == {x}

    def test_subexps_omega(self):
        p = parse_program(OMEGA)
        assert len(subexps(p.root)) == 9

    def test_pure_subexps_are_subterms(self, program_name):
        p = load(program_name)
        terms = set(subterms(p.root))
        assert terms <= set(p.subexps)
        if not p.grammar.nonterminals:
            assert terms == set(p.subexps)

    def test_fv_monotone_under_productions(self):
        g = load("add_pow2_grammar").grammar
        table = g.nt_free_vars
        for lhs, body in g.productions:
            assert free_vars(body, g) <= table[lhs]


# -- pretty-printer round trip over random closed terms

NAMES = ["a", "b", "c", "d"]


@st.composite
def terms(draw, depth=0, bound=()):
    choices = ["lam"]
    if bound:
        choices.append("var")
    if depth < 4:
        choices += ["app", "lam"]
    kind = draw(st.sampled_from(choices))
    if kind == "var" or depth >= 5 and bound:
        return Var(draw(st.sampled_from(bound)))
    if kind == "lam" or depth >= 5:
        x = draw(st.sampled_from(NAMES))
        return Lam(x, draw(terms(depth + 1, bound + (x,))))
    return App(draw(terms(depth + 1, bound)), draw(terms(depth + 1, bound)))


@settings(max_examples=200, deadline=None)
@given(terms())
def test_show_parse_round_trip(e):
    back = parse_expression(show(e))
    assert alpha_equivalent(back, e)
    assert show(back) == show(e)
