"""Syntax trees and parsing of λ-expressions.

Expressions are immutable trees whose nodes carry a positive program-point
label once they belong to a :class:`Program`.  Node identity is occurrence
identity: two structurally equal subterms at different positions are
different program points.  Nonterminal nodes are the exception; each
nonterminal of a grammar is a single shared node, so ``A`` in ``A ::= s@A``
and the ``A`` inside ``λz.A`` denote the same point.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator

EPS = "ε"  # reserved name for the whole state; never produced by the lexer

PRIM_OPS = ("pred", "succ", "ztst")
_PRIM_ALIASES = {"pred": "pred", "succ": "succ", "suc": "succ", "ztst": "ztst"}


class SyntaxError_(ValueError):
    """Input text does not conform to the concrete syntax."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.column = column


class GrammarError(ValueError):
    """A grammar is malformed or cannot be normalized."""


# --------------------------------------------------------------------------
# Nodes


class Exp:
    """Base class of expression nodes."""

    label: int

    @property
    def fv(self) -> frozenset[str]:
        raise NotImplementedError

    def children(self) -> tuple["Exp", ...]:
        return ()

    def __repr__(self) -> str:
        return f"<{self.label}: {show(self)}>"


@dataclass(frozen=True, eq=False, repr=False)
class Var(Exp):
    name: str
    label: int = 0

    @cached_property
    def fv(self) -> frozenset[str]:
        return frozenset((self.name,))


@dataclass(frozen=True, eq=False, repr=False)
class Lam(Exp):
    var: str
    body: Exp
    label: int = 0

    @cached_property
    def fv(self) -> frozenset[str]:
        return self.body.fv - {self.var}

    def children(self) -> tuple[Exp, ...]:
        return (self.body,)


@dataclass(frozen=True, eq=False, repr=False)
class App(Exp):
    fun: Exp
    arg: Exp
    label: int = 0

    @cached_property
    def fv(self) -> frozenset[str]:
        return self.fun.fv | self.arg.fv

    def children(self) -> tuple[Exp, ...]:
        return (self.fun, self.arg)


@dataclass(frozen=True, eq=False, repr=False)
class NonTerm(Exp):
    name: str
    label: int = 0
    # Least-fixpoint free variables, filled in when the node is built
    # against a grammar.
    free: frozenset[str] = field(default=frozenset())

    @property
    def fv(self) -> frozenset[str]:
        return self.free


@dataclass(frozen=True, eq=False, repr=False)
class Prim(Exp):
    """A primitive operator value: ``pred``, ``succ`` or ``ztst``."""

    op: str
    label: int = 0

    @property
    def fv(self) -> frozenset[str]:
        return frozenset()


@dataclass(frozen=True, eq=False, repr=False)
class Num(Exp):
    """A numeral.  ``value is None`` marks an opaque input ``•``."""

    value: int | None
    label: int = 0

    @property
    def fv(self) -> frozenset[str]:
        return frozenset()


@dataclass(frozen=True, eq=False, repr=False)
class Bool(Exp):
    """A truth value; only ever produced by ``ztst`` at run time."""

    value: bool
    label: int = 0

    @property
    def fv(self) -> frozenset[str]:
        return frozenset()


@dataclass(frozen=True, eq=False, repr=False)
class If(Exp):
    cond: Exp
    then: Exp
    orelse: Exp
    label: int = 0

    @cached_property
    def fv(self) -> frozenset[str]:
        return self.cond.fv | self.then.fv | self.orelse.fv

    def children(self) -> tuple[Exp, ...]:
        return (self.cond, self.then, self.orelse)


def is_value(e: Exp) -> bool:
    """Values of the language: abstractions, primitive operators and data."""
    return isinstance(e, (Lam, Prim, Num, Bool))


def subterms(e: Exp) -> Iterator[Exp]:
    """Preorder walk of the syntax tree (nonterminals are leaves)."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


# --------------------------------------------------------------------------
# Pretty printing


def show(e: Exp) -> str:
    """Render ``e`` in concrete syntax that :func:`parse_expression` accepts."""
    if isinstance(e, Var):
        return e.name
    if isinstance(e, NonTerm):
        return e.name
    if isinstance(e, Prim):
        return e.op
    if isinstance(e, Num):
        return "•" if e.value is None else str(e.value)
    if isinstance(e, Bool):
        return "true" if e.value else "false"
    if isinstance(e, Lam):
        return f"\\{e.var}.{show(e.body)}"
    if isinstance(e, If):
        return f"if({show(e.cond)},{show(e.then)},{show(e.orelse)})"
    if isinstance(e, App):
        left = show(e.fun)
        if isinstance(e.fun, Lam):
            left = f"({left})"
        right = show(e.arg)
        if isinstance(e.arg, (App, Lam)):
            right = f"({right})"
        return f"{left}@{right}"
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<define>::=)
  | (?P<lam>\\|λ)
  | (?P<ident>[A-Za-z][A-Za-z0-9_']*)
  | (?P<num>[0-9]+)
  | (?P<bullet>•|_)
  | (?P<punct>[.@()\[\]{},;|])
    """,
    re.VERBOSE,
)

_CLOSERS = {"(": ")", "[": "]", "{": "}"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SyntaxError_(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "punct":
                kind = chunk
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        for i, ch in enumerate(chunk):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# --------------------------------------------------------------------------
# Parser (produces unlabeled nodes)


class _Parser:
    def __init__(self, toks: list[_Tok], nonterminals: frozenset[str], primitives: bool):
        self.toks = toks
        self.i = 0
        self.nonterminals = nonterminals
        self.primitives = primitives
        self.bound: list[str] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok | None = None) -> SyntaxError_:
        tok = tok or self.tok
        return SyntaxError_(message, tok.line, tok.col)

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Tok:
        if self.tok.kind != kind:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {kind!r}, found {found!r}")
        return self.advance()

    def at_production_start(self) -> bool:
        return self.tok.kind == "ident" and self.toks[self.i + 1].kind == "define"

    def starts_atom(self) -> bool:
        k = self.tok.kind
        if k == "ident":
            return not self.at_production_start()
        return k in ("(", "[", "{", "num", "bullet", "lam")

    # expr := '\' ident+ '.' expr | app
    def expr(self) -> Exp:
        if self.tok.kind == "lam":
            return self.lam()
        return self.app()

    def lam(self) -> Exp:
        self.expect("lam")
        names = [self.expect("ident").text]
        while self.tok.kind == "ident":
            names.append(self.advance().text)
        self.expect(".")
        for name in names:
            if name[0].isupper() and name in self.nonterminals:
                raise self.error(f"nonterminal {name!r} used as a binder")
        self.bound.extend(names)
        body = self.expr()
        del self.bound[len(self.bound) - len(names):]
        for name in reversed(names):
            body = Lam(name, body)
        return body

    # app := atom (['@'] (atom | lambda))*   -- left associative
    def app(self) -> Exp:
        e = self.atom()
        while True:
            if self.tok.kind == "@":
                self.advance()
            elif not self.starts_atom():
                return e
            if self.tok.kind == "lam":
                # a bare λ operand extends as far right as possible
                return App(e, self.lam())
            e = App(e, self.atom())

    def atom(self) -> Exp:
        tok = self.tok
        if tok.kind in _CLOSERS:
            self.advance()
            e = self.expr()
            self.expect(_CLOSERS[tok.kind])
            return e
        if tok.kind == "num":
            self.need_primitives(tok)
            self.advance()
            return Num(int(tok.text))
        if tok.kind == "bullet":
            self.need_primitives(tok)
            self.advance()
            return Num(None)
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name in self.bound:
                return Var(name)
            if name == "if" and self.tok.kind == "(":
                self.need_primitives(tok)
                self.advance()
                c = self.expr()
                self.expect(",")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return If(c, a, b)
            if name in self.nonterminals:
                return NonTerm(name)
            if name[0].isupper():
                raise self.error(f"unknown nonterminal {name!r}", tok)
            if name in _PRIM_ALIASES:
                self.need_primitives(tok)
                return Prim(_PRIM_ALIASES[name])
            return Var(name)
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r}")

    def need_primitives(self, tok: _Tok) -> None:
        if not self.primitives:
            raise self.error(f"primitive {tok.text!r} used while primitives are disabled", tok)


def parse_expression(
    text: str, nonterminals: Iterable[str] = (), primitives: bool = False
) -> Exp:
    """Parse one unlabeled expression."""
    p = _Parser(_tokenize(text), frozenset(nonterminals), primitives)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after expression")
    return e


# --------------------------------------------------------------------------
# Grammars


@dataclass(frozen=True, eq=False)
class Grammar:
    """A λ-regular grammar: an ordered list of productions ``A ::= e``."""

    productions: tuple[tuple[str, Exp], ...] = ()

    @cached_property
    def nonterminals(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for name, _ in self.productions:
            seen.setdefault(name, None)
        return tuple(seen)

    def bodies(self, name: str) -> tuple[Exp, ...]:
        return tuple(body for lhs, body in self.productions if lhs == name)

    @cached_property
    def nt_free_vars(self) -> dict[str, frozenset[str]]:
        """Least fixpoint of ``fv(A) = ∪ fv(e)`` over the productions of A."""
        table = {name: frozenset() for name in self.nonterminals}
        changed = True
        while changed:
            changed = False
            for lhs, body in self.productions:
                extra = _free_vars(body, table) - table[lhs]
                if extra:
                    table[lhs] = table[lhs] | extra
                    changed = True
        return table

    def __len__(self) -> int:
        return len(self.productions)


EMPTY_GRAMMAR = Grammar()


def _free_vars(e: Exp, nt_table: dict[str, frozenset[str]]) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, NonTerm):
        try:
            return nt_table[e.name]
        except KeyError:
            raise GrammarError(f"unknown nonterminal {e.name!r}") from None
    if isinstance(e, Lam):
        return _free_vars(e.body, nt_table) - {e.var}
    out: frozenset[str] = frozenset()
    for child in e.children():
        out |= _free_vars(child, nt_table)
    return out


def _split_productions(toks: list[_Tok]) -> list[tuple[_Tok, list[_Tok]]]:
    """Cut a token stream into ``(lhs, body tokens)`` pairs.

    A body ends at ``;``, ``|`` (which repeats the left-hand side), the next
    ``Name ::=`` or end of input.
    """
    out: list[tuple[_Tok, list[_Tok]]] = []
    i = 0
    while toks[i].kind != "eof":
        if toks[i].kind == ";":
            i += 1
            continue
        if not (toks[i].kind == "ident" and toks[i + 1].kind == "define"):
            t = toks[i]
            raise SyntaxError_("expected a production 'Name ::= expr'", t.line, t.col)
        lhs = toks[i]
        if not lhs.text[0].isupper():
            raise SyntaxError_(f"nonterminal names start with a capital: {lhs.text!r}", lhs.line, lhs.col)
        i += 2
        depth = 0
        body: list[_Tok] = []
        while True:
            t = toks[i]
            if t.kind == "eof":
                break
            if depth == 0 and t.kind in (";", "|"):
                break
            if depth == 0 and t.kind == "ident" and toks[i + 1].kind == "define":
                break
            if t.kind in _CLOSERS:
                depth += 1
            elif t.kind in (")", "]", "}"):
                depth -= 1
            body.append(t)
            i += 1
        if not body:
            raise SyntaxError_(f"empty production for {lhs.text!r}", lhs.line, lhs.col)
        out.append((lhs, body + [_Tok("eof", "", body[-1].line, body[-1].col + 1)]))
        if toks[i].kind == "|":
            # `A ::= e1 | e2` shares the left-hand side
            toks = toks[:i] + [lhs, _Tok("define", "::=", lhs.line, lhs.col)] + toks[i + 1:]
    return out


def parse_grammar(text: str, primitives: bool = False) -> Grammar:
    """Parse and normalize a grammar.

    Productions are ``Name ::= expr`` separated by ``;``, ``|`` or by the
    start of the next production.  Unit productions ``A ::= B`` are removed
    by inlining B's productions; a cycle of unit productions is an error.
    """
    raw = _split_productions(_tokenize(text))
    names = frozenset(lhs.text for lhs, _ in raw)
    prods: list[tuple[str, Exp]] = []
    for lhs, body_toks in raw:
        p = _Parser(body_toks, names, primitives)
        body = p.expr()
        if p.tok.kind != "eof":
            raise p.error(f"unexpected {p.tok.text!r} in production for {lhs.text!r}")
        prods.append((lhs.text, body))
    return _normalize(prods)


def _normalize(prods: list[tuple[str, Exp]]) -> Grammar:
    order = list(dict.fromkeys(lhs for lhs, _ in prods))
    units = {a: [b.name for lhs, b in prods if lhs == a and isinstance(b, NonTerm)] for a in order}

    expanded: dict[str, list[Exp]] = {}

    def expand(a: str, path: tuple[str, ...]) -> list[Exp]:
        if a in path:
            cycle = " -> ".join(path[path.index(a):] + (a,))
            raise GrammarError(f"cyclic unit productions cannot be normalized: {cycle}")
        if a in expanded:
            return expanded[a]
        out: list[Exp] = []
        for lhs, body in prods:
            if lhs != a:
                continue
            if isinstance(body, NonTerm):
                for inner in expand(body.name, path + (a,)):
                    if inner not in out:
                        out.append(inner)
            elif body not in out:
                out.append(body)
        expanded[a] = out
        return out

    result: list[tuple[str, Exp]] = []
    for a in order:
        bodies = expand(a, ())
        if not bodies and units[a]:
            raise GrammarError(f"nonterminal {a!r} derives no expression")
        result.extend((a, b) for b in bodies)
    return Grammar(tuple(result))


# --------------------------------------------------------------------------
# Programs: labeled expressions together with their grammar


@dataclass(frozen=True, eq=False)
class Program:
    """A labeled main expression and its labeled grammar.

    ``points`` maps every program point to its node.  ``bullets`` lists the
    points of the opaque inputs ``•`` in textual order.
    """

    root: Exp
    grammar: Grammar
    points: dict[int, Exp]
    primitives: bool = False

    @cached_property
    def bullets(self) -> tuple[int, ...]:
        return tuple(
            lbl for lbl, node in sorted(self.points.items())
            if isinstance(node, Num) and node.value is None
        )

    @cached_property
    def nonterminal_nodes(self) -> dict[str, NonTerm]:
        return {n.name: n for n in self.points.values() if isinstance(n, NonTerm)}

    def bodies(self, nt: NonTerm) -> tuple[Exp, ...]:
        return self.grammar.bodies(nt.name)

    @cached_property
    def subexps(self) -> frozenset[Exp]:
        return frozenset(subexps(self.root, self.grammar))

    @cached_property
    def parents(self) -> dict[int, tuple[Exp, ...]]:
        """Point -> nodes having it as an immediate child (bodies count for nonterminals)."""
        out: dict[int, list[Exp]] = {}
        for node in self.points.values():
            kids: Iterable[Exp] = node.children()
            if isinstance(node, NonTerm):
                kids = self.bodies(node)
            for kid in kids:
                out.setdefault(kid.label, []).append(node)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def names(self) -> tuple[str, ...]:
        """All variable names occurring anywhere, sorted."""
        seen: set[str] = set()
        for node in self.points.values():
            if isinstance(node, Var):
                seen.add(node.name)
            elif isinstance(node, Lam):
                seen.add(node.var)
        return tuple(sorted(seen))

    def __str__(self) -> str:
        return show(self.root)


def _binders(e: Exp) -> Iterator[str]:
    for node in subterms(e):
        if isinstance(node, Lam):
            yield node.var


def _all_names(e: Exp) -> set[str]:
    out = set()
    for node in subterms(e):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Lam):
            out.add(node.var)
    return out


def _freshen(e: Exp, reserved: set[str], strict: bool) -> Exp:
    """Rename binders so that no name is bound at two λ sites.

    The first binding site of a name (in preorder) keeps it; later ones get
    primes appended.  ``reserved`` holds names that may not be rebound at all.
    """
    taken = set(reserved)
    avoid = _all_names(e) | reserved

    def fresh(name: str) -> str:
        cand = name + "'"
        while cand in avoid:
            cand += "'"
        avoid.add(cand)
        return cand

    def go(node: Exp, env: dict[str, str]) -> Exp:
        if isinstance(node, Var):
            return Var(env.get(node.name, node.name))
        if isinstance(node, Lam):
            name = node.var
            if name in taken:
                if strict:
                    raise SyntaxError_(f"variable {name!r} is bound at more than one λ")
                new = fresh(name)
            else:
                new = name
            taken.add(new)
            return Lam(new, go(node.body, {**env, name: new}))
        if isinstance(node, App):
            return App(go(node.fun, env), go(node.arg, env))
        if isinstance(node, If):
            return If(go(node.cond, env), go(node.then, env), go(node.orelse, env))
        return node

    return go(e, {})


class _Labeler:
    def __init__(self, grammar: Grammar):
        self.grammar = grammar
        self.nt_fv = grammar.nt_free_vars
        self.next = 1
        self.points: dict[int, Exp] = {}
        self.nts: dict[str, NonTerm] = {}
        self.bodies: dict[str, list[Exp]] = {}

    def take(self) -> int:
        lbl = self.next
        self.next += 1
        return lbl

    def visit(self, e: Exp) -> Exp:
        if isinstance(e, NonTerm):
            return self.nonterminal(e.name)
        lbl = self.take()
        if isinstance(e, Var):
            out: Exp = Var(e.name, lbl)
        elif isinstance(e, Lam):
            out = Lam(e.var, self.visit(e.body), lbl)
        elif isinstance(e, App):
            fun = self.visit(e.fun)
            out = App(fun, self.visit(e.arg), lbl)
        elif isinstance(e, If):
            c = self.visit(e.cond)
            a = self.visit(e.then)
            out = If(c, a, self.visit(e.orelse), lbl)
        elif isinstance(e, Prim):
            out = Prim(e.op, lbl)
        elif isinstance(e, Num):
            out = Num(e.value, lbl)
        else:
            raise TypeError(f"cannot label {e!r}")
        self.points[lbl] = out
        return out

    def nonterminal(self, name: str) -> NonTerm:
        if name in self.nts:
            return self.nts[name]
        if name not in self.nt_fv:
            raise GrammarError(f"unknown nonterminal {name!r}")
        node = NonTerm(name, self.take(), self.nt_fv[name])
        self.nts[name] = node
        self.points[node.label] = node
        # production bodies are numbered right after their nonterminal
        self.bodies[name] = [self.visit(b) for b in self.grammar.bodies(name)]
        return node


def label_program(
    e: Exp, grammar: Grammar | None = None, primitives: bool = False
) -> Program:
    """Assign preorder program points to ``e`` and the grammar bodies it reaches."""
    grammar = grammar or EMPTY_GRAMMAR
    lab = _Labeler(grammar)
    root = lab.visit(e)
    for name in grammar.nonterminals:
        lab.nonterminal(name)  # unreachable nonterminals still get points
    labeled = Grammar(tuple(
        (name, body)
        for name in grammar.nonterminals
        for body in lab.bodies[name]
    ))
    return Program(root, labeled, lab.points, primitives)


def parse_program(
    text: str,
    grammar: Grammar | str | None = None,
    *,
    primitives: bool = False,
    strict_alpha: bool = False,
) -> Program:
    """Parse a program file.

    The text may start with a ``grammar: ... end`` block; a grammar passed
    explicitly is merged in front of it.  Binders that are reused are renamed
    unless ``strict_alpha`` is set, in which case reuse is an error.
    """
    m = re.match(r"\s*(?:--[^\n]*\s*)*grammar:(.*?)\bend\b", text, re.DOTALL)
    inline = None
    if m:
        inline = parse_grammar(m.group(1), primitives)
        pad = "\n" * m.group(0).count("\n")
        text = pad + text[m.end():]
    if isinstance(grammar, str):
        grammar = parse_grammar(grammar, primitives)
    grammar = grammar or EMPTY_GRAMMAR
    if inline is not None:
        grammar = _normalize(list(grammar.productions) + list(inline.productions))
    e = parse_expression(text, grammar.nonterminals, primitives)
    reserved: set[str] = set()
    for _, body in grammar.productions:
        reserved.update(_binders(body))
        reserved.update(_all_names(body))
    e = _freshen(e, reserved, strict_alpha)
    return label_program(e, grammar, primitives)


# --------------------------------------------------------------------------
# Static structure


def free_vars(e: Exp, grammar: Grammar | None = None) -> frozenset[str]:
    """Free variables; for nonterminals the least fixpoint over the grammar."""
    if grammar is None:
        return e.fv
    return _free_vars(e, grammar.nt_free_vars)


def subexps(e: Exp, grammar: Grammar | None = None) -> set[Exp]:
    """Subexpressions of ``e``, following nonterminals into their productions."""
    seen: dict[int, Exp] = {}
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen[id(node)] = node
        if isinstance(node, NonTerm):
            if grammar is None:
                continue
            if node.name not in grammar.nonterminals:
                raise GrammarError(f"unknown nonterminal {node.name!r}")
            stack.extend(grammar.bodies(node.name))
        else:
            stack.extend(node.children())
    return set(seen.values())


def is_closed(e: Exp, grammar: Grammar | None = None) -> bool:
    return not free_vars(e, grammar)


def has_nonterminals(e: Exp) -> bool:
    return any(isinstance(n, NonTerm) for n in subterms(e))


def alpha_equivalent(a: Exp, b: Exp) -> bool:
    """Structural equality up to consistent renaming of bound variables."""
    stack = [(a, b, {}, {}, 0)]
    while stack:
        x, y, ex, ey, depth = stack.pop()
        if type(x) is not type(y):
            return False
        if isinstance(x, Var):
            ix, iy = ex.get(x.name), ey.get(y.name)
            if ix != iy or (ix is None and x.name != y.name):
                return False
        elif isinstance(x, Lam):
            stack.append((x.body, y.body, {**ex, x.var: depth}, {**ey, y.var: depth}, depth + 1))
        elif isinstance(x, (App, If)):
            for cx, cy in zip(x.children(), y.children()):
                stack.append((cx, cy, ex, ey, depth))
        elif isinstance(x, NonTerm):
            if x.name != y.name:
                return False
        elif isinstance(x, Prim):
            if x.op != y.op:
                return False
        elif isinstance(x, (Num, Bool)):
            if x.value != y.value:
                return False
    return True
