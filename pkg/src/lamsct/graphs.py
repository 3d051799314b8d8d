"""Size-change graphs and their algebra.

A graph relates a source name set to a target name set; names are variables
plus the reserved :data:`~lamsct.syntax.EPS`.  Each arc carries ``=`` or
``>`` (strict decrease); ``>`` absorbs ``=`` when both are added for the
same pair.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Mapping

from .syntax import EPS, Bool, Exp, Num

if TYPE_CHECKING:
    from .semantics import State

EQ = "="
DEC = ">"

Arc = tuple[str, str, str]  # (source name, label, target name)


def _name_key(name: str) -> tuple[int, str]:
    return (0, "") if name == EPS else (1, name)


def display_name(name: str) -> str:
    return "eps" if name == EPS else name


def parse_name(text: str) -> str:
    return EPS if text in ("eps", EPS) else text


@dataclass(frozen=True)
class SizeChangeGraph:
    source: frozenset[str]
    target: frozenset[str]
    arcs: frozenset[Arc]

    def __post_init__(self) -> None:
        seen: dict[tuple[str, str], str] = {}
        for p, lbl, q in self.arcs:
            if lbl not in (EQ, DEC):
                raise ValueError(f"bad arc label {lbl!r}")
            if p not in self.source or q not in self.target:
                raise ValueError(f"arc ({p},{lbl},{q}) outside {sorted(self.source)} -> {sorted(self.target)}")
            if (p, q) in seen:
                raise ValueError(f"pair ({p},{q}) carries two labels; build graphs with make_graph")
            seen[(p, q)] = lbl

    @cached_property
    def arc_map(self) -> dict[tuple[str, str], str]:
        return {(p, q): lbl for p, lbl, q in self.arcs}

    def sorted_arcs(self) -> list[Arc]:
        return sorted(self.arcs, key=lambda a: (_name_key(a[0]), _name_key(a[2]), a[1]))

    def text(self) -> str:
        """``[(p,r,q),…]`` with ε printed as ``eps``."""
        body = ",".join(f"({display_name(p)},{lbl},{display_name(q)})" for p, lbl, q in self.sorted_arcs())
        return f"[{body}]"

    __str__ = text

    def sort_key(self) -> str:
        return self.text()

    def to_json(self) -> dict:
        return {
            "source": sorted((display_name(n) for n in self.source)),
            "target": sorted((display_name(n) for n in self.target)),
            "arcs": [[display_name(p), lbl, display_name(q)] for p, lbl, q in self.sorted_arcs()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "SizeChangeGraph":
        return make_graph(
            (parse_name(n) for n in data["source"]),
            (parse_name(n) for n in data["target"]),
            ((parse_name(p), lbl, parse_name(q)) for p, lbl, q in data["arcs"]),
        )

    def has_descent_loop(self) -> bool:
        """Some arc ``z > z``."""
        return any(p == q and lbl == DEC for p, lbl, q in self.arcs)


def make_graph(source: Iterable[str], target: Iterable[str], arcs: Iterable[Arc]) -> SizeChangeGraph:
    """Build a graph, keeping the strongest label for repeated pairs."""
    best: dict[tuple[str, str], str] = {}
    for p, lbl, q in arcs:
        if best.get((p, q)) != DEC:
            best[(p, q)] = lbl
    return SizeChangeGraph(
        frozenset(source), frozenset(target),
        frozenset((p, lbl, q) for (p, q), lbl in best.items()),
    )


def names_of(e: Exp) -> frozenset[str]:
    """``fv(e) ∪ {ε}``, the name set of graphs touching ``e``."""
    return e.fv | {EPS}


def compose(g1: SizeChangeGraph, g2: SizeChangeGraph) -> SizeChangeGraph:
    """Sequential composition ``g1;g2``."""
    if g1.target != g2.source:
        raise ValueError(
            f"graphs do not compose: target {sorted(g1.target)} != source {sorted(g2.source)}"
        )
    out_of: dict[str, list[tuple[str, str]]] = {}
    for y, lbl, z in g2.arcs:
        out_of.setdefault(y, []).append((lbl, z))
    best: dict[tuple[str, str], str] = {}
    for x, l1, y in g1.arcs:
        for l2, z in out_of.get(y, ()):
            lbl = DEC if DEC in (l1, l2) else EQ
            if best.get((x, z)) != DEC:
                best[(x, z)] = lbl
    return SizeChangeGraph(
        g1.source, g2.target, frozenset((x, lbl, z) for (x, z), lbl in best.items())
    )


def identity(names: Iterable[str]) -> SizeChangeGraph:
    """The unit graph ``{z =→ z}`` over ``names``."""
    ns = frozenset(names)
    return SizeChangeGraph(ns, ns, frozenset((n, EQ, n) for n in ns))


def identity_eq(e: Exp, source: Iterable[str] | None = None) -> SizeChangeGraph:
    """``{ε=→ε} ∪ {y=→y | y ∈ fv(e)}``.

    ``source`` widens the source set when the step starts at a larger
    expression (a nonterminal whose free variables cover those of ``e``).
    """
    tgt = names_of(e)
    src = tgt if source is None else frozenset(source)
    return SizeChangeGraph(src, tgt, frozenset((y, EQ, y) for y in tgt))


def identity_dec(e: Exp, source: Iterable[str] | None = None) -> SizeChangeGraph:
    """``{ε↓→ε} ∪ {y=→y | y ∈ fv(e)}``, for a step into a proper part ``e``."""
    tgt = names_of(e)
    src = tgt if source is None else frozenset(source)
    arcs = {(y, EQ, y) for y in e.fv}
    arcs.add((EPS, DEC, EPS))
    return SizeChangeGraph(src, tgt, frozenset(arcs))


def var_graph(x: str, value: Exp) -> SizeChangeGraph:
    """Graph of looking up ``x`` and finding a closure over ``value``."""
    tgt = names_of(value)
    arcs = {(x, EQ, EPS)} | {(x, DEC, y) for y in value.fv}
    return SizeChangeGraph(frozenset((x, EPS)), tgt, frozenset(arcs))


def value_graph(e: Exp) -> SizeChangeGraph:
    """Graph of a value evaluating to itself.

    Closures get ``id=``; numerals and truth values are plain data and get
    the empty graph over ``{ε}``.
    """
    if isinstance(e, (Num, Bool)):
        return empty_graph((EPS,), (EPS,))
    return identity_eq(e)


def call_combine(
    g1: SizeChangeGraph,
    g2: SizeChangeGraph,
    binder: str,
    body: Exp,
    unused_binder_arcs: bool = False,
) -> SizeChangeGraph:
    """Graph of the call from ``e1@e2`` into the body of the operator value.

    ``g1`` describes the operator's evaluation to ``λbinder.body``, ``g2``
    the operand's evaluation.  Names of the result are those of
    ``e1@e2`` on the left and ``fv(body) ∪ {ε}`` on the right.

    With ``unused_binder_arcs`` and a binder that does not occur in the
    body, arcs of ``g1`` into ε are kept as ``>`` arcs into the body's ε:
    the body state is then a proper part of the operator value.  These arcs
    are off by default; see the README for the effect on one example.
    """
    target = names_of(body)
    keep_into_eps = unused_binder_arcs and binder not in body.fv
    arcs: list[Arc] = []
    for p, lbl, q in g1.arcs:
        if p != EPS and q != EPS:
            arcs.append((p, lbl, q))
        elif p == EPS and q != EPS:
            arcs.append((EPS, DEC, q))
        elif keep_into_eps:
            arcs.append((p, DEC, q))
    for p, lbl, q in g2.arcs:
        if q != EPS:
            continue
        arcs.append((p, DEC, binder) if p == EPS else (p, lbl, binder))
    return make_graph(
        g1.source | g2.source, target, (a for a in arcs if a[2] in target)
    )


def demote_into_eps(g: SizeChangeGraph, source: Iterable[str]) -> SizeChangeGraph:
    """Keep arcs into ε, relabelled ``>``; used for ``pred``'s result."""
    return SizeChangeGraph(
        frozenset(source), frozenset((EPS,)),
        frozenset((p, DEC, EPS) for p, _, q in g.arcs if q == EPS),
    )


def empty_graph(source: Iterable[str], target: Iterable[str]) -> SizeChangeGraph:
    return SizeChangeGraph(frozenset(source), frozenset(target), frozenset())


def restrict(g: SizeChangeGraph, source: Iterable[str], target: Iterable[str]) -> SizeChangeGraph:
    src, tgt = frozenset(source), frozenset(target)
    return SizeChangeGraph(
        src & g.source, tgt & g.target,
        frozenset(a for a in g.arcs if a[0] in src and a[2] in tgt),
    )


def _path(name: str) -> tuple[str, ...]:
    return () if name == EPS else (name,)


def graph_safe_for(g: SizeChangeGraph, s1: "State", s2: "State") -> bool:
    """Every ``=`` arc relates equal substates, every ``>`` arc strictly ordered ones."""
    from .semantics import state_gt, valuate

    for p, lbl, q in g.arcs:
        if p != EPS and p not in s1.expr.fv:
            return False
        if q != EPS and q not in s2.expr.fv:
            return False
        a = valuate(s1, _path(p))
        b = valuate(s2, _path(q))
        if lbl == EQ and a != b:
            return False
        if lbl == DEC and not state_gt(a, b):
            return False
    return True


def graph_violations(g: SizeChangeGraph, s1: "State", s2: "State") -> list[Arc]:
    """Arcs of ``g`` that do not hold between ``s1`` and ``s2``."""
    return [a for a in g.sorted_arcs() if not graph_safe_for(
        SizeChangeGraph(g.source, g.target, frozenset((a,))), s1, s2)]
