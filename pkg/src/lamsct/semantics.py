"""Environment-based call-by-value evaluation and the order on states.

The evaluator is an explicit-stack machine so that long or divergent runs
do not exhaust the Python stack.  It can record the call edges it fires and,
when instrumented, the size-change graph belonging to every call and every
evaluation step.
"""
from __future__ import annotations

import random
import sys
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Protocol, Sequence

from .graphs import (
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
    is_value,
    label_program,
    subterms,
)

CALL_KINDS = ("r", "d", "c", "n")
EVAL_KIND = "v"  # step kind of an evaluation judgement s ⇓ v


class EvalError(RuntimeError):
    """Evaluation got stuck (ill-typed primitive use, missing input, ...)."""


class UnboundVariable(EvalError):
    """A variable had no binding; impossible for closed programs."""


class _Timeout:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "TIMEOUT"

    def __bool__(self) -> bool:
        return False


TIMEOUT = _Timeout()


class _OutOfFuel(Exception):
    pass


# --------------------------------------------------------------------------
# States


def _expr_key(e: Exp) -> object:
    if isinstance(e, Num):
        return ("num", e.value)
    if isinstance(e, Bool):
        return ("bool", e.value)
    return e.label if e.label else id(e)


class State:
    """A closure ``e:ρ`` whose environment is restricted to ``fv(e)``.

    Equality follows the definition on states: same expression, and equal
    bindings for the free variables of that expression.
    """

    __slots__ = ("expr", "env", "height", "_key", "_hash")

    def __init__(self, expr: Exp, env: Mapping[str, "State"] | None = None):
        env = env or {}
        try:
            pairs = tuple(sorted((x, env[x]) for x in expr.fv))
        except KeyError as exc:
            raise UnboundVariable(f"unbound variable {exc.args[0]!r}") from None
        self.expr = expr
        self.env = pairs
        self.height = max((1 + v.height for _, v in pairs), default=0)
        self._key = _expr_key(expr)
        self._hash = hash((self._key, tuple((x, v._hash) for x, v in pairs)))

    def lookup(self, x: str) -> "State":
        for name, value in self.env:
            if name == x:
                return value
        raise UnboundVariable(f"unbound variable {x!r}")

    def env_dict(self) -> dict[str, "State"]:
        return dict(self.env)

    def restrict_to(self, e: Exp) -> "State":
        """The state ``e:ρ`` sharing this state's environment."""
        return State(e, self.env_dict())

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, State):
            return NotImplemented
        return self._hash == other._hash and self._key == other._key and self.env == other.env

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        from .syntax import show

        if not self.env:
            return f"{show(self.expr)}:[]"
        inner = ", ".join(f"{x}↦{v!r}" for x, v in self.env)
        return f"{show(self.expr)}:[{inner}]"


def initial_state(program: Program | Exp) -> State:
    e = program.root if isinstance(program, Program) else program
    return State(e)


# --------------------------------------------------------------------------
# Production choice for grammar-extended evaluation


class ProductionPolicy(Protocol):
    def choose(self, name: str, bodies: Sequence[Exp], depth: int) -> int: ...


def _fallback(bodies: Sequence[Exp]) -> int:
    for i, b in enumerate(bodies):
        if not any(isinstance(n, NonTerm) for n in subterms(b)):
            return i
    return 0


@dataclass
class FirstProduction:
    """Declaration order; past ``cap`` production steps prefer a terminal body."""

    cap: int = 64

    def choose(self, name: str, bodies: Sequence[Exp], depth: int) -> int:
        return 0 if depth < self.cap else _fallback(bodies)


class RandomProductions:
    """Seeded uniform choice, with the same cap rule as :class:`FirstProduction`."""

    def __init__(self, seed: int = 0, cap: int = 64):
        self.rng = random.Random(seed)
        self.cap = cap

    def choose(self, name: str, bodies: Sequence[Exp], depth: int) -> int:
        if depth >= self.cap:
            return _fallback(bodies)
        return self.rng.randrange(len(bodies))


# --------------------------------------------------------------------------
# The machine


@dataclass(frozen=True)
class Step:
    """One call (kind r/d/c/n) or evaluation (kind ``v``) judgement."""

    src: State
    kind: str
    dst: State
    graph: SizeChangeGraph | None = None


class _Machine:
    def __init__(
        self,
        fuel: int,
        grammar: Grammar | None,
        policy: ProductionPolicy | None,
        record: bool,
        instrument: bool,
        unused_binder_arcs: bool = False,
    ):
        if fuel <= 0:
            raise ValueError("fuel must be positive")
        self.fuel = fuel
        self.grammar = grammar
        self.policy = policy or FirstProduction()
        self.record = record
        self.instrument = instrument
        self.unused_binder_arcs = unused_binder_arcs
        self.steps: list[Step] = []
        self.nt_steps = 0

    def tick(self) -> None:
        self.fuel -= 1
        if self.fuel < 0:
            raise _OutOfFuel

    def call(self, src: State, kind: str, dst: State, graph: SizeChangeGraph | None) -> None:
        self.tick()
        if self.record:
            self.steps.append(Step(src, kind, dst, graph))

    def done(self, src: State, value: State, graph: SizeChangeGraph | None):
        if self.record and self.instrument:
            self.steps.append(Step(src, EVAL_KIND, value, graph))
        return value, graph

    def run(self, s0: State) -> State:
        inst = self.instrument
        stack: list[tuple] = [("eval", s0)]
        ret: tuple[State, SizeChangeGraph | None] | None = None
        while stack:
            frame = stack.pop()
            tag = frame[0]
            if tag == "eval":
                self.tick()
                s: State = frame[1]
                e = s.expr
                if is_value(e):
                    if isinstance(e, Num) and e.value is None:
                        raise EvalError(f"opaque input • at point {e.label} has no value")
                    ret = self.done(s, s, value_graph(e) if inst else None)
                elif isinstance(e, Var):
                    v = s.lookup(e.name)
                    ret = self.done(s, v, var_graph(e.name, v.expr) if inst else None)
                elif isinstance(e, App):
                    s1 = s.restrict_to(e.fun)
                    self.call(s, "r", s1, identity_dec(e.fun, names_of(e)) if inst else None)
                    stack.append(("app1", s))
                    stack.append(("eval", s1))
                elif isinstance(e, If):
                    s1 = s.restrict_to(e.cond)
                    self.call(s, "r", s1, identity_dec(e.cond, names_of(e)) if inst else None)
                    stack.append(("if1", s))
                    stack.append(("eval", s1))
                elif isinstance(e, NonTerm):
                    if self.grammar is None:
                        raise EvalError(f"nonterminal {e.name!r} without a grammar")
                    bodies = self.grammar.bodies(e.name)
                    idx = self.policy.choose(e.name, bodies, self.nt_steps)
                    self.nt_steps += 1
                    body = bodies[idx]
                    s1 = s.restrict_to(body)
                    g = identity_eq(body, names_of(e)) if inst else None
                    self.call(s, "n", s1, g)
                    stack.append(("result", s, g))
                    stack.append(("eval", s1))
                else:
                    raise EvalError(f"cannot evaluate {e!r}")
            elif tag == "app1":
                s = frame[1]
                e = s.expr
                s2 = s.restrict_to(e.arg)
                self.call(s, "d", s2, identity_dec(e.arg, names_of(e)) if inst else None)
                stack.append(("app2", s, ret))
                stack.append(("eval", s2))
            elif tag == "app2":
                s = frame[1]
                v1, g1 = frame[2]
                v2, g2 = ret
                f = v1.expr
                if isinstance(f, Lam):
                    env = v1.env_dict()
                    env[f.var] = v2
                    s3 = State(f.body, env)
                    g = call_combine(g1, g2, f.var, f.body, self.unused_binder_arcs) if inst else None
                    self.call(s, "c", s3, g)
                    stack.append(("result", s, g))
                    stack.append(("eval", s3))
                elif isinstance(f, Prim):
                    ret = self.primitive(s, f.op, v2, g2)
                else:
                    raise EvalError(f"cannot apply non-function {v1!r}")
            elif tag == "result":
                s, gcall = frame[1], frame[2]
                v, g = ret
                ret = self.done(s, v, compose(gcall, g) if inst else None)
            elif tag == "if1":
                s = frame[1]
                e = s.expr
                vc = ret[0].expr
                if not isinstance(vc, Bool):
                    raise EvalError(f"if-condition is not a truth value: {ret[0]!r}")
                branch = e.then if vc.value else e.orelse
                sb = s.restrict_to(branch)
                g = identity_dec(branch, names_of(e)) if inst else None
                self.call(s, "c", sb, g)
                stack.append(("result", s, g))
                stack.append(("eval", sb))
            else:  # pragma: no cover
                raise AssertionError(tag)
        assert ret is not None
        return ret[0]

    def primitive(self, s: State, op: str, v2: State, g2: SizeChangeGraph | None):
        arg = v2.expr
        if not isinstance(arg, Num) or arg.value is None:
            raise EvalError(f"{op} applied to non-numeral {v2!r}")
        src = names_of(s.expr)
        target = frozenset((EPS,))
        if op == "pred":
            if arg.value == 0:
                raise EvalError("pred applied to 0")
            out = Num(arg.value - 1)
            g = demote_into_eps(g2, src) if self.instrument else None
        elif op == "succ":
            out = Num(arg.value + 1)
            g = empty_graph(src, target) if self.instrument else None
        elif op == "ztst":
            out = Bool(arg.value == 0)
            g = empty_graph(src, target) if self.instrument else None
        else:  # pragma: no cover
            raise EvalError(f"unknown primitive {op!r}")
        return self.done(s, State(out), g)


def _execute(s, fuel, grammar, policy, record, instrument, unused_binder_arcs=False):
    m = _Machine(fuel, grammar, policy, record, instrument, unused_binder_arcs)
    try:
        value: State | _Timeout = m.run(s)
    except _OutOfFuel:
        value = TIMEOUT
    return value, m.steps


def eval(
    s: State,
    fuel: int = 100_000,
    grammar: Grammar | None = None,
    policy: ProductionPolicy | None = None,
) -> State | _Timeout:
    """Evaluate ``s`` to a value state, or :data:`TIMEOUT` when fuel runs out.

    Fuel counts rule applications: one per evaluation judgement and one per
    call step.
    """
    return _execute(s, fuel, grammar, policy, record=False, instrument=False)[0]


def trace_calls(
    s: State,
    fuel: int = 100_000,
    grammar: Grammar | None = None,
    policy: ProductionPolicy | None = None,
) -> list[tuple[State, str, State]]:
    """Call edges fired while evaluating ``s``, in firing order."""
    _, steps = _execute(s, fuel, grammar, policy, record=True, instrument=False)
    return [(st.src, st.kind, st.dst) for st in steps]


def eval_instrumented(
    s: State,
    fuel: int = 100_000,
    grammar: Grammar | None = None,
    policy: ProductionPolicy | None = None,
    unused_binder_arcs: bool = False,
) -> tuple[State | _Timeout, list[Step]]:
    """Evaluate and pair every call and evaluation step with its size-change graph."""
    return _execute(s, fuel, grammar, policy, True, True, unused_binder_arcs)


# --------------------------------------------------------------------------
# Graph basis, valuation and the order on states

NamePath = tuple[str, ...]


def _as_path(p: NamePath | str) -> NamePath:
    if isinstance(p, str):
        return () if p in ("", EPS) else (p,)
    return tuple(p)


def graph_basis(s: State) -> set[NamePath]:
    out: set[NamePath] = {()}
    for x, v in s.env:
        out.update((x,) + p for p in graph_basis(v))
    return out


def valuate(s: State, p: NamePath | str) -> State:
    """The substate at name path ``p``; ``()`` is ``s`` itself."""
    for x in _as_path(p):
        s = s.lookup(x)
    return s


_lengths: dict[int, int] = {}


def expr_length(e: Exp) -> int:
    """Syntactic size L; a numeral n counts as n+1."""
    if isinstance(e, Num):
        return (e.value or 0) + 1
    if isinstance(e, (Var, Prim, Bool, NonTerm)):
        return 1
    key = id(e)
    hit = _lengths.get(key)
    if hit is None:
        hit = 1 + sum(expr_length(c) for c in e.children())
        _lengths[key] = hit
        # keep e alive so the id is never reused for another node
        _length_owners.append(e)
    return hit


_length_owners: list[Exp] = []


@dataclass(frozen=True, order=True)
class Measure:
    h: int
    l: int


def measure(s: State) -> Measure:
    """(environment height, expression length), ordered lexicographically."""
    return Measure(s.height, expr_length(s.expr))


def _proper_subexps(e: Exp) -> Iterator[Exp]:
    it = subterms(e)
    next(it)
    return it


def _successors(t: State) -> Iterator[State]:
    for _, v in t.env:
        yield v
    env = None
    for sub in _proper_subexps(t.expr):
        if sub.fv <= t.expr.fv:
            if env is None:
                env = t.env_dict()
            yield State(sub, env)


@lru_cache(maxsize=1 << 16)
def state_geq(s1: State, s2: State) -> bool:
    """Decide ``s1 ⪰ s2`` by measure-pruned breadth-first search."""
    if s1 == s2:
        return True
    a, b = s1.expr, s2.expr
    if isinstance(b, Num) and b.value is not None:
        # numerals are also ordered by magnitude
        if isinstance(a, Num) and a.value is not None:
            return a.value > b.value
    goal = measure(s2)
    seen = {s1}
    queue = deque([s1])
    while queue:
        t = queue.popleft()
        for u in _successors(t):
            if u == s2:
                return True
            if u in seen or measure(u) < goal:
                continue
            if isinstance(u.expr, Num) and isinstance(b, Num) and u.expr.value is not None:
                if b.value is not None and u.expr.value > b.value:
                    return True
                continue
            seen.add(u)
            queue.append(u)
    return False


def state_gt(s1: State, s2: State) -> bool:
    """Strict order ``s1 ≻ s2``."""
    return s1 != s2 and state_geq(s1, s2)


def support(s: State) -> set[State]:
    out = {s}
    for _, v in s.env:
        out |= support(v)
    return out


# --------------------------------------------------------------------------
# Flattening and the substitution evaluator


def _substitute_closed(e: Exp, sub: Mapping[str, Exp]) -> Exp:
    """Replace free variables by closed expressions (no capture possible)."""
    if not (e.fv & sub.keys()):
        return e
    if isinstance(e, Var):
        return sub[e.name]
    if isinstance(e, Lam):
        inner = {k: v for k, v in sub.items() if k != e.var}
        return Lam(e.var, _substitute_closed(e.body, inner))
    if isinstance(e, App):
        return App(_substitute_closed(e.fun, sub), _substitute_closed(e.arg, sub))
    if isinstance(e, If):
        return If(*(_substitute_closed(c, sub) for c in e.children()))
    return e


def flatten(s: State) -> Exp:
    """The closed expression a state stands for: ``e[F(ρ(x))/x]``."""
    memo: dict[State, Exp] = {}

    def go(t: State) -> Exp:
        hit = memo.get(t)
        if hit is None:
            hit = _substitute_closed(t.expr, {x: go(v) for x, v in t.env})
            memo[t] = hit
        return hit

    return go(s)


# Terms of the reference evaluator are plain tuples:
# ("v", x) | ("l", x, body) | ("a", fun, arg)


def _to_term(e: Exp) -> tuple:
    if isinstance(e, Var):
        return ("v", e.name)
    if isinstance(e, Lam):
        return ("l", e.var, _to_term(e.body))
    if isinstance(e, App):
        return ("a", _to_term(e.fun), _to_term(e.arg))
    raise ValueError(f"substitution evaluator handles pure λ-terms only, got {e!r}")


def _from_term(t: tuple) -> Exp:
    if t[0] == "v":
        return Var(t[1])
    if t[0] == "l":
        return Lam(t[1], _from_term(t[2]))
    return App(_from_term(t[1]), _from_term(t[2]))


def _term_fv(t: tuple) -> set[str]:
    if t[0] == "v":
        return {t[1]}
    if t[0] == "l":
        return _term_fv(t[2]) - {t[1]}
    return _term_fv(t[1]) | _term_fv(t[2])


def _term_names(t: tuple) -> set[str]:
    if t[0] == "v":
        return {t[1]}
    if t[0] == "l":
        return _term_names(t[2]) | {t[1]}
    return _term_names(t[1]) | _term_names(t[2])


def _subst(t: tuple, x: str, v: tuple, v_fv: set[str]) -> tuple:
    """Capture-avoiding ``t[v/x]``."""
    kind = t[0]
    if kind == "v":
        return v if t[1] == x else t
    if kind == "a":
        return ("a", _subst(t[1], x, v, v_fv), _subst(t[2], x, v, v_fv))
    y, body = t[1], t[2]
    if y == x or x not in _term_fv(body):
        return t
    if y in v_fv:
        avoid = v_fv | _term_names(body) | {x}
        fresh = y + "'"
        while fresh in avoid:
            fresh += "'"
        body = _subst(body, y, ("v", fresh), {fresh})
        y = fresh
    return ("l", y, _subst(body, x, v, v_fv))


def eval_subst(e: Exp, fuel: int = 100_000) -> Exp | _Timeout:
    """Classical call-by-value evaluation by β-substitution."""
    budget = [fuel]

    def ev(t: tuple) -> tuple:
        while True:
            budget[0] -= 1
            if budget[0] < 0:
                raise _OutOfFuel
            if t[0] == "l":
                return t
            if t[0] == "v":
                raise EvalError(f"free variable {t[1]!r}")
            f = ev(t[1])
            a = ev(t[2])
            t = _subst(f[2], f[1], a, _term_fv(a))

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 50_000))
    try:
        return _from_term(ev(_to_term(e)))
    except _OutOfFuel:
        return TIMEOUT
    finally:
        sys.setrecursionlimit(old)


# --------------------------------------------------------------------------
# Concrete inputs and grammar instantiation


def _rebuild(e: Exp, leaf: Callable[[Exp], Exp | None]) -> Exp:
    """Copy ``e`` bottom-up; ``leaf`` may replace any node (``None`` keeps it)."""
    hit = leaf(e)
    if hit is not None:
        return hit
    if isinstance(e, Lam):
        return Lam(e.var, _rebuild(e.body, leaf), e.label)
    if isinstance(e, App):
        return App(_rebuild(e.fun, leaf), _rebuild(e.arg, leaf), e.label)
    if isinstance(e, If):
        return If(*(_rebuild(c, leaf) for c in e.children()), e.label)
    return e


def substitute_bullets(program: Program, values: Mapping[int, int]) -> Program:
    """Give the i-th ``•`` (1-based, textual order) the natural ``values[i]``.

    Program points are preserved, so analysis results for ``program`` apply
    to the returned program unchanged.
    """
    order = {lbl: i + 1 for i, lbl in enumerate(program.bullets)}
    for i, n in values.items():
        if i not in order.values():
            raise ValueError(f"program has no bullet number {i}")
        if n < 0:
            raise ValueError("bullet values are naturals")

    def leaf(node: Exp) -> Exp | None:
        if isinstance(node, Num) and node.value is None:
            i = order[node.label]
            if i in values:
                return Num(values[i], node.label)
        return None

    root = _rebuild(program.root, leaf)
    points = {}
    for node in subterms(root):
        points[node.label] = node
    points.update({k: v for k, v in program.points.items() if k not in points})
    return Program(root, program.grammar, points, program.primitives)


@dataclass(frozen=True)
class Instance:
    """A pure program obtained by expanding every nonterminal, with provenance.

    ``origin[q]`` is the point of the source program that node ``q`` copies;
    ``via[q]`` is the nonterminal point whose expansion produced ``q``, for
    nodes that root such an expansion.
    """

    program: Program
    origin: dict[int, int]
    via: dict[int, int]


Chooser = Callable[[str, int], int]


def instantiate(program: Program, chooser: Chooser, max_depth: int = 1000) -> Instance:
    """Expand nonterminals of ``program``; ``chooser(name, depth)`` picks a production.

    ``depth`` counts the enclosing expansions of the same nonterminal.
    """
    origin_of: dict[int, tuple[int, int | None]] = {}

    def copy(e: Exp, depth: dict[str, int], via: int | None) -> Exp:
        if isinstance(e, NonTerm):
            d = depth.get(e.name, 0)
            if d > max_depth:
                raise EvalError(f"expansion of {e.name} exceeds depth {max_depth}")
            bodies = program.grammar.bodies(e.name)
            body = bodies[chooser(e.name, d)]
            return copy(body, {**depth, e.name: d + 1}, e.label)
        if isinstance(e, Lam):
            out: Exp = Lam(e.var, copy(e.body, depth, None))
        elif isinstance(e, App):
            out = App(copy(e.fun, depth, None), copy(e.arg, depth, None))
        elif isinstance(e, If):
            out = If(*(copy(c, depth, None) for c in e.children()))
        elif isinstance(e, Var):
            out = Var(e.name)
        elif isinstance(e, Prim):
            out = Prim(e.op)
        elif isinstance(e, Num):
            out = Num(e.value)
        else:
            raise TypeError(e)
        origin_of[id(out)] = (e.label, via)
        return out

    raw = copy(program.root, {}, None)
    pure = label_program(raw, None, program.primitives)
    origin: dict[int, int] = {}
    via: dict[int, int] = {}
    # labelling rebuilt the tree in preorder; walk both trees in step
    for old, new in zip(subterms(raw), subterms(pure.root)):
        o, v = origin_of[id(old)]
        origin[new.label] = o
        if v is not None:
            via[new.label] = v
    return Instance(pure, origin, via)


def church_chooser(n: int) -> Chooser:
    """Pick productions so that ``A ::= z | s@A`` style grammars yield numeral n.

    At depth below ``n`` the last production is used, then the first.
    """

    def choose(name: str, depth: int) -> int:
        return -1 if depth < n else 0

    return choose


def church_value(v: Exp, fuel: int = 100_000) -> int | None:
    """The n such that the closed value ``v`` behaves as Church numeral n.

    Decided extensionally: ``v`` is applied to the primitive successor and
    the numeral 0, and the result must be a numeral.  Only two-argument
    abstractions are considered.
    """
    if not (isinstance(v, Lam) and isinstance(v.body, Lam)):
        return None
    probe = label_program(App(App(v, Prim("succ")), Num(0)), None, True)
    try:
        out = eval(State(probe.root), fuel)
    except EvalError:
        return None
    if out is TIMEOUT or not isinstance(out.expr, Num):
        return None
    return out.expr.value
