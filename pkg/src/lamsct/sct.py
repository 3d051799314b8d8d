"""The size-change termination check over an analysis result."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .abstract import AnalysisResult, CallEdge
from .graphs import DEC, EQ, SizeChangeGraph, compose
from .syntax import EPS

_CODE = {EQ: kernels.EQ_CODE, DEC: kernels.DEC_CODE}
_LABEL = {kernels.EQ_CODE: EQ, kernels.DEC_CODE: DEC}


@dataclass(frozen=True)
class ClosureElement:
    src: int
    dst: int
    graph: SizeChangeGraph
    witness: tuple[int, ...]  # intermediate points of a shortest realizing path

    def sort_key(self):
        return (self.src, self.dst, len(self.witness), self.graph.text(), self.witness)


@dataclass(frozen=True)
class Verdict:
    terminating: bool
    counterexample: ClosureElement | None = None

    def __str__(self) -> str:
        return f"Size-Change Termination: {'Yes' if self.terminating else 'No'}"


class _Index:
    """Dense encoding of graphs over every name the edge graphs mention."""

    def __init__(self, edges):
        names: set[str] = set()
        self.point_names: dict[int, frozenset[str]] = {}
        for e in edges:
            names |= e.graph.source | e.graph.target
            self.point_names[e.src] = e.graph.source
            self.point_names[e.dst] = e.graph.target
        names.discard(EPS)
        self.names = (EPS,) + tuple(sorted(names))
        self.pos = {n: i for i, n in enumerate(self.names)}

    def encode(self, g: SizeChangeGraph) -> np.ndarray:
        m = np.zeros((len(self.names), len(self.names)), dtype=np.int8)
        for p, lbl, q in g.arcs:
            m[self.pos[p], self.pos[q]] = _CODE[lbl]
        return m

    def decode(self, m: np.ndarray, src: int, dst: int) -> SizeChangeGraph:
        xs, zs = np.nonzero(m)
        arcs = frozenset(
            (self.names[x], _LABEL[int(m[x, z])], self.names[z]) for x, z in zip(xs.tolist(), zs.tolist())
        )
        return SizeChangeGraph(self.point_names[src], self.point_names[dst], arcs)


@dataclass(frozen=True)
class GraphSet:
    """Bare call edges between numbered points, e.g. a first-order call graph."""

    edges: tuple[CallEdge, ...]


def graph_set(triples) -> GraphSet:
    """Build a :class:`GraphSet` from ``(src, dst, graph)`` triples."""
    return GraphSet(tuple(CallEdge(s, "c", d, g) for s, d, g in triples))


class Closure:
    """All compositions of edge graphs along edge paths, with shortest witnesses."""

    def __init__(self, result: AnalysisResult | GraphSet):
        self.result = result
        self.index = _Index(result.edges)
        out: dict[int, list[CallEdge]] = {}
        for e in result.edges:
            out.setdefault(e.src, []).append(e)
        self._out_dst = {s: [e.dst for e in es] for s, es in out.items()}
        self._out_mat = {
            s: np.stack([self.index.encode(e.graph) for e in es]) for s, es in out.items()
        }
        # key (src, dst, matrix bytes) -> (matrix, witness)
        self._elems: dict[tuple[int, int, bytes], tuple[np.ndarray, tuple[int, ...]]] = {}
        self._build()

    def _build(self) -> None:
        queue: deque = deque()
        for e in self.result.edges:
            m = self.index.encode(e.graph)
            key = (e.src, e.dst, m.tobytes())
            if key not in self._elems:
                self._elems[key] = (m, ())
                queue.append((e.src, e.dst, m, ()))
        # breadth-first, so the first path found to an element is a shortest one
        while queue:
            src, mid, m, witness = queue.popleft()
            mats = self._out_mat.get(mid)
            if mats is None:
                continue
            composed = kernels.compose_batch(m, mats)
            ext = witness + (mid,)
            for dst, r in zip(self._out_dst[mid], composed):
                key = (src, dst, r.tobytes())
                if key not in self._elems:
                    self._elems[key] = (r, ext)
                    queue.append((src, dst, r, ext))

    def __len__(self) -> int:
        return len(self._elems)

    @cached_property
    def elements(self) -> list[ClosureElement]:
        out = [
            ClosureElement(s, d, self.index.decode(m, s, d), w)
            for (s, d, _), (m, w) in self._elems.items()
        ]
        out.sort(key=ClosureElement.sort_key)
        return out

    def self_matrices(self):
        """(point, matrix, witness) for every element with src = dst."""
        for (s, d, _), (m, w) in self._elems.items():
            if s == d:
                yield s, m, w

    def contains(self, src: int, dst: int, g: SizeChangeGraph) -> bool:
        return (src, dst, self.index.encode(g).tobytes()) in self._elems


def closure(result: AnalysisResult | GraphSet) -> Closure:
    return Closure(result)


def decide(result: AnalysisResult | GraphSet, clo: Closure | None = None) -> Verdict:
    """Yes iff every idempotent closure self-graph has a strictly decreasing self-arc."""
    clo = clo or Closure(result)
    bad = []
    for point, m, w in clo.self_matrices():
        if not kernels.has_descent_loop(m) and kernels.is_idempotent(m):
            bad.append(ClosureElement(point, point, clo.index.decode(m, point, point), w))
    if not bad:
        return Verdict(True)
    return Verdict(False, min(bad, key=ClosureElement.sort_key))


@dataclass(frozen=True)
class Loop:
    point: int
    graph: SizeChangeGraph
    path: tuple[int, ...]

    def text(self) -> str:
        path = ",".join(str(p) for p in self.path)
        return f"{self.point} →* {self.point}: {self.graph.text()} [{path}]"


def self_loops(result: AnalysisResult | GraphSet, clo: Closure | None = None) -> list[Loop]:
    """Distinct closure self-graphs per point, each with a shortest path.

    Ordered by point, then path length, then graph text.
    """
    clo = clo or Closure(result)
    loops = [
        Loop(p, clo.index.decode(m, p, p), w) for p, m, w in clo.self_matrices()
    ]
    loops.sort(key=lambda lp: (lp.point, len(lp.path), lp.graph.text(), lp.path))
    return loops


# --------------------------------------------------------------------------
# Independent bounded check


def idempotent_power(g: SizeChangeGraph, limit: int = 10_000) -> SizeChangeGraph:
    """The unique idempotent among the powers of a self-composable graph."""
    power = g
    for _ in range(limit):
        if compose(power, power) == power:
            return power
        power = compose(power, g)
    raise RuntimeError("no idempotent power found within limit")


@dataclass
class AuditReport:
    bound: int
    cycles: int = 0
    failing: list[Loop] = field(default_factory=list)
    missing: list[Loop] = field(default_factory=list)
    verdict: Verdict | None = None

    @property
    def audit_says_terminating(self) -> bool:
        return not self.failing

    @property
    def conclusive(self) -> bool:
        """Whether the bound was long enough to see a violation decide reports."""
        if self.verdict is None or self.verdict.terminating:
            return True
        return bool(self.failing) or len(self.verdict.counterexample.witness) + 1 <= self.bound

    @property
    def agrees(self) -> bool:
        if self.missing or self.verdict is None:
            return False
        if self.verdict.terminating:
            return not self.failing
        return bool(self.failing) or not self.conclusive

    def lines(self) -> list[str]:
        out = [f"audited cycle graphs up to length {self.bound}: {self.cycles}"]
        out += [f"non-descending idempotent cycle: {lp.text()}" for lp in self.failing[:20]]
        out += [f"cycle graph missing from closure: {lp.text()}" for lp in self.missing[:20]]
        if self.verdict is not None:
            out.append(str(self.verdict))
            if not self.conclusive:
                out.append("audit inconclusive: shortest violating cycle is longer than the bound")
            out.append(f"audit agrees with decision: {'yes' if self.agrees else 'NO'}")
        return out


def bounded_multipath_audit(result: AnalysisResult | GraphSet, bound: int = 6) -> AuditReport:
    """Check every cyclic edge path of length ≤ ``bound`` without the closure.

    Each cycle's composed graph is raised to its idempotent power, which must
    carry a decreasing self-arc when the cycle is repeated forever.  Paths
    that reach the same point with the same composed graph are explored once.
    The report compares the findings with :func:`decide`.
    """
    out: dict[int, list[CallEdge]] = {}
    for e in result.edges:
        out.setdefault(e.src, []).append(e)
    clo = Closure(result)
    report = AuditReport(bound, verdict=decide(result, clo))
    seen_cycles: set[tuple[int, SizeChangeGraph]] = set()
    for start in sorted(out):
        seen: dict[tuple[int, SizeChangeGraph], int] = {}
        frontier = [(e.dst, e.graph, ()) for e in out[start]]
        for depth in range(1, bound + 1):
            nxt = []
            for point, g, path in frontier:
                if (point, g) in seen:
                    continue
                seen[(point, g)] = depth
                if point == start and (start, g) not in seen_cycles:
                    seen_cycles.add((start, g))
                    report.cycles += 1
                    loop = Loop(start, g, path)
                    if not clo.contains(start, start, g):
                        report.missing.append(loop)
                    if not idempotent_power(g).has_descent_loop():
                        report.failing.append(loop)
                if depth < bound:
                    for e in out.get(point, ()):
                        nxt.append((e.dst, compose(g, e.graph), path + (point,)))
            frontier = nxt
    return report


# --------------------------------------------------------------------------
# Report text


HEADER = "SELF Size-Change Graphs, no repetition of graphs:"


def report_lines(result: AnalysisResult, verbose: bool = False) -> list[str]:
    clo = Closure(result)
    lines = [HEADER]
    lines += [lp.text() for lp in self_loops(result, clo)]
    verdict = decide(result, clo)
    if verbose:
        lines.append("Evaluation facts:")
        for f in result.evals:
            lines.append(f"{f.subject} ⇓ {f.value}: {f.graph.text()}")
        if verdict.counterexample is not None:
            lines.append(f"Counterexample: {Loop(verdict.counterexample.src, verdict.counterexample.graph, verdict.counterexample.witness).text()}")
    lines.append(str(verdict))
    return lines
