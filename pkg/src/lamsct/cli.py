"""Command-line front end.

Exit status: 0 when the run completes (whatever the verdict), 1 for bad
input, 2 when an internal consistency check fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Sequence

from .abstract import AnalysisError, analyze
from .graphs import SizeChangeGraph
from .sct import Closure, Loop, bounded_multipath_audit, decide, self_loops, HEADER
from .semantics import (
    EVAL_KIND,
    TIMEOUT,
    EvalError,
    State,
    church_value,
    eval as run_eval,
    eval_instrumented,
    flatten,
    initial_state,
    substitute_bullets,
)
from .syntax import GrammarError, SyntaxError_, parse_grammar, parse_program, show

MODES = ("analyze", "eval", "trace", "audit")


class InputError(Exception):
    """Anything wrong with what the user supplied."""


class InvariantBreach(Exception):
    """An internal cross-check disagreed."""


@dataclass
class RunConfig:
    mode: str
    input: str
    grammar: str | None = None
    fuel: int = 100_000
    strict_alpha: bool = False
    format: str = "text"
    subst: dict[int, int] = field(default_factory=dict)
    verbose: bool = False
    audit_bound: int = 6
    primitives: bool = False
    unused_binder_arcs: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}")
        if self.mode in ("eval", "trace") and self.fuel <= 0:
            raise InputError("--fuel must be positive")
        if self.subst and self.mode not in ("eval", "trace"):
            raise InputError("--subst only applies to eval and trace")
        if self.audit_bound <= 0:
            raise InputError("--audit-bound must be positive")


def _parse_subst(items: Sequence[str]) -> dict[int, int]:
    out: dict[int, int] = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or not key.strip().isdigit() or not val.strip().isdigit():
            raise InputError(f"--subst expects i=NAT, got {item!r}")
        out[int(key)] = int(val)
    return out


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load(cfg: RunConfig):
    grammar = None
    if cfg.grammar:
        grammar = parse_grammar(_read(cfg.grammar), cfg.primitives)
    try:
        prog = parse_program(
            _read(cfg.input), grammar, primitives=cfg.primitives, strict_alpha=cfg.strict_alpha
        )
    except SyntaxError_ as exc:
        if not cfg.primitives and "primitive" in str(exc):
            raise InputError(f"{exc} (pass --primitives)") from None
        raise
    if cfg.subst:
        prog = substitute_bullets(prog, cfg.subst)
    return prog


def _loop_json(lp: Loop) -> dict:
    return {"point": lp.point, "graph": lp.graph.to_json(), "path": list(lp.path), "text": lp.text()}


def _state_text(s: State, verbose: bool) -> str:
    if verbose:
        return repr(s)
    e = s.expr
    return str(e.label) if e.label else show(e)


def _value_text(v) -> str | None:
    return None if v is TIMEOUT else show(flatten(v))


# --------------------------------------------------------------------------
# Modes


def _analyze(cfg: RunConfig, prog, out: list[str]) -> dict:
    result = analyze(prog, cfg.unused_binder_arcs)
    clo = Closure(result)
    loops = self_loops(result, clo)
    verdict = decide(result, clo)
    out.append(HEADER)
    out += [lp.text() for lp in loops]
    cex = None
    if verdict.counterexample is not None:
        c = verdict.counterexample
        cex = Loop(c.src, c.graph, c.witness)
    if cfg.verbose:
        out.append("Evaluation facts:")
        out += [f"{f.subject} ⇓ {f.value}: {f.graph.text()}" for f in result.evals]
        if cex is not None:
            out.append(f"Counterexample: {cex.text()}")
    out.append(str(verdict))
    doc = {
        "mode": "analyze",
        "loops": [_loop_json(lp) for lp in loops],
        "edges": [e.to_json() for e in result.edges],
        "verdict": "Yes" if verdict.terminating else "No",
    }
    if cfg.verbose:
        doc["evals"] = [f.to_json() for f in result.evals]
    if cex is not None:
        doc["counterexample"] = _loop_json(cex)
    return doc


def _eval(cfg: RunConfig, prog, out: list[str]) -> dict:
    v = run_eval(initial_state(prog), cfg.fuel, prog.grammar)
    if v is TIMEOUT:
        out.append("TIMEOUT")
        return {"mode": "eval", "timeout": True, "value": None, "church": None}
    flat = flatten(v)
    n = church_value(flat)
    out.append(show(flat))
    if n is not None:
        out.append(f"church numeral {n}")
    return {"mode": "eval", "timeout": False, "value": show(flat), "church": n}


def _trace(cfg: RunConfig, prog, out: list[str]) -> dict:
    v, steps = eval_instrumented(
        initial_state(prog), cfg.fuel, prog.grammar, unused_binder_arcs=cfg.unused_binder_arcs
    )
    rows = []
    for st in steps:
        src, dst = _state_text(st.src, cfg.verbose), _state_text(st.dst, cfg.verbose)
        g: SizeChangeGraph = st.graph
        out.append(f"{src} -{st.kind}-> {dst} ; {g.text()}")
        rows.append({"src": src, "kind": st.kind, "dst": dst, "graph": g.to_json()})
    out.append("TIMEOUT" if v is TIMEOUT else f"value {_value_text(v)}")
    return {"mode": "trace", "timeout": v is TIMEOUT, "value": _value_text(v), "steps": rows}


def _audit(cfg: RunConfig, prog, out: list[str]) -> dict:
    result = analyze(prog, cfg.unused_binder_arcs)
    rep = bounded_multipath_audit(result, cfg.audit_bound)
    out += rep.lines()
    if not rep.agrees:
        raise InvariantBreach("bounded audit disagrees with the closure decision")
    return {
        "mode": "audit",
        "bound": rep.bound,
        "cycles": rep.cycles,
        "failing": [_loop_json(lp) for lp in rep.failing],
        "missing": [_loop_json(lp) for lp in rep.missing],
        "verdict": "Yes" if rep.verdict.terminating else "No",
        "conclusive": rep.conclusive,
        "agrees": rep.agrees,
    }


_RUNNERS = {"analyze": _analyze, "eval": _eval, "trace": _trace, "audit": _audit}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Execute one configuration; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    out: list[str] = []
    doc = None
    status = 0
    try:
        cfg.validate()
        prog = _load(cfg)
        doc = _RUNNERS[cfg.mode](cfg, prog, out)
    except (InputError, SyntaxError_, GrammarError, AnalysisError, EvalError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except InvariantBreach as exc:
        print(f"internal error: {exc}", file=stderr)
        status = 2
    except RecursionError:
        print("error: input nests too deeply", file=stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=stderr)
        return 2
    if cfg.format == "json":
        if doc is not None:
            json.dump(doc, stdout, ensure_ascii=False, sort_keys=True)
            stdout.write("\n")
    else:
        for line in out:
            stdout.write(line + "\n")
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lamsct",
        description="Size-change termination analysis for call-by-value λ-programs.",
    )
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("input", help="program file, or - for standard input")
    ap.add_argument("--grammar", metavar="FILE", help="grammar productions for nonterminals")
    ap.add_argument("--fuel", type=int, default=100_000, help="evaluation step budget (default 100000)")
    ap.add_argument("--format", choices=("text", "json"), default="text")
    ap.add_argument("--strict-alpha", action="store_true", help="reject reused binder names")
    ap.add_argument("--subst", action="append", default=[], metavar="i=NAT",
                    help="value for the i-th • (1-based); repeatable")
    ap.add_argument("--verbose", action="store_true", help="include evaluation facts / full states")
    ap.add_argument("--audit-bound", type=int, default=6, metavar="N")
    ap.add_argument("--primitives", action="store_true",
                    help="enable numerals plus the pred/succ/ztst/if primitives")
    ap.add_argument("--unused-binder-arcs", action="store_true",
                    help="keep operator-to-body descent arcs when the binder is unused")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        subst = _parse_subst(args.subst)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    cfg = RunConfig(
        mode=args.mode, input=args.input, grammar=args.grammar, fuel=args.fuel,
        strict_alpha=args.strict_alpha, format=args.format, subst=subst,
        verbose=args.verbose, audit_bound=args.audit_bound, primitives=args.primitives,
        unused_binder_arcs=args.unused_binder_arcs,
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
