from __future__ import annotations

import sys
from functools import lru_cache
from pathlib import Path

import pytest

from lamsct.abstract import analyze
from lamsct.syntax import parse_program

FIXTURES = Path(__file__).parent / "fixtures"

# name -> needs the primitives extension
PROGRAMS = {
    "omega": False,
    "church_succ": False,
    "add_pow2": False,
    "ackermann_church": False,
    "min_y": True,
    "ackermann_y": True,
    "ackermann_y_shared": True,
    "typable_nonsct": False,
    "add_pow2_grammar": False,
    "twice_succ_2": False,
    "twice_twice_succ_2": False,
}

# programs that terminate under exact evaluation, with bullet values
TERMINATING = {
    "church_succ": {},
    "add_pow2": {},
    "ackermann_church": {},
    "min_y": {1: 3, 2: 5},
    "ackermann_y": {1: 2, 2: 3},
    "ackermann_y_shared": {1: 2, 2: 3},
    "typable_nonsct": {},
    "twice_succ_2": {},
    "twice_twice_succ_2": {},
}


def source(name: str) -> str:
    return (FIXTURES / f"{name}.lam").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load(name: str):
    return parse_program(source(name), primitives=PROGRAMS[name])


@lru_cache(maxsize=None)
def analysis(name: str):
    return analyze(load(name))


@pytest.fixture(params=sorted(PROGRAMS))
def program_name(request):
    return request.param


def numerals_chooser(values, outer="C"):
    """Chooser making the k-th expansion of ``outer`` the Church numeral values[k].

    Assumes the numeral grammar shape ``C ::= \\s.\\z.A ; A ::= z | s@A``.
    """
    queue = list(values)
    current = [0]

    def choose(name: str, depth: int) -> int:
        if name == outer:
            current[0] = queue.pop(0)
            return 0
        return -1 if depth < current[0] else 0

    return choose


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.line(n))
