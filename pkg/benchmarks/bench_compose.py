"""Compare the numba and numpy composition kernels.

    python3 benchmarks/bench_compose.py [--repeat N]

Part one times raw batch composition on random int8 graph matrices.  Part
two times the full closure and decision on the bundled example programs
with each backend switched in turn.
"""
from __future__ import annotations

import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

from lamsct import kernels
from lamsct.abstract import analyze
from lamsct.sct import decide
from lamsct.syntax import parse_program

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
PROGRAMS = {"add_pow2": False, "ackermann_church": False, "min_y": True, "ackermann_y": True}


def random_batch(rng, n, k, density=0.3):
    def one(shape):
        m = rng.integers(1, 3, size=shape, dtype=np.int8)
        return np.where(rng.random(shape) < density, m, 0).astype(np.int8)

    return one((n, n)), one((k, n, n))


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_raw(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n, k in [(4, 64), (8, 256), (16, 256), (32, 512)]:
        a, bs = random_batch(rng, n, k)
        want = kernels.compose_batch_numpy(a, bs)
        kernels.compose_batch_numba(a, bs)  # compile / load cache
        assert np.array_equal(want, kernels.compose_batch_numba(a, bs))
        t_np = best(lambda: kernels.compose_batch_numpy(a, bs), repeat)
        t_nb = best(lambda: kernels.compose_batch_numba(a, bs), repeat)
        rows.append((f"n={n:<3d} k={k:<4d}", t_np, t_nb))
    return rows


def bench_closure(repeat):
    rows = []
    for name, prims in PROGRAMS.items():
        text = (FIXTURES / f"{name}.lam").read_text(encoding="utf-8")
        result = analyze(parse_program(text, primitives=prims))
        times = {}
        for backend in ("numpy", "numba"):
            kernels.BACKEND = backend
            decide(result)
            times[backend] = best(lambda: decide(result), repeat)
        rows.append((name, times["numpy"], times["numba"]))
    kernels.BACKEND = "numba"
    return rows


def table(title, rows):
    print(title)
    print(f"  {'case':<20s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for case, t_np, t_nb in rows:
        print(f"  {case:<20s} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:8.1f}x")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels.compose_batch_numba is None:
        print("numba backend unavailable (LAMSCT_DISABLE_NUMBA set or numba missing)")
        return 1
    table("batch composition", bench_raw(args.repeat))
    print()
    table("closure + decision", bench_closure(args.repeat))
    return 0


if __name__ == "__main__":
    sys.exit(main())
