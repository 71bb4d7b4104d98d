"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each case runs both backends on identical inputs, checks that the outputs
agree, and reports the best-of-``repeat`` wall time.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from bosegibbs import _pykernels as py

try:
    from bosegibbs import _ckernels as cy
except ImportError:
    cy = None


def cases():
    rng = np.random.default_rng(0)
    B3 = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    B2 = rng.normal(size=(2, 2))
    s3 = py.grade_states(3, 24)
    s2 = py.grade_states(2, 600)
    return [
        ("grade_states V=3 n=40", "grade_states", (3, 40)),
        ("rank_states V=3 n=24", "rank_states", (s3, 24)),
        ("second_quantize_block V=3 n=24", "second_quantize_block", (s3, 24, B3)),
        ("second_quantize_block V=2 n=600", "second_quantize_block", (s2, 600, B2)),
        ("lowering_map V=2 n=600", "lowering_map", (s2, 600, 0)),
        ("laguerre_diagonal n=2^20", "laguerre_diagonal", (0.05, 1 << 20)),
        ("displacement_matrix n=400", "displacement_matrix", (0.3 + 0.1j, 400)),
    ]


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def run(repeat: int) -> list[dict]:
    rows = []
    for label, name, args in cases():
        t_py = min(timeit.repeat(lambda: getattr(py, name)(*args), number=1, repeat=repeat))
        row = {"case": label, "python_s": t_py, "cython_s": None, "speedup": None, "agree": None}
        if cy is not None:
            t_cy = min(timeit.repeat(lambda: getattr(cy, name)(*args), number=1, repeat=repeat))
            row.update(cython_s=t_cy, speedup=t_py / t_cy, agree=_same(getattr(py, name)(*args), getattr(cy, name)(*args)))
        rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the table as JSON")
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not available; timing the fallback only", file=sys.stderr)
    rows = run(args.repeat)
    print(f"{'case':36s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}  agree")
    for r in rows:
        c = "-" if r["cython_s"] is None else f"{1e3 * r['cython_s']:12.3f}"
        s = "-" if r["speedup"] is None else f"{r['speedup']:8.1f}"
        print(f"{r['case']:36s} {1e3 * r['python_s']:12.3f} {c:>12s} {s:>8s}  {r['agree']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["agree"] in (True, None) for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
