"""Time the compiled kernels against the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat N] [--json FILE]``.
Each case is run on every importable backend; results are checked to agree
before timings are reported.
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from blab import kernels
from blab.grid import Grid
from blab.weights import holder_offsets


def holder_case(d: int, n: int, radius: float):
    rng = np.random.default_rng(d * 1000 + n)
    g = Grid(d, 8.0, n)
    args = (rng.normal(size=(d, g.n**d)), rng.uniform(0.5, 2.0, g.n**d),
            np.asarray(holder_offsets(g, radius), dtype=np.int64), d, g.n, g.h, 0.4, True)
    return f"holder d={d} n={n} r={radius:g} ({len(args[2])} offsets)", "holder_shell_max", args


def riccati_case(trials: int):
    rng = np.random.default_rng(trials)
    args = (rng.uniform(0.1, 5, trials), rng.uniform(0.1, 3, trials), rng.uniform(0.0, 50.0, trials),
            rng.normal(0, 3, (trials, 32)), rng.uniform(0.1, 2, trials), 8, 2, 0.02)
    return f"riccati {trials} instances", "riccati_integrate", args


CASES = [holder_case(1, 512, 1.0), holder_case(2, 64, 0.5), holder_case(3, 16, 1.0),
         riccati_case(1000), riccati_case(10_000)]


def run(repeat: int = 3) -> list[dict]:
    backends = kernels.backends()
    rows = []
    for label, name, args in CASES:
        outs, times = {}, {}
        for key, mod in backends.items():
            fn = getattr(mod, name)
            outs[key] = fn(*args)
            times[key] = min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))
        ref = outs["python"]
        agree = all(np.allclose(o, ref, rtol=1e-9, atol=1e-12) for o in outs.values())
        row = {"case": label, "agree": agree, **{f"{k}_s": v for k, v in times.items()}}
        if "cython" in times:
            row["speedup"] = times["python"] / times["cython"]
        rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None, help="also write the rows to this file")
    args = ap.parse_args(argv)
    rows = run(args.repeat)
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(kernels.backends())}")
    print(f"{'case':44s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}  agree")
    for r in rows:
        cy = f"{r['cython_s']:11.4f}" if "cython_s" in r else f"{'-':>11s}"
        sp = f"{r['speedup']:8.1f}" if "speedup" in r else f"{'-':>8s}"
        print(f"{r['case']:44s} {r['python_s']:11.4f} {cy} {sp}  {r['agree']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
