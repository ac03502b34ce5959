"""Compiled kernels against the NumPy reference code.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is checked for identical output before it is timed.  ``face_tv``
has no compiled version: NumPy's vectorized int8 differences were 2-3x faster
than the loop we tried.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from martensite import _kernels_py

try:
    from martensite import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    g = np.cumsum(rng.normal(size=400)) * 1e-2
    v = rng.normal(size=20000)
    chi2 = (rng.random((513, 512)) < 0.5).astype(np.int8)
    return [
        ("aa_epsilon", "m=400", lambda m: m.aa_epsilon(g)),
        ("window_oscillation", "n=20000, k=50", lambda m: m.window_oscillation(v, 50)),
        ("face_jumps_2d", "513x512", lambda m: m.face_jumps_2d(chi2)),
    ]


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def best_of(fn, repeat):
    t = timeit.Timer(fn)
    number, _ = t.autorange()
    return min(t.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `python3 setup.py build_ext --inplace`", file=sys.stderr)
        return 1
    rows = []
    print(f"{'kernel':20s} {'size':16s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for name, size, call in cases(np.random.default_rng(args.seed)):
        if not _same(call(_kernels_py), call(_kernels)):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        tp = best_of(lambda: call(_kernels_py), args.repeat)
        tc = best_of(lambda: call(_kernels), args.repeat)
        rows.append({"kernel": name, "size": size, "python_s": tp, "cython_s": tc, "speedup": tp / tc})
        print(f"{name:20s} {size:16s} {tp:12.3e} {tc:12.3e} {tp / tc:8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
