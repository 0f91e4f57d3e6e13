"""Time the numba and pure-numpy kernel paths against each other.

Path selection happens at import time, so each path runs in its own
subprocess with SCREENMATCH_NUMBA set accordingly. Usage:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _time(fn, repeats):
    fn()  # warm up: triggers JIT compilation on the numba path
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def worker(repeats):
    import numpy as np

    from screenmatch import kernels
    from screenmatch.featurize import NUM_REL_BUCKETS

    rng = np.random.default_rng(0)
    rows = []
    for n in (8, 32, 128):
        cost = rng.uniform(-1.0, 1.0, size=(n, n))
        rows.append((f"lap_min_cost {n}x{n}",
                     _time(lambda: kernels.lap_min_cost(cost), repeats)))
    for t in (16, 64, 256):
        tx = rng.normal(size=(4, NUM_REL_BUCKETS))
        ty = rng.normal(size=(4, NUM_REL_BUCKETS))
        bx = rng.integers(0, NUM_REL_BUCKETS, size=(t, t))
        by = rng.integers(0, NUM_REL_BUCKETS, size=(t, t))
        grad = rng.normal(size=(4, t, t))
        rows.append((f"rel_bias_forward T={t}",
                     _time(lambda: kernels.rel_bias_forward(tx, ty, bx, by),
                           repeats)))
        rows.append((f"rel_bias_backward T={t}",
                     _time(lambda: kernels.rel_bias_backward(
                         grad, bx, by, NUM_REL_BUCKETS), repeats)))
    print(json.dumps({"numba": kernels.NUMBA_ENABLED, "rows": rows}))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeats)
        return

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, SCREENMATCH_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, __file__, "--worker",
             "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True, check=True)
        doc = json.loads(out.stdout)
        key = "numba" if doc["numba"] else "numpy"
        results[key] = dict(doc["rows"])

    if "numba" not in results:
        print("numba unavailable; numpy fallback timings only")
        for name, secs in results["numpy"].items():
            print(f"{name:28s} {secs * 1e6:10.1f} us")
        return

    print(f"{'kernel':28s} {'numba':>12s} {'numpy':>12s} {'speedup':>9s}")
    for name in results["numba"]:
        jit, ref = results["numba"][name], results["numpy"][name]
        print(f"{name:28s} {jit * 1e6:10.1f} us {ref * 1e6:10.1f} us "
              f"{ref / jit:8.1f}x")


if __name__ == "__main__":
    main()
