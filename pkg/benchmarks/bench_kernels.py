#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the pure-numpy fallback.

Times the three hot kernels (sparse L1 scoring, similarity alignment,
assignment solving) on workloads shaped like the detection pipeline's, plus
one end-to-end detection pass on a small simulated loop under each backend.

Run:  python3 benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np

from semloop import _kernels_py

try:
    from semloop import _kernels
except ImportError:
    _kernels = None


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_l1(mod, rng):
    rows = []
    for _ in range(400):
        ids = np.unique(rng.integers(0, 4000, size=60)).astype(np.int64)
        rows.append((ids, rng.uniform(0.1, 3.0, len(ids))))
    offsets = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([len(i) for i, _ in rows], out=offsets[1:])
    ids_cat = np.concatenate([i for i, _ in rows])
    w_cat = np.concatenate([w for _, w in rows])
    iq, wq = rows[0]

    def run():
        for _ in range(100):
            mod.l1_scores_many(iq, wq, ids_cat, w_cat, offsets)

    return timeit(run)


def bench_horn(mod, rng):
    problems = [(rng.normal(size=(12, 3)), rng.normal(size=(12, 3))) for _ in range(2000)]

    def run():
        for src, dst in problems:
            mod.horn_alignment(src, dst)

    return timeit(run)


def bench_assignment(mod, rng):
    problems = [rng.uniform(0, 1, (12, 12)) for _ in range(500)]

    def run():
        for m in problems:
            mod.solve_assignment(m)

    return timeit(run)


def bench_end_to_end(pure_python):
    code = (
        "import time\n"
        "from semloop.simulator import single_loop_fixture\n"
        "from semloop.detection import DetectionParams\n"
        "from semloop.evaluation import run_detection\n"
        "records, _ = single_loop_fixture(seed=0, keyframe_count=200)\n"
        "t0 = time.perf_counter()\n"
        "result = run_detection(records, DetectionParams(), seed=0)\n"
        "print(time.perf_counter() - t0, len(result.reports))\n"
    )
    env = dict(os.environ)
    env["SEMLOOP_PURE_PYTHON"] = "1" if pure_python else "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    seconds, n_reports = out.stdout.split()
    return float(seconds), int(n_reports)


def main():
    rng = np.random.default_rng(0)
    backends = [("python", _kernels_py)]
    if _kernels is not None:
        backends.insert(0, ("compiled", _kernels))
    else:
        print("compiled extension unavailable; timing the fallback only\n")

    results = {}
    for name, mod in backends:
        results[name] = {
            "l1 scoring (100x400 rows)": bench_l1(mod, rng),
            "alignment (2000x12 pts)": bench_horn(mod, rng),
            "assignment (500x12x12)": bench_assignment(mod, rng),
        }

    width = max(len(k) for k in next(iter(results.values())))
    header = f"{'kernel':<{width}}" + "".join(f"{n:>12}" for n, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for key in next(iter(results.values())):
        line = f"{key:<{width}}"
        for name, _ in backends:
            line += f"{results[name][key] * 1e3:>10.1f}ms"
        if len(backends) == 2:
            line += f"{results['python'][key] / results['compiled'][key]:>9.1f}x"
        print(line)

    print("\nend-to-end detection (200 keyframes):")
    t_c, n_c = bench_end_to_end(pure_python=False)
    t_p, n_p = bench_end_to_end(pure_python=True)
    assert n_c == n_p, "backends disagree on detections"
    print(f"  compiled backend: {t_c:6.2f}s   ({n_c} loops)")
    print(f"  python backend:   {t_p:6.2f}s   ({n_p} loops)")
    print(f"  speedup:          {t_p / t_c:6.1f}x")


if __name__ == "__main__":
    main()
