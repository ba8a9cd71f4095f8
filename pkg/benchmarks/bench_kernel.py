"""Benchmark the simulation kernel: numba-jitted versus plain Python.

Both paths execute the same source, so outputs must match bit for bit; the
script verifies that while timing them.  Run as:

    python benchmarks/bench_kernel.py [requests_per_run]

Setting AOICACHE_PURE_PYTHON=1 would disable the jitted path entirely, in
which case both columns time the same plain function.
"""

import sys
import time

import numpy as np

import aoicache.accel
from aoicache import _kernels


def make_workload(n, items=10, seed=123):
    rng = np.random.default_rng(seed)
    arrivals = np.cumsum(rng.exponential(1.0 / 2000.0, n))
    item_index = rng.integers(0, items, n)
    fetch = rng.exponential(1e-4, n)
    delivery = rng.exponential(1e-4, n)
    windows = np.full(items, 0.05)
    return arrivals, item_index, fetch, delivery, windows


def run(kernel, workload):
    arrivals, item_index, fetch, delivery, windows = workload
    n = arrivals.shape[0]
    out = (
        np.empty(n),
        np.empty(n),
        np.zeros(n, np.bool_),
        np.empty(n),
        np.empty(n),
    )
    started = time.perf_counter()
    flag = kernel(arrivals, item_index, fetch, delivery, windows, 0, 10**7, *out)
    elapsed = time.perf_counter() - started
    assert flag == -1
    return elapsed, out


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    workload = make_workload(n)
    print(f"requests per run: {n}")
    print(f"numba available and enabled: {aoicache.accel.USING_NUMBA}")

    if aoicache.accel.USING_NUMBA:
        run(_kernels.service_process, make_workload(1000))  # compile once
    jit_time, jit_out = run(_kernels.service_process, workload)
    py_time, py_out = run(_kernels.service_process_py, workload)

    for a, b in zip(jit_out, py_out):
        assert np.array_equal(a, b), "jitted and plain outputs differ"
    print("outputs bit-identical: yes")
    print(f"{'path':>14}  {'seconds':>10}  {'requests/s':>14}")
    print(f"{'accelerated':>14}  {jit_time:>10.4f}  {n / jit_time:>14.0f}")
    print(f"{'plain python':>14}  {py_time:>10.4f}  {n / py_time:>14.0f}")
    if jit_time < py_time:
        print(f"speedup: {py_time / jit_time:.1f}x")


if __name__ == "__main__":
    main()
