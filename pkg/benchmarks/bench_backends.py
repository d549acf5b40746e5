"""Timing comparison of the numba and pure-numpy numeric backends.

Two layers are measured:

* the row-wise hot loops themselves (kernel pair functions and built-in
  model batches), by importing both implementation modules side by side
  and timing identical calls on shared input blocks;
* one full single-cell pipeline (``run_independence_test``), executed in a
  subprocess per backend because the package wires a backend in at import
  time via the ``KBSENS_BACKEND`` environment variable.

Usage::

    python benchmarks/bench_backends.py [--rows N] [--cols D] [--repeats R]
    python benchmarks/bench_backends.py --skip-pipeline

Numba timings exclude JIT compilation: every op is run once to warm the
dispatcher before the clock starts.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from kbsens import _accel_numpy

try:
    from kbsens import _accel_numba
except ImportError:  # pragma: no cover - exercised only without numba
    _accel_numba = None


def make_blocks(rows: int, cols: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    A = np.ascontiguousarray(rng.standard_normal((rows, cols)))
    B = np.ascontiguousarray(rng.standard_normal((rows, cols)))
    w = np.full(cols, 1.0 / cols)
    U = np.ascontiguousarray(rng.random((rows, cols)))
    X2 = np.ascontiguousarray(rng.standard_normal((rows, 2)))
    coeffs = np.ascontiguousarray(np.linspace(0.0, 9.0, cols))
    return A, B, w, U, X2, coeffs


def build_ops(rows: int, cols: int):
    A, B, w, U, X2, coeffs = make_blocks(rows, cols)
    return [
        ("quadratic_pair", lambda impl: impl.quadratic_pair(A, B, w)),
        ("power_pair p=2", lambda impl: impl.power_pair(A, B, w, 2)),
        ("l1_product_pair", lambda impl: impl.l1_product_pair(A, B)),
        ("abs_quadratic_pair", lambda impl: impl.abs_quadratic_pair(A, B, w)),
        ("dot_pair", lambda impl: impl.dot_pair(A, B)),
        ("gaussian_pair", lambda impl: impl.gaussian_pair(A, B, 0.5)),
        ("laplacian_pair", lambda impl: impl.laplacian_pair(A, B, 0.5)),
        ("distance_pair", lambda impl: impl.distance_pair(A, B, 1.0)),
        ("g_function_values", lambda impl: impl.g_function_values(U, coeffs)),
        ("vector2_values", lambda impl: impl.vector2_values(X2, 2.0)),
    ]


def best_time(fn, repeats: int) -> float:
    fn()  # warmup: triggers JIT compilation on the numba path
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_hot_loops(rows: int, cols: int, repeats: int) -> None:
    ops = build_ops(rows, cols)
    print(f"hot loops: {rows} rows x {cols} cols, best of {repeats}")
    header = f"{'op':<22}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call in ops:
        t_np = best_time(lambda: call(_accel_numpy), repeats) * 1e3
        if _accel_numba is None:
            print(f"{name:<22}{t_np:>10.3f}{'n/a':>10}{'n/a':>9}")
            continue
        t_nb = best_time(lambda: call(_accel_numba), repeats) * 1e3
        ratio = t_np / t_nb if t_nb > 0 else float("inf")
        print(f"{name:<22}{t_np:>10.3f}{t_nb:>10.3f}{ratio:>8.2f}x")


PIPELINE_SNIPPET = """
import time
from kbsens import active_backend, run_independence_test
from kbsens.kernels import KernelSpec
from kbsens.models import GFunctionSpec

spec = GFunctionSpec()
model, inputs = spec.model(), spec.input_model()
kernel = KernelSpec("quadratic")
args = dict(q=0.5, m1=300, m=1000, seed=0)

run_independence_test(model, inputs, (0,), kernel, **args)  # warmup / JIT
t0 = time.perf_counter()
for _ in range(3):
    run_independence_test(model, inputs, (0,), kernel, **args)
elapsed = (time.perf_counter() - t0) / 3
print(f"{active_backend()}: {elapsed * 1e3:.1f} ms per cell")
"""


def bench_pipeline() -> None:
    print()
    print("single-cell pipeline (g-function, quadratic kernel, m1=300, m=1000,")
    print("mean of 3 runs after warmup), one subprocess per backend:")
    backends = ["numpy"] + (["numba"] if _accel_numba is not None else [])
    for backend in backends:
        env = dict(os.environ, KBSENS_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", PIPELINE_SNIPPET],
            env=env,
            capture_output=True,
            text=True,
        )
        if out.returncode != 0:
            print(f"  {backend}: FAILED\n{out.stderr}")
        else:
            print(f"  {out.stdout.strip()}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--cols", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--skip-pipeline", action="store_true")
    args = parser.parse_args(argv)

    if _accel_numba is None:
        print("numba backend unavailable; timing the numpy path only\n")
    bench_hot_loops(args.rows, args.cols, args.repeats)
    if not args.skip_pipeline:
        bench_pipeline()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
