#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the truncated forward pass and the fused loss/gradient on MLP shapes
matching the benchmark configurations, plus one full training step.  Run:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

import scorelab._kernels_py as numpy_kernels

try:
    import scorelab._kernels as cython_kernels
except ImportError:
    cython_kernels = None


def make_case(batch, din, dout, width, depth, seed=0):
    rng = np.random.default_rng(seed)
    dims = [din] + [width] * depth + [dout]
    As = [rng.standard_normal((o, i)) * np.sqrt(2.0 / i) for i, o in zip(dims[:-1], dims[1:])]
    bs = [np.zeros(o) for o in dims[1:]]
    xt = rng.standard_normal((batch, din))
    rho = np.full(batch, 25.0)
    target = rng.standard_normal((batch, dout))
    weights = np.ones(batch)
    return As, bs, xt, rho, target, weights


def bench(fn, *args, repeat=200):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat * 1e6  # us


def main():
    shapes = [
        (256, 2, 1, 32, 2),
        (256, 2, 1, 64, 2),
        (1024, 4, 3, 64, 3),
        (65536, 2, 1, 64, 2),
    ]
    backends = [("numpy", numpy_kernels)]
    if cython_kernels is not None:
        backends.append(("cython", cython_kernels))
    else:
        print("compiled extension not available; benchmarking the fallback only")

    header = f"{'shape (batch,din,dout,W,L)':>32} {'op':>10}"
    for name, _ in backends:
        header += f" {name + ' us':>12}"
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for shape in shapes:
        As, bs, xt, rho, target, weights = make_case(*shape)
        repeat = 20 if shape[0] >= 65536 else 200
        for op, args in (
            ("forward", (As, bs, xt, rho)),
            ("loss_grad", (As, bs, xt, rho, target, weights)),
        ):
            times = [bench(getattr(mod, op), *args, repeat=repeat) for _, mod in backends]
            row = f"{str(shape):>32} {op:>10}"
            for t in times:
                row += f" {t:>12.1f}"
            if len(times) == 2:
                row += f" {times[0] / times[1]:>8.2f}x"
            print(row)


if __name__ == "__main__":
    main()
