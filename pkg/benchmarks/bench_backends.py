#!/usr/bin/env python3
"""Benchmark the compiled mixture kernels against the numpy fallback.

Times the three kernel entry points directly from both implementations,
then times a full robust-sampler chain per backend in subprocesses (the
backend is fixed at import time, so the end-to-end comparison needs a
fresh interpreter per backend).

Usage: python benchmarks/bench_backends.py
"""

import os
import subprocess
import sys
import timeit

import numpy as np

import gmmflow._kernels_py as kpy

try:
    import gmmflow._kernels as kcy
except ImportError:
    kcy = None

CHAIN_SNIPPET = """
import os, timeit
import numpy as np
import gmmflow as gf

gmm = gf.GaussianMixture(means=[[-4.0, 0.0], [4.0, 0.0]], weights=[0.5, 0.5], base_scale=1.0)
oracle = gf.oracle_from_gmm(gmm)
sched = gf.make_schedule(40, 0.002, 80.0)
cfg = gf.SamplerConfig(method="rods_cas", epsilon=1.0, rho=0.6, window=(0.1, 0.6))
x0 = gf.draw_chain_inits(2, sched.times[0], 1, 0)[0]
gf.rods_sample(oracle, sched, cfg, x0)  # warm up
n = 50
dt = timeit.timeit(lambda: gf.rods_sample(oracle, sched, cfg, x0), number=n) / n
print(f"{gf.backend_name()} {dt * 1e3:.3f}")
"""


def bench_kernels():
    rng = np.random.default_rng(0)
    means = np.ascontiguousarray(rng.normal(size=(3, 4)) * 3.0)
    log_w = np.log(np.full(3, 1.0 / 3.0))
    x = np.ascontiguousarray(rng.normal(size=4))
    w = np.ascontiguousarray(rng.normal(size=4))
    xs = np.ascontiguousarray(rng.normal(size=(10_000, 4)))
    var = 1.7

    cases = [
        ("mixture_eval (1 point)", lambda mod: mod.mixture_eval(means, log_w, var, x), 20_000),
        ("mixture_score_vjp", lambda mod: mod.mixture_score_vjp(means, log_w, var, x, w), 20_000),
        ("mixture_logpdf_batch (10k)", lambda mod: mod.mixture_logpdf_batch(means, log_w, var, xs), 50),
    ]
    print(f"{'kernel':<28} {'numpy':>12} {'cython':>12} {'speedup':>9}")
    for name, call, number in cases:
        t_py = timeit.timeit(lambda: call(kpy), number=number) / number
        if kcy is None:
            print(f"{name:<28} {t_py * 1e6:>10.2f}us {'n/a':>12} {'n/a':>9}")
            continue
        t_cy = timeit.timeit(lambda: call(kcy), number=number) / number
        print(
            f"{name:<28} {t_py * 1e6:>10.2f}us {t_cy * 1e6:>10.2f}us "
            f"{t_py / t_cy:>8.1f}x"
        )


def bench_chain():
    print(f"\n{'full rods chain (40 steps)':<28} {'ms/chain':>12}")
    results = {}
    for backend in ("python", "cython"):
        if backend == "cython" and kcy is None:
            continue
        env = dict(os.environ, GMMFLOW_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", CHAIN_SNIPPET], env=env, capture_output=True, text=True
        )
        if out.returncode != 0:
            print(f"  {backend}: failed\n{out.stderr}")
            continue
        name, ms = out.stdout.split()
        results[name] = float(ms)
        print(f"{name:<28} {ms:>10}ms")
    if len(results) == 2:
        print(f"{'chain speedup':<28} {results['python'] / results['cython']:>11.1f}x")


if __name__ == "__main__":
    bench_kernels()
    bench_chain()
