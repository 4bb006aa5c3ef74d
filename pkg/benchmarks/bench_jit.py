"""Compare the numba kernels with the numpy fallbacks.

    python benchmarks/bench_jit.py [--paths 2000] [--points 200]

Both backends run in this process; the fallback is selected by setting
SYMCOCYCLE_DISABLE_JIT for the second timing.  The first numba call is
timed separately so compile cost does not hide in the steady-state number.
"""
import argparse
import os
import time

import numpy as np

from symcocycle._jit import DISABLE_ENV, jit_available
from symcocycle.kick import flow_batch, make_kick_hamiltonian
from symcocycle.walk import StepSource, WalkConfig, simulate_walk


def timed(fn, repeat=3):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def with_backend(jit, fn):
    old = os.environ.get(DISABLE_ENV)
    os.environ[DISABLE_ENV] = "0" if jit else "1"
    try:
        return fn()
    finally:
        if old is None:
            os.environ.pop(DISABLE_ENV, None)
        else:
            os.environ[DISABLE_ENV] = old


def bench_walk(paths, m_max):
    cfg = WalkConfig(StepSource.uniform(0.01), 0.4, 0.5, m_max=m_max, paths=paths, seed=1)
    run = lambda: simulate_walk(cfg)  # noqa: E731
    t0 = time.perf_counter()
    with_backend(True, run)
    first = time.perf_counter() - t0
    t_jit, a = with_backend(True, lambda: timed(run))
    t_np, b = with_backend(False, lambda: timed(run, repeat=1))
    assert np.array_equal(a.absorbed_at, b.absorbed_at)
    steps = paths * m_max
    print(f"walk  {paths} paths x {m_max} steps: numba {t_jit:.3f} s (first call {first:.2f} s), "
          f"numpy {t_np:.3f} s, speedup {t_np / t_jit:.1f}x, "
          f"{steps / t_jit / 1e6:.1f} vs {steps / t_np / 1e6:.2f} M path-steps/s")


def bench_kick(points):
    H = make_kick_hamiltonian(delta=1.0, seed=1)
    X = H.sample_support(points, np.random.default_rng(0))
    run = lambda: flow_batch(H, 1.0, X, tol=1e-10)  # noqa: E731
    t0 = time.perf_counter()
    with_backend(True, run)
    first = time.perf_counter() - t0
    t_jit, a = with_backend(True, lambda: timed(run))
    t_np, b = with_backend(False, lambda: timed(run, repeat=1))
    err = np.abs(a[0] - b[0]).max()
    print(f"kick  {points} points: numba {t_jit:.3f} s ({1e3 * t_jit / points:.2f} ms/pt, first call {first:.2f} s), "
          f"numpy {t_np:.3f} s ({1e3 * t_np / points:.2f} ms/pt), speedup {t_np / t_jit:.1f}x, "
          f"max endpoint difference {err:.1e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--m-max", type=int, default=4096)
    ap.add_argument("--points", type=int, default=200)
    args = ap.parse_args()
    if not jit_available():
        raise SystemExit("numba is not installed; nothing to compare")
    bench_walk(args.paths, args.m_max)
    bench_kick(args.points)


if __name__ == "__main__":
    main()
