"""Compiled kernels against their pure-Python / numpy fallbacks.

Run with numba installed and acceleration on (the default):

    python benchmarks/bench_kernels.py --repeat 5

Each row times the same work through both paths and checks that they
agree. The fallback is what runs when CHAZYLAB_NUMBA=0.
"""

import argparse
import time

import numpy as np

from chazylab import _kernels
from chazylab._accel import NUMBA_ENABLED, python_version
from chazylab.roots import roots_many, track_path


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_integrate(repeat, n):
    rng = np.random.default_rng(0)
    ics = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    params = np.array([0.125 + 0j])
    py = _kernels.python_stepper()

    def run(stepper, system):
        return [stepper(system, params, ic, -0.125, 0.125, 1e-10, 100000)[1][-1] for ic in ics]

    fast, a = best_of(lambda: run(_kernels.dopri5, _kernels.SYSTEM_CHAZY), repeat)
    slow, b = best_of(lambda: run(py, python_version(_kernels.chazy_rhs)), repeat)
    diff = max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))
    return f"dopri5 x{n}", fast, slow, diff


def bench_roots(repeat, n, degree):
    rng = np.random.default_rng(1)
    coeffs = rng.normal(size=(n, degree)) + 1j * rng.normal(size=(n, degree))
    fast, a = best_of(lambda: roots_many(coeffs, backend="numba"), repeat)
    slow, b = best_of(lambda: roots_many(coeffs, backend="numpy"), repeat)
    diff = float(np.max(np.abs(np.sort_complex(a) - np.sort_complex(b))))
    return f"roots deg {degree} x{n}", fast, slow, diff


def bench_track(repeat, n):
    xs = np.linspace(0.0, 1.0, n)
    t = xs[:, None]
    roots = np.stack([np.exp(1j * t[:, 0]), 2 + t[:, 0], -1 - 1j * t[:, 0]], axis=1)
    rates = np.stack([1j * np.exp(1j * t[:, 0]), np.ones(n), -1j * np.ones(n)], axis=1)
    slow_fn = python_version(_kernels.track_nearest)
    fast, a = best_of(lambda: track_path(roots, rates, xs, 0), repeat)
    slow, b = best_of(lambda: slow_fn(roots, rates.astype(complex), xs, 0, True), repeat)
    return f"track x{n}", fast, slow, float(np.max(np.abs(a[0] - b[0])))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=50, help="integrations per run")
    args = ap.parse_args(argv)
    if not NUMBA_ENABLED:
        print("numba acceleration is off; both columns time the fallback")

    # warm up compilation outside the timings
    bench_integrate(1, 1)
    bench_roots(1, 2, 3)
    bench_roots(1, 2, 4)
    bench_track(1, 4)

    rows = [bench_integrate(args.repeat, args.n),
            bench_roots(args.repeat, 20000, 3),
            bench_roots(args.repeat, 20000, 4),
            bench_track(args.repeat, 20000)]
    print(f"{'kernel':<22}{'numba [ms]':>12}{'fallback [ms]':>15}{'speedup':>10}{'max diff':>12}")
    for name, fast, slow, diff in rows:
        print(f"{name:<22}{fast * 1e3:>12.2f}{slow * 1e3:>15.2f}{slow / fast:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
