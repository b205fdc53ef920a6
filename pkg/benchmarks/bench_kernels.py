"""Compiled vs pure-Python kernels.

Runs each hot kernel with both backends on the same inputs, checks that the
results agree and prints the timings.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""
import argparse
import math
import time

import numpy as np

from expanderlab import _pykernels

try:
    from expanderlab import _core
except ImportError:  # extension not built
    _core = None


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def case_integrate(mod, a, r_end):
    # triple-junction profile from the junction out to r_end
    return mod.integrate(0, 2.0, 0.0, a, math.sqrt(3.0) / 3.0, 0.0, r_end, 1e-10,
                         1e-3 * min(1.0, a), 1e-8 * a, 1e8, 20_000_000)


def case_flow(mod, steps, cells):
    rho = np.linspace(0.0, 8.0, cells + 1)
    v = np.ascontiguousarray(np.sqrt(0.5 + 9.0 * rho * rho))
    dt = 0.4 * (rho[1] - rho[0]) ** 2
    for _ in range(steps):
        v = np.asarray(mod.flow_step(v, rho, dt, 2.0, 1, float(v[-1])))
    return v


def case_sturm(mod, size, probes):
    d = np.ascontiguousarray(2.0 + np.linspace(0.0, 1.0, size))
    e2 = np.ascontiguousarray(np.full(size - 1, 1.0))
    return [mod.sturm_count(d, e2, s) for s in np.linspace(0.0, 5.0, probes)]


def case_thomas(mod, size, solves):
    lower = np.ascontiguousarray(np.full(size, -1.0))
    diag = np.ascontiguousarray(np.full(size, 2.5))
    upper = np.ascontiguousarray(np.full(size, -1.0))
    rhs = np.ascontiguousarray(np.linspace(0.0, 1.0, size))
    x = None
    for _ in range(solves):
        x = mod.thomas(lower, diag, upper, rhs)
    return np.asarray(x)


def agreement(a, b):
    if isinstance(a, tuple):
        return max(float(np.max(np.abs(np.asarray(x) - np.asarray(y))))
                   for x, y in zip(a[:6], b[:6]))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args(argv)
    if _core is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return 1
    scale = 0.25 if args.quick else 1.0
    cases = [
        ("integrate a=1 to r=16", lambda m: case_integrate(m, 1.0, 16.0)),
        ("integrate a=5 to r=32", lambda m: case_integrate(m, 5.0, 32.0 * scale)),
        ("flow_step 400 cells x 200", lambda m: case_flow(m, int(200 * scale), 400)),
        ("sturm_count 1600 x 200", lambda m: case_sturm(m, 1600, int(200 * scale))),
        ("thomas 1600 x 50", lambda m: case_thomas(m, 1600, int(50 * scale))),
    ]
    print(f"{'kernel':<28s} {'cython [s]':>12s} {'python [s]':>12s} {'speedup':>9s} {'max diff':>10s}")
    for name, fn in cases:
        tc, oc = best_of(lambda: fn(_core), args.repeat)
        tp, op = best_of(lambda: fn(_pykernels), 1 if not args.quick else args.repeat)
        print(f"{name:<28s} {tc:12.4f} {tp:12.4f} {tp / tc:9.1f} {agreement(oc, op):10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
