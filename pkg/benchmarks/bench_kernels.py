"""Compare the compiled and pure-Python graph kernels.

Usage: python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 3]

Times max-flow on the Dodecahedron benchmark and s-t connectivity on the
same graph for ``n`` random edge states, and checks both backends agree.
"""
import argparse
import time

import numpy as np

from bicecm import _pykernels
from bicecm.networks import builtin

try:
    from bicecm import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = builtin("dodecahedron", p0=0.1)
    c = model._cache
    rng = np.random.default_rng(args.seed)
    caps = rng.choice([0.0, 100.0, 200.0], p=[0.1, 0.45, 0.45], size=(args.n, len(model.edges)))
    up = caps > 0
    cases = {
        "max_flow_batch": lambda mod: mod.max_flow_batch(
            len(model.nodes), c["tail"], c["head"], caps, c["s"], c["t"]),
        "connected_batch": lambda mod: mod.connected_batch(
            len(model.nodes), c["tail"], c["head"], up, c["s"], c["t"]),
    }
    print(f"{'kernel':<18}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}")
    for name, call in cases.items():
        t_py, out_py = best_of(lambda: call(_pykernels), args.repeat)
        if _kernels is None:
            print(f"{name:<18}{1e3 * t_py:>14.2f}{'n/a':>14}{'':>10}")
            continue
        t_cy, out_cy = best_of(lambda: call(_kernels), args.repeat)
        assert np.array_equal(out_py, out_cy), f"{name}: backends disagree"
        print(f"{name:<18}{1e3 * t_py:>14.2f}{1e3 * t_cy:>14.2f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
