"""Time the compiled flow kernels against the pure-Python fallback.

Run with ``python benchmarks/bench_flowkernel.py [--repeat N]``.
"""
import argparse
import timeit

import numpy as np

from warpgeo import _flowkernel_py as pure

try:
    from warpgeo import _flowkernel as compiled
except ImportError:
    compiled = None


def round_case(kernel):
    # the default CLI flow run: m = 0.5, r0 = 2, t in [0, 200], dt = 0.01
    return lambda: kernel.round_integrate(0.5, 2.0, 2.0, np.sqrt(0.75) / 2, 0.9, 0.01, 20000, 10)


def nodes_case(kernel, n=64, steps=200):
    r = np.linspace(2.0, 2.5, n)
    y0 = np.stack([r, 0.95 * r, 0.4 + 0 * r, 0.35 + 0 * r, r, r])

    def go():
        y = y0.copy()
        for _ in range(steps):
            kernel.nodes_rk4(0.5, y, 0.01)
    return go


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = {"python": pure}
    if compiled is not None:
        backends["cython"] = compiled
    else:
        print("compiled kernel not built; timing the fallback only")
    cases = {"round_integrate (20000 steps)": round_case, "nodes_rk4 (64 nodes x 200 steps)": nodes_case}
    for label, make in cases.items():
        times = {}
        for name, mod in backends.items():
            times[name] = min(timeit.repeat(make(mod), number=1, repeat=args.repeat))
        line = "  ".join(f"{k}={v * 1e3:9.2f} ms" for k, v in times.items())
        if len(times) == 2:
            line += f"  speedup={times['python'] / times['cython']:.1f}x"
        print(f"{label:36s} {line}")


if __name__ == "__main__":
    main()
