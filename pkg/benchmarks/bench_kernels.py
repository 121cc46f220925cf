"""Timing comparison of the compiled and numpy kernel backends.

Run: python3 benchmarks/bench_kernels.py [--sizes 20,40,80] [--dim 64]
"""

import argparse
import time

import numpy as np

from gridaste import kernels
from gridaste.kernels import reference


def _time(fn, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="20,40,80")
    ap.add_argument("--dim", type=int, default=64)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = [("reference", reference)]
    if kernels.HAS_NATIVE:
        from gridaste.kernels import _native

        backends.append(("native", _native))
    else:
        print("compiled extension unavailable; timing reference only")

    rng = np.random.default_rng(0)
    header = f"{'kernel':24} {'n':>4} " + " ".join(f"{name:>12}" for name, _ in backends)
    print(header)
    print("-" * len(header))
    for n in sizes:
        h = np.ascontiguousarray(rng.uniform(-1, 1, size=(n, args.dim)))
        g = np.ascontiguousarray(rng.uniform(-1, 1, size=(n, n, args.dim)))
        wh = np.ascontiguousarray(rng.uniform(0, 1, size=n))
        wv = np.ascontiguousarray(rng.uniform(0, 1, size=n))
        gout = np.ascontiguousarray(rng.normal(size=(n, n, args.dim)))
        arg = backends[0][1].span_pool_forward(h)[1]

        rows = [
            ("span_pool_forward", lambda impl: impl.span_pool_forward(h)),
            ("span_pool_backward", lambda impl: impl.span_pool_backward(arg, gout, n)),
            ("neighbor_agg_forward", lambda impl: impl.neighbor_agg_forward(g, wh, wv)),
            ("neighbor_agg_backward", lambda impl: impl.neighbor_agg_backward(g, wh, wv, gout)),
        ]
        for label, call in rows:
            cells = " ".join(
                f"{_time(lambda impl=impl: call(impl)) * 1e3:>10.3f}ms" for _, impl in backends
            )
            print(f"{label:24} {n:>4} {cells}")
    print()
    print(f"selected backend at import: {kernels.backend()}")


if __name__ == "__main__":
    main()
