"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--sizes 100,1000,10000] [--repeat 20]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from gspmec import _kernels_py

try:
    from gspmec import _kernels as _compiled
except ImportError:
    _compiled = None


def inputs(r: int, rng: np.random.Generator):
    theta = np.sort(rng.uniform(0.5, 3.0, r))[::-1].copy()
    bids = rng.uniform(0.035, 0.04, r)
    lam = np.sort(rng.uniform(0.05, 0.2, r))[::-1].copy()
    prices = rng.uniform(0.035, 0.04, r)
    vals = rng.uniform(0.03, 0.035, r)
    starts = rng.integers(0, r, r).astype(np.int64)
    return theta, bids, lam, prices, vals, starts


def bench(impl, r: int, repeat: int, rng) -> dict[str, float]:
    theta, bids, lam, prices, vals, starts = inputs(r, rng)
    cases = {
        "adjustment_rates": lambda: impl.adjustment_rates(theta),
        "gsp_prices": lambda: impl.gsp_prices(theta, bids, r, 1e-3, True),
        "best_slots": lambda: impl.best_slots(lam, prices, vals, starts, 1e-9, 1e-5),
    }
    return {k: min(timeit.repeat(f, number=1, repeat=repeat)) for k, f in cases.items()}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,1000,5000")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled else [])
    if _compiled is None:
        print("compiled extension not built; timing the Python backend only")
    print(f"{'kernel':<18}{'R':>7}" + "".join(f"{name:>14}" for name, _ in backends) + (f"{'speedup':>10}" if _compiled else ""))
    for r in (int(x) for x in args.sizes.split(",")):
        results = [bench(impl, r, args.repeat, np.random.default_rng(r)) for _, impl in backends]
        for k in results[0]:
            row = f"{k:<18}{r:>7}" + "".join(f"{res[k] * 1e3:>12.3f}ms" for res in results)
            if _compiled:
                row += f"{results[0][k] / results[1][k]:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
