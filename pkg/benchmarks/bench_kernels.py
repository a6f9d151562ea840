"""Compare the compiled kernels with their pure-Python fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints per-kernel best-of-N wall time for both backends and the speedup.
Also checks that both backends return identical results on the inputs.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from avdse import _kernels_py

try:
    from avdse import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None


def cases(rng: np.random.Generator) -> dict[str, tuple]:
    n = 2000
    x, y = rng.random(n), rng.random(n)
    m = 200_000
    keys = np.sort(rng.integers(0, 64, size=m)).astype(np.int64)
    starts = (np.arange(m) % 2 == 0).astype(np.uint8)
    angles = rng.normal(0.0, 0.05, size=200_000)
    return {
        "pareto_mask (n=2000)": ("pareto_mask", (x, y)),
        "match_fifo (m=200k)": ("match_fifo", (keys, starts)),
        "count_sign_reversals (200k)": ("count_sign_reversals", (angles, 0.01)),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _compiled is None:
        print("compiled extension not built; only the Python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s}")
    for label, (fn, fargs) in cases(rng).items():
        py = getattr(_kernels_py, fn)
        t_py = min(timeit.repeat(lambda: py(*fargs), number=1, repeat=args.repeat)) * 1e3
        if _compiled is None:
            print(f"{label:32s} {t_py:12.2f} {'-':>14s} {'-':>8s}")
            continue
        cc = getattr(_compiled, fn)
        if not _same(py(*fargs), cc(*fargs)):
            raise SystemExit(f"{fn}: backends disagree")
        t_cc = min(timeit.repeat(lambda: cc(*fargs), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:32s} {t_py:12.2f} {t_cc:14.2f} {t_py / t_cc:7.1f}x")


if __name__ == "__main__":
    main()
