"""Time the numba and numpy versions of each hot kernel side by side.

    python3 benchmarks/bench_kernels.py [--size N] [--repeat R]

Also checks that both versions return identical results.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from movavg import _kernels as K


def _cases(n: int, rng: np.random.Generator) -> dict:
    lo = np.sort(rng.integers(-n, n, size=n))
    hi = lo + rng.integers(0, 50, size=n)
    grid = rng.random((256, max(n // 256, 2)))
    side = int(round(n ** 0.5))
    table = np.zeros((side + 1, side + 1))
    table[1:, 1:] = rng.random((side, side)).cumsum(0).cumsum(1)
    strides = np.array([side + 1, 1], dtype=np.int64)
    a = rng.integers(0, side // 2, size=(n, 2))
    b = a + rng.integers(1, side // 2, size=(n, 2))
    starts = np.sort(rng.random(64))
    ends = starts + 0.001
    pts = rng.random(n)
    pts2 = rng.random((n, 2))
    blo = rng.random((16, 2)) * 0.8
    bhi = blo + 0.1
    return {
        "union_count": ((lo, hi), "union_count"),
        "cumsum2": ((grid,), "cumsum2"),
        "sat_query": ((table.ravel(), strides, a, b), "sat_query"),
        "interval_member": ((pts, starts, ends), "interval_member"),
        "box_member": ((pts2, blo, bhi), "box_member"),
    }


def _same(x, y) -> bool:
    if isinstance(x, tuple):
        return all(_same(a, b) for a, b in zip(x, y))
    return bool(np.array_equal(np.asarray(x), np.asarray(y)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}  equal")
    for name, (call_args, base) in _cases(args.size, rng).items():
        f_np = getattr(K, base + "_numpy")
        f_nb = K.union_count_numba_wrapper if base == "union_count" else getattr(K, base + "_numba")
        ok = _same(f_np(*call_args), f_nb(*call_args))  # also compiles
        t_np = min(timeit.repeat(lambda: f_np(*call_args), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*call_args), number=1, repeat=args.repeat))
        print(f"{name:<16}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.2f}  {ok}")


if __name__ == "__main__":
    main()
