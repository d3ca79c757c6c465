"""Hot inner loops, in two interchangeable implementations.

Every kernel exists as ``<name>_numpy`` (vectorised numpy) and, when numba
imports, ``<name>_numba`` (``@njit``).  The public name is bound to the numba
version unless ``MOVAVG_DISABLE_NUMBA`` is set to a truthy value or numba is
missing.  Both versions perform the same floating point operations in the same
order, so they agree bitwise; ``benchmarks/bench_kernels.py`` times them.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("MOVAVG_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def set_threads(n: int | None) -> None:
    if n and USE_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


# --------------------------------------------------------------------------
# union of integer intervals


def union_count_numpy(lo: np.ndarray, hi: np.ndarray) -> int:
    """Number of integers in the union of [lo_i, hi_i]; lo must be sorted."""
    if lo.size == 0:
        return 0
    runmax = np.maximum.accumulate(hi)
    prev = np.empty_like(runmax)
    prev[0] = lo[0] - 1
    prev[1:] = runmax[:-1]
    start = np.maximum(lo, prev + 1)
    return int(np.maximum(hi - start + 1, 0).sum())


# --------------------------------------------------------------------------
# compensated prefix sums (TwoSum error-free transformation, Sum2-style)


def cumsum2_numpy(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Prefix sums along the last axis as an unevaluated pair ``hi + lo``."""
    hi = np.cumsum(x, axis=-1)
    a = np.zeros_like(hi)
    a[..., 1:] = hi[..., :-1]
    bb = hi - a
    err = (a - (hi - bb)) + (x - bb)
    lo = np.cumsum(err, axis=-1)
    return hi, lo


# --------------------------------------------------------------------------
# summed-area table queries


def _corner_table(d: int) -> np.ndarray:
    return np.array([[(c >> i) & 1 for i in range(d)] for c in range(1 << d)], dtype=np.int64)


def sat_query_numpy(flat: np.ndarray, strides: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Box sums from a zero-padded summed-area table stored flat.

    ``starts``/``ends`` are (B, d) half-open index ranges into the unpadded
    grid; ``strides`` are element strides of the padded table.
    """
    d = starts.shape[1]
    out = np.zeros(starts.shape[0], dtype=flat.dtype)
    for corner in _corner_table(d):
        idx = np.where(corner == 1, ends, starts) @ strides
        sign = -1 if (d - int(corner.sum())) % 2 else 1
        out = out + sign * flat[idx]
    return out


# --------------------------------------------------------------------------
# membership tests


def interval_member_numpy(points: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """points in a union of sorted disjoint half-open intervals [s, e)."""
    if starts.size == 0:
        return np.zeros(points.shape, dtype=bool)
    k = np.searchsorted(starts, points, side="right") - 1
    ok = k >= 0
    kk = np.where(ok, k, 0)
    return ok & (points < ends[kk])


def box_member_numpy(points: np.ndarray, lo: np.ndarray, hi: np.ndarray, chunk: int = 1 << 16) -> np.ndarray:
    """points (P, m) in a union of half-open boxes lo <= p < hi."""
    out = np.zeros(points.shape[0], dtype=bool)
    if lo.shape[0] == 0:
        return out
    for s in range(0, points.shape[0], chunk):
        p = points[s : s + chunk, None, :]
        inside = np.all((p >= lo[None]) & (p < hi[None]), axis=-1)
        out[s : s + chunk] = inside.any(axis=1)
    return out


# --------------------------------------------------------------------------
# numba twins

if HAVE_NUMBA:

    @njit(cache=True)
    def union_count_numba(lo, hi):
        n = lo.shape[0]
        if n == 0:
            return 0
        total = 0
        runmax = lo[0] - 1
        for i in range(n):
            start = lo[i] if lo[i] > runmax + 1 else runmax + 1
            if hi[i] >= start:
                total += hi[i] - start + 1
            if hi[i] > runmax:
                runmax = hi[i]
        return total

    @njit(cache=True)
    def _cumsum2_rows(x2, hi, lo):
        rows, n = x2.shape
        for r in range(rows):
            a = 0.0
            e = 0.0
            for i in range(n):
                s = a + x2[r, i]
                bb = s - a
                err = (a - (s - bb)) + (x2[r, i] - bb)
                e = e + err
                hi[r, i] = s
                lo[r, i] = e
                a = s

    def cumsum2_numba(x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        shape = x.shape
        x2 = x.reshape(-1, shape[-1]) if x.ndim > 1 else x.reshape(1, -1)
        hi = np.empty_like(x2)
        lo = np.empty_like(x2)
        _cumsum2_rows(x2, hi, lo)
        return hi.reshape(shape), lo.reshape(shape)

    @njit(cache=True)
    def _sat_query_loop(flat, strides, starts, ends, out):
        nb, d = starts.shape
        for b in range(nb):
            acc = flat[0] * 0
            for c in range(1 << d):
                idx = 0
                ones = 0
                for i in range(d):
                    if (c >> i) & 1:
                        idx += ends[b, i] * strides[i]
                        ones += 1
                    else:
                        idx += starts[b, i] * strides[i]
                if (d - ones) % 2:
                    acc = acc - flat[idx]
                else:
                    acc = acc + flat[idx]
            out[b] = acc

    def sat_query_numba(flat, strides, starts, ends):
        out = np.zeros(starts.shape[0], dtype=flat.dtype)
        _sat_query_loop(flat, strides.astype(np.int64), starts.astype(np.int64), ends.astype(np.int64), out)
        return out

    @njit(cache=True)
    def _interval_member_loop(points, starts, ends, out):
        n = starts.shape[0]
        for p in range(points.shape[0]):
            v = points[p]
            lo_i = 0
            hi_i = n
            while lo_i < hi_i:  # first start > v
                mid = (lo_i + hi_i) // 2
                if starts[mid] <= v:
                    lo_i = mid + 1
                else:
                    hi_i = mid
            k = lo_i - 1
            out[p] = k >= 0 and v < ends[k]

    def interval_member_numba(points, starts, ends):
        points = np.ascontiguousarray(points, dtype=np.float64)
        out = np.zeros(points.shape, dtype=np.bool_)
        if starts.size:
            _interval_member_loop(points.ravel(), starts, ends, out.ravel())
        return out

    @njit(cache=True)
    def _box_member_loop(points, lo, hi, out):
        P, m = points.shape
        B = lo.shape[0]
        for p in range(P):
            for b in range(B):
                inside = True
                for c in range(m):
                    v = points[p, c]
                    if v < lo[b, c] or v >= hi[b, c]:
                        inside = False
                        break
                if inside:
                    out[p] = True
                    break

    def box_member_numba(points, lo, hi):
        points = np.ascontiguousarray(points, dtype=np.float64)
        out = np.zeros(points.shape[0], dtype=np.bool_)
        _box_member_loop(points, np.ascontiguousarray(lo), np.ascontiguousarray(hi), out)
        return out

    def union_count_numba_wrapper(lo, hi):
        return int(union_count_numba(np.ascontiguousarray(lo, dtype=np.int64), np.ascontiguousarray(hi, dtype=np.int64)))


if USE_NUMBA:
    union_count = union_count_numba_wrapper
    cumsum2 = cumsum2_numba
    sat_query = sat_query_numba
    interval_member = interval_member_numba
    box_member = box_member_numba
else:
    union_count = union_count_numpy
    cumsum2 = cumsum2_numpy
    sat_query = sat_query_numpy
    interval_member = interval_member_numpy
    box_member = box_member_numpy
