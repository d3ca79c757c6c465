"""Box averages along orbits: naive, summed-area batch, exact and quadrature.

Discrete averages ``A f(x) = |B|^-1 sum_{j in B} f(T^j x)`` use half-open
lattice boxes ``B = prod [n_i, n_i + l_i)``.  Continuous averages integrate
``f(x + Theta t)`` over ``t`` in ``prod [w_i, w_i + s_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as cartesian
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .cone_geometry import BoxFamily, InsufficientPrefix, condition_verdict
from .exact import ExactScalar, as_exact
from .systems import (
    Character,
    Indicator,
    TorusSystem,
    TrigPoly,
    evaluate,
    observable_mean,
    orbit_points,
    sup_norm,
)

__all__ = [
    "BudgetExceeded",
    "discrete_box_sum",
    "discrete_box_average",
    "batch_box_sums",
    "batch_box_averages",
    "character_box_average",
    "tensor_midpoint",
    "QuadratureResult",
    "exact_indicator_box_average",
    "exact_indicator_segment_average",
    "continuous_box_average",
    "maximal_average",
    "composition_defect",
    "CompositionReport",
    "convergence_experiment",
    "ExperimentReport",
    "exact_point",
    "sample_points",
]

DEFAULT_BUDGET = 1 << 28  # bytes for one summed-area table


class BudgetExceeded(MemoryError):
    """A summed-area table would exceed the configured memory budget."""


def _box(box) -> tuple[tuple, tuple]:
    corner, lengths = box
    corner = tuple(corner) if isinstance(corner, (list, tuple, np.ndarray)) else (corner,)
    lengths = tuple(lengths) if isinstance(lengths, (list, tuple, np.ndarray)) else (lengths,)
    return corner, lengths


def _values_fn(obs, absolute: bool = False) -> Callable:
    if callable(obs) and not isinstance(obs, (Character, Indicator, TrigPoly)):
        return obs
    if absolute and not isinstance(obs, Indicator):
        return lambda pts: np.abs(evaluate(obs, pts))
    return lambda pts: evaluate(obs, pts)


def sample_points(m: int, count: int, seed: int) -> np.ndarray:
    """Seeded uniform points in [0, 1)^m."""
    return np.random.default_rng(seed).random((count, m))


def exact_point(x) -> tuple:
    """Exact copy of a point; floats become their exact binary value."""
    arr = np.atleast_1d(x)
    out = []
    for v in arr:
        if isinstance(v, (float, np.floating)):
            out.append(ExactScalar(Fraction(float(v))))
        else:
            out.append(as_exact(v))
    return tuple(out)


# -- discrete, naive ---------------------------------------------------------


def discrete_box_sum(system: TorusSystem, obs, x, box):
    """Sum of f over the box orbit; an exact integer for indicators."""
    if not system.is_discrete:
        raise ValueError("discrete averages need a Z^d action")
    corner, lengths = _box(box)
    if len(corner) != system.d or len(lengths) != system.d:
        raise ValueError("box dimension does not match the action")
    if any(l < 1 for l in lengths):
        raise ValueError("box lengths must be >= 1")
    axes = [np.arange(n, n + l, dtype=np.int64) for n, l in zip(corner, lengths)]
    vals = _values_fn(obs)(orbit_points(system, np.asarray(x, dtype=np.float64), axes))
    if vals.dtype == bool:
        return int(np.count_nonzero(vals))
    return vals.sum()


def discrete_box_average(system: TorusSystem, obs, x, box):
    corner, lengths = _box(box)
    return discrete_box_sum(system, obs, x, box) / math.prod(lengths)


# -- discrete, summed-area tables --------------------------------------------


def _cumsum_axis(a: np.ndarray, axis: int, fn) -> tuple:
    moved = np.ascontiguousarray(np.moveaxis(a, axis, -1))
    hi, lo = fn(moved)
    return np.moveaxis(hi, -1, axis), np.moveaxis(lo, -1, axis)


def _padded(a: np.ndarray) -> np.ndarray:
    out = np.zeros(tuple(s + 1 for s in a.shape), dtype=a.dtype)
    out[tuple(slice(1, None) for _ in a.shape)] = a
    return out


def _float_tables(vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Compensated summed-area table as an unevaluated pair (hi, lo)."""
    hi = _padded(vals.astype(np.float64))
    lo = np.zeros_like(hi)
    for ax in range(hi.ndim):
        hi, lo2 = _cumsum_axis(hi, ax, _kernels.cumsum2)
        lo = np.cumsum(lo, axis=ax) + lo2
    return np.ascontiguousarray(hi), np.ascontiguousarray(lo)


def _query(table: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    strides = np.array(table.strides, dtype=np.int64) // table.itemsize
    return _kernels.sat_query(table.ravel(), strides, starts, ends)


def batch_box_sums(system: TorusSystem, obs, points, boxes: Sequence, *, budget: int = DEFAULT_BUDGET,
                   absolute: bool = False) -> np.ndarray:
    """Box sums for every (point, box) pair through one summed-area table per point.

    Returns shape (P, B); int64 for indicators, float or complex otherwise.
    Orbit points are generated exactly as in :func:`discrete_box_sum`, so
    indicator counts agree with the naive path exactly.
    """
    if not system.is_discrete:
        raise ValueError("discrete averages need a Z^d action")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != system.m:
        pts = pts.reshape(-1, system.m)
    bx = [_box(b) for b in boxes]
    corners = np.array([c for c, _ in bx], dtype=np.int64).reshape(len(bx), system.d)
    lengths = np.array([l for _, l in bx], dtype=np.int64).reshape(len(bx), system.d)
    if (lengths < 1).any():
        raise ValueError("box lengths must be >= 1")
    lo = corners.min(axis=0)
    hi = (corners + lengths).max(axis=0)
    cells = int(np.prod(hi - lo + 1))
    if cells * 24 > budget:
        raise BudgetExceeded(f"summed-area table with {cells} cells exceeds the {budget} byte budget")
    axes = [np.arange(a, b, dtype=np.int64) for a, b in zip(lo, hi)]
    starts = corners - lo
    ends = starts + lengths
    fn = _values_fn(obs, absolute)
    out = None
    for p, x in enumerate(pts):
        vals = fn(orbit_points(system, x, axes))
        if vals.dtype == bool:
            table = _padded(vals.astype(np.int64))
            for ax in range(table.ndim):
                table = np.cumsum(table, axis=ax)
            res = _query(np.ascontiguousarray(table), starts, ends)
        elif np.iscomplexobj(vals):
            rh, rl = _float_tables(vals.real)
            ih, il = _float_tables(vals.imag)
            re = _query(rh, starts, ends) + _query(rl, starts, ends)
            im = _query(ih, starts, ends) + _query(il, starts, ends)
            res = re + 1j * im
        else:
            th, tl = _float_tables(vals)
            res = _query(th, starts, ends) + _query(tl, starts, ends)
        if out is None:
            out = np.empty((pts.shape[0], len(bx)), dtype=res.dtype)
        out[p] = res
    return out


def batch_box_averages(system: TorusSystem, obs, points, boxes: Sequence, **kw) -> np.ndarray:
    sums = batch_box_sums(system, obs, points, boxes, **kw)
    vol = np.array([math.prod(_box(b)[1]) for b in boxes], dtype=np.float64)
    return sums / vol


# -- continuous: closed form for characters ----------------------------------


def character_box_average(system: TorusSystem, freq, x, box) -> complex:
    """Closed form of the box average of a character under a flow."""
    corner, lengths = _box(box)
    xi = np.asarray(freq, dtype=np.float64)
    theta = system.theta
    c = xi @ theta
    w = np.array([float(v) for v in corner])
    s = np.array([float(v) for v in lengths])
    val = np.exp(2j * math.pi * (xi @ np.asarray(x, dtype=np.float64) + c @ w))
    for ci, si in zip(c, s):
        z = 2j * math.pi * ci * si
        val *= 1.0 if ci == 0 else np.expm1(z) / z
    return complex(val)


# -- continuous: quadrature --------------------------------------------------


@dataclass
class QuadratureResult:
    value: complex | float
    error: float
    points_per_axis: int
    levels: list = field(default_factory=list)
    converged: bool = False
    rigorous: bool = False

    def to_json(self) -> dict:
        v = self.value
        return {
            "value": [v.real, v.imag] if isinstance(v, complex) else float(v),
            "error": self.error,
            "points_per_axis": self.points_per_axis,
            "converged": self.converged,
            "rigorous_bound": self.rigorous,
        }


def _midpoint(fn, system, x, corner, lengths, n):
    axes = [float(w) + (np.arange(n) + 0.5) * (float(s) / n) for w, s in zip(corner, lengths)]
    vals = fn(orbit_points(system, x, axes))
    return vals.mean() if vals.dtype != bool else np.count_nonzero(vals) / vals.size


def _indicator_error_bound(system, obs: Indicator, x, corner, lengths, n) -> float:
    """Fraction of midpoint cells crossed by a preimage boundary.

    The integrand is constant on every other cell, where the midpoint value
    is exact; each crossed cell errs by at most its volume.
    """
    theta = system.theta
    d = system.d
    h = np.array([float(s) / n for s in lengths])
    centers = [float(w) + (np.arange(n) + 0.5) * hh for w, hh in zip(corner, h)]
    crossed = np.zeros((n,) * d, dtype=bool)
    boundaries = [sorted({float(b) for box in obs.set.boxes for b in box[c]}) for c in range(system.m)]
    for c in range(system.m):
        g = np.full((n,) * d, float(x[c]))
        for i in range(d):
            sh = [1] * d
            sh[i] = n
            g = g + centers[i].reshape(sh) * theta[c, i]
        half = 0.5 * float(np.abs(theta[c]) @ h) + 1e-12 * (1 + np.abs(g))
        for b in boundaries[c]:
            crossed |= np.floor(g + half - b) > np.floor(g - half - b)
    return float(np.count_nonzero(crossed)) / crossed.size


def tensor_midpoint(system: TorusSystem, obs, x, box, *, tol: float = 1e-9, n0: int = 8,
                    max_points: int = 1 << 22) -> QuadratureResult:
    """Composite midpoint rule with dyadic refinement.

    Smooth observables get Romberg extrapolation on the midpoint sequence
    (its error expands in even powers of the step).  Indicators keep the
    plain midpoint value and come with a rigorous bound from counting the
    cells that a preimage boundary crosses.
    """
    corner, lengths = _box(box)
    d = system.d
    xa = np.asarray(x, dtype=np.float64)
    fn = _values_fn(obs)
    cap = max(n0, int(round(max_points ** (1.0 / d))))
    is_ind = isinstance(obs, Indicator)
    n = n0
    rows: list[list] = []
    levels = []
    while True:
        m = _midpoint(fn, system, xa, corner, lengths, n)
        if is_ind:
            rows.append([m])
            est = abs(rows[-1][0] - rows[-2][0]) if len(rows) > 1 else math.inf
        else:
            row = [m]
            for j, prev in enumerate(rows[-1] if rows else []):
                row.append(row[j] + (row[j] - prev) / (4 ** (j + 1) - 1))
            rows.append(row)
            est = abs(rows[-1][-1] - rows[-2][-1]) if len(rows) > 1 else math.inf
        levels.append({"n": n, "value": complex(rows[-1][-1]) if np.iscomplexobj(rows[-1][-1]) else float(rows[-1][-1]), "change": est})
        if est < tol or 2 * n > cap:
            break
        n *= 2
    value = rows[-1][-1]
    value = complex(value) if np.iscomplexobj(value) else float(value)
    if is_ind:
        bound = _indicator_error_bound(system, obs, xa, corner, lengths, n)
        return QuadratureResult(value, bound, n, levels, est < tol, rigorous=True)
    return QuadratureResult(value, est, n, levels, est < tol)


# -- continuous: exact indicator paths ---------------------------------------


def _affine_preimage(x_c: ExactScalar, g: ExactScalar, lo: ExactScalar, hi: ExactScalar,
                     a: ExactScalar, b: ExactScalar) -> list[tuple[ExactScalar, ExactScalar]]:
    """{t in [a, b) : frac(x_c + g t) in [lo, hi)} as disjoint intervals (up to null sets)."""
    if not g:
        return [(a, b)] if lo <= x_c.frac() < hi else []
    v0, v1 = x_c + g * a, x_c + g * b
    vmin, vmax = (v0, v1) if g.sign() > 0 else (v1, v0)
    out = []
    for k in range(math.floor(vmin - hi) , math.ceil(vmax - lo) + 1):
        p = (lo + k - x_c) / g
        q = (hi + k - x_c) / g
        if g.sign() < 0:
            p, q = q, p
        p = p if p >= a else a
        q = q if q <= b else b
        if p < q:
            out.append((p, q))
    out.sort(key=lambda iv: iv[0])
    return out


def _intersect_lists(a, b):
    out, i, j = [], 0, 0
    while i < len(a) and j < len(b):
        lo = a[i][0] if a[i][0] >= b[j][0] else b[j][0]
        hi = a[i][1] if a[i][1] <= b[j][1] else b[j][1]
        if lo < hi:
            out.append((lo, hi))
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return out


def _halfspace_volume(coef: list, box: list, s: ExactScalar) -> ExactScalar:
    """Exact volume of {t in box : coef . t < s} for nonzero coefficients.

    Inclusion-exclusion over the box vertices of the truncated power
    (s - coef . v)_+^k, after flipping axes so every coefficient is positive.
    """
    k = len(coef)
    cs, bx = [], []
    for c, (p, q) in zip(coef, box):
        if c.sign() > 0:
            cs.append(c)
            bx.append((p, q))
        else:  # t -> -t
            cs.append(-c)
            bx.append((-q, -p))
    total = ExactScalar(0)
    for eps in cartesian((0, 1), repeat=k):
        v = sum((c * (q if e else p) for c, (p, q), e in zip(cs, bx, eps)), ExactScalar(0))
        r = s - v
        if r.sign() > 0:
            term = r**k
            total = total - term if sum(eps) % 2 else total + term
    denom = ExactScalar(math.factorial(k))
    for c in cs:
        denom = denom * c
    return total / denom


def _slab_volume(coef, box, x_c, lo, hi) -> ExactScalar:
    """Exact volume of {t in box : frac(x_c + coef . t) in [lo, hi)}."""
    nz = [i for i, c in enumerate(coef) if c]
    zero_len = ExactScalar(1)
    for i, (p, q) in enumerate(box):
        if i not in nz:
            zero_len = zero_len * (q - p)
    if not nz:
        return zero_len if lo <= x_c.frac() < hi else ExactScalar(0)
    c = [coef[i] for i in nz]
    b = [box[i] for i in nz]
    vmin = x_c + sum(((ci * (p if ci.sign() > 0 else q)) for ci, (p, q) in zip(c, b)), ExactScalar(0))
    vmax = x_c + sum(((ci * (q if ci.sign() > 0 else p)) for ci, (p, q) in zip(c, b)), ExactScalar(0))
    total = ExactScalar(0)
    for k in range(math.floor(vmin - hi), math.ceil(vmax - lo) + 1):
        total = total + _halfspace_volume(c, b, hi + k - x_c) - _halfspace_volume(c, b, lo + k - x_c)
    return zero_len * total


def box_volume(box) -> ExactScalar:
    v = ExactScalar(1)
    for p, q in box:
        v = v * (q - p)
    return v


def exact_indicator_box_average(system: TorusSystem, obs: Indicator, x, box) -> ExactScalar:
    """Exact continuous average of an indicator over a parameter box.

    Supported when every row of the translation matrix except at most one
    has a single nonzero entry (the canonical suspension shape): those rows
    cut the box into products of intervals, and the remaining row is handled
    as a union of slabs with exact volumes.
    """
    if not isinstance(obs, Indicator):
        raise TypeError("the exact path integrates indicators only")
    corner, lengths = _box(box)
    d = system.d
    xe = exact_point(x)
    w = [as_exact(v) for v in corner]
    s = [as_exact(v) for v in lengths]
    if any(v.sign() <= 0 for v in s):
        raise ValueError("box lengths must be positive")
    mat = system.matrix
    slab_rows = [c for c in range(system.m) if sum(1 for v in mat[c] if v) > 1]
    if len(slab_rows) > 1:
        raise NotImplementedError("exact path needs at most one non-axis-aligned row")
    total = ExactScalar(0)
    for sbox in obs.set.boxes:
        per_axis = [[(w[i], w[i] + s[i])] for i in range(d)]
        empty = False
        for c in range(system.m):
            if c in slab_rows:
                continue
            lo, hi = sbox[c]
            nzs = [i for i, v in enumerate(mat[c]) if v]
            if not nzs:
                if not (lo <= xe[c].frac() < hi):
                    empty = True
                    break
                continue
            i = nzs[0]
            pieces = _affine_preimage(xe[c], mat[c][i], lo, hi, w[i], w[i] + s[i])
            per_axis[i] = _intersect_lists(per_axis[i], pieces)
            if not per_axis[i]:
                empty = True
                break
        if empty:
            continue
        for cell in cartesian(*per_axis):
            if slab_rows:
                c = slab_rows[0]
                lo, hi = sbox[c]
                total = total + _slab_volume(list(mat[c]), list(cell), xe[c], lo, hi)
            else:
                total = total + box_volume(cell)
    return total / box_volume([(a, a + b) for a, b in zip(w, s)])


def exact_indicator_segment_average(obs: Indicator, start, direction) -> ExactScalar:
    """Exact mean of the indicator along the torus segment start + lam * direction, lam in [0, 1)."""
    st = exact_point(start)
    dr = exact_point(direction)
    total = ExactScalar(0)
    zero, one = ExactScalar(0), ExactScalar(1)
    for sbox in obs.set.boxes:
        ivs = [(zero, one)]
        for c, (lo, hi) in enumerate(sbox):
            ivs = _intersect_lists(ivs, _affine_preimage(st[c], dr[c], lo, hi, zero, one))
            if not ivs:
                break
        total = total + sum((q - p for p, q in ivs), ExactScalar(0))
    return total


def continuous_box_average(system: TorusSystem, obs, x, box, method: str = "auto", **kw):
    """Mean of f(x + Theta t) over the parameter box.

    ``method``: ``exact`` (indicators, returns ExactScalar), ``quadrature``
    (returns :class:`QuadratureResult`), ``closed`` (characters) or ``auto``
    (exact when possible, else quadrature value).
    """
    if system.is_discrete:
        raise ValueError("continuous averages need an R^d action")
    corner, lengths = _box(box)
    if len(corner) != system.d or len(lengths) != system.d:
        raise ValueError("box dimension does not match the action")
    if method == "exact":
        return exact_indicator_box_average(system, obs, x, box)
    if method == "quadrature":
        return tensor_midpoint(system, obs, x, box, **kw)
    if method == "closed":
        if not isinstance(obs, Character):
            raise TypeError("closed form exists for characters only")
        return character_box_average(system, obs.freq, x, box)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(obs, Indicator):
        try:
            return exact_indicator_box_average(system, obs, x, box)
        except NotImplementedError:
            pass
    if isinstance(obs, Character):
        return character_box_average(system, obs.freq, x, box)
    if isinstance(obs, TrigPoly):
        return sum(c * character_box_average(system, f, x, box) for f, c in obs.terms)
    return tensor_midpoint(system, obs, x, box, **kw).value


# -- maximal averages --------------------------------------------------------


def _window(family: BoxFamily, window) -> range:
    if window is None:
        return range(1, family.K + 1)
    n, K = window
    if not 1 <= n <= K <= family.K:
        raise ValueError(f"window {window} is empty or outside the prefix 1..{family.K}")
    return range(n, K + 1)


def maximal_average(system: TorusSystem, obs, x, family: BoxFamily, window=None) -> tuple[float, int]:
    """sup over k in the window of the box average of |f| at x, with the argmax k."""
    ks = _window(family, window)
    boxes = [family.entries[k - 1] for k in ks]
    if system.is_discrete:
        vals = batch_box_averages(system, obs, np.atleast_2d(np.asarray(x, dtype=np.float64)), boxes, absolute=True)[0]
        vals = np.real(vals)
    else:
        vals = []
        for b in boxes:
            v = continuous_box_average(system, obs, x, b) if isinstance(obs, Indicator) else \
                tensor_midpoint(system, _values_fn(obs, absolute=True), x, b).value
            vals.append(float(abs(v)) if not isinstance(v, ExactScalar) else float(v))
        vals = np.asarray(vals)
    i = int(np.argmax(vals))
    return float(vals[i]), ks[i]


# -- composition of averages -------------------------------------------------


@dataclass
class CompositionReport:
    defect: float
    composed: complex | float
    composed_shifted: complex | float
    direct: complex | float
    bound: float
    constant: float
    numerators_equal: bool | None = None

    def to_json(self) -> dict:
        def enc(v):
            v = complex(v)
            return [v.real, v.imag]

        return {"defect": self.defect, "composed": enc(self.composed), "composed_shifted": enc(self.composed_shifted),
                "direct": enc(self.direct), "bound": self.bound, "constant": self.constant,
                "numerators_equal": self.numerators_equal}


def composition_defect(system: TorusSystem, obs, x, k_box, h_box) -> CompositionReport:
    """|A_k(A_h f)(x) - A_k f(x)| computed two ways, with its explicit bound.

    The composed average is evaluated as a double sum weighted by the
    convolution counts of the two boxes, and again as the mean over shifts
    i in the h-box of the average over the shifted k-box.  Each shifted box
    differs from the k-box in ``2 (prod l - prod (l - |i|)_+)`` lattice
    points, which gives the bound.
    """
    if isinstance(obs, (Character, Indicator, TrigPoly)):
        fnorm = sup_norm(obs)
    else:
        raise TypeError("composition defect needs a bounded observable variant")
    c0 = 0j
    if isinstance(obs, TrigPoly):
        # averages fix constants, so only the oscillating part contributes
        c0 = sum((c for f, c in obs.terms if not any(f)), 0j)
        obs = TrigPoly(tuple((f, c) for f, c in obs.terms if any(f)))
        if not obs.terms:
            return CompositionReport(0.0, c0, c0, c0, 0.0, 0.0, None)
    kc, kl = _box(k_box)
    hc, hl = _box(h_box)
    d = system.d
    vk, vh = math.prod(kl), math.prod(hl)
    # double sum: z = j + i over the Minkowski sum box
    zlo = [a + b for a, b in zip(kc, hc)]
    zlen = [a + b - 1 for a, b in zip(kl, hl)]
    axes = [np.arange(a, a + l, dtype=np.int64) for a, l in zip(zlo, zlen)]
    vals = _values_fn(obs)(orbit_points(system, np.asarray(x, dtype=np.float64), axes))
    weights = np.ones((1,) * d, dtype=np.int64)
    for i in range(d):
        w1 = np.convolve(np.ones(kl[i], dtype=np.int64), np.ones(hl[i], dtype=np.int64))
        sh = [1] * d
        sh[i] = len(w1)
        weights = weights * w1.reshape(sh)
    is_ind = vals.dtype == bool
    if is_ind:
        num_double = int((weights * vals.astype(np.int64)).sum())
        composed = num_double / (vk * vh)
    else:
        composed = (weights * vals).sum() / (vk * vh)
    # shifted windows
    shifts = list(cartesian(*[range(a, a + l) for a, l in zip(hc, hl)]))
    boxes = [(tuple(c + s for c, s in zip(kc, sh)), kl) for sh in shifts]
    sums = batch_box_sums(system, obs, np.asarray(x, dtype=np.float64)[None], boxes)[0]
    if is_ind:
        num_shift = int(sums.sum())
        shifted = num_shift / (vk * vh)
    else:
        shifted = sums.sum() / (vk * vh)
    direct = discrete_box_average(system, obs, x, k_box)
    defect = float(abs(composed - direct))
    disc = 0
    for sh in shifts:
        disc += 2 * (vk - math.prod(max(l - abs(s), 0) for l, s in zip(kl, sh)))
    bound = fnorm * disc / (vh * vk)
    if c0:
        composed, shifted, direct = composed + c0, shifted + c0, direct + c0
    return CompositionReport(defect, composed, shifted, direct, bound, bound * vk,
                             (num_double == num_shift) if is_ind else None)


# -- convergence experiments -------------------------------------------------


@dataclass
class ExperimentReport:
    ks: list
    deviations: list
    argmax_samples: list
    final_deviation: float
    mean: object
    sample_count: int
    seed: int
    precondition: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        m = self.mean
        return {
            "final_deviation": self.final_deviation,
            "max_deviation": max(self.deviations) if self.deviations else None,
            "mean": str(m) if isinstance(m, ExactScalar) else repr(complex(m)) if isinstance(m, complex) else m,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "k_count": len(self.ks),
            "precondition": self.precondition,
        }

    def csv_rows(self) -> list:
        return [[k, repr(dv), a] for k, dv, a in zip(self.ks, self.deviations, self.argmax_samples)]


def convergence_experiment(system: TorusSystem, obs, family: BoxFamily, sample_count: int = 100, seed: int = 0,
                           *, override: bool = False, ks: Sequence[int] | None = None,
                           budget: int = DEFAULT_BUDGET) -> ExperimentReport:
    """sup over seeded samples of |A_k f(x) - mu(f)| along k."""
    ks = list(ks) if ks is not None else list(range(1, family.K + 1))
    pts = sample_points(system.m, sample_count, seed)
    mu = observable_mean(system, obs)
    mu_c = complex(float(mu)) if isinstance(mu, ExactScalar) else complex(mu)
    pre = {"ergodic": system.ergodic, "override": override}
    if family.mode == "discrete":
        try:
            pre["condition"] = condition_verdict(family, 1).verdict
        except (InsufficientPrefix, ValueError):
            pre["condition"] = "unknown"
    pre["met"] = bool(system.ergodic and pre.get("condition") == "Holds")
    boxes = [family.entries[k - 1] for k in ks]
    if system.is_discrete:
        vals = batch_box_averages(system, obs, pts, boxes, budget=budget)
    else:
        vals = np.array([[complex(float(v)) if isinstance(v := continuous_box_average(system, obs, x, b), ExactScalar) else v
                          for b in boxes] for x in pts])
    dev = np.abs(vals - mu_c)
    arg = dev.argmax(axis=0)
    deviations = [float(v) for v in dev.max(axis=0)]
    return ExperimentReport(ks, deviations, [int(a) for a in arg], deviations[-1], mu, sample_count, seed, pre)
