"""Box families and the horizontal cross-sections of their cone unions.

For a family of boxes with corners ``n_k`` and side lengths ``l_k`` and an
axis ``i``, each box contributes the cone ``{(x, y) : |x - n_ki| <= a (y - l_ki)}``.
The cross-section at height ``lam`` is the union over k of the intervals
``[n_ki - a (lam - l_ki), n_ki + a (lam - l_ki)]``.  Linear growth of its size
in ``lam`` is the condition that separates convergent from sweeping-out
moving averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .exact import ExactScalar, as_exact

__all__ = [
    "BoxFamily",
    "ConeCrossSection",
    "ConeVerdict",
    "InsufficientPrefix",
    "generate_family",
    "explicit_family",
    "orthant_split",
    "cross_section",
    "brute_force_count",
    "coverage_bound",
    "condition_verdict",
    "DEFAULT_ALPHAS",
    "geometric_grid",
    "GENERATORS",
]

DEFAULT_ALPHAS = (Fraction(1, 4), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(4))
_INT_LIMIT = 1 << 62


class InsufficientPrefix(ValueError):
    """The lambda grid reaches heights the prefix cannot certify."""


def _to_number(v):
    """Exact value as int/Fraction when rational, ExactScalar otherwise."""
    if isinstance(v, (int, Fraction)) and not isinstance(v, bool):
        return v
    e = as_exact(v)
    if e.is_rational():
        f = e.to_fraction()
        return f.numerator if f.denominator == 1 else f
    return e


@dataclass(frozen=True)
class BoxFamily:
    """Finite prefix ``B_1..B_K`` of a sequence of half-open boxes.

    ``entries[k] = (corner, lengths)``.  ``flips[k][i]`` marks an axis that
    was reflected by :func:`orthant_split`; on such an axis the discrete box
    covers the lattice points ``corner+1 .. corner+length`` instead of
    ``corner .. corner+length-1``.
    """

    mode: str
    d: int
    entries: tuple
    generator: str = "explicit"
    params: tuple = ()
    flips: tuple | None = None

    def __post_init__(self):
        if self.mode not in ("discrete", "continuous"):
            raise ValueError(f"unknown mode {self.mode!r}")
        ents = []
        for corner, lengths in self.entries:
            if len(corner) != self.d or len(lengths) != self.d:
                raise ValueError("box dimension does not match family dimension")
            c = tuple(_to_number(v) for v in corner)
            ln = tuple(_to_number(v) for v in lengths)
            if self.mode == "discrete":
                if not all(isinstance(v, int) for v in c + ln):
                    raise ValueError("discrete boxes need integer corners and lengths")
                if any(v < 1 for v in ln):
                    raise ValueError("discrete side lengths must be >= 1")
            elif any(v <= 0 for v in ln):
                raise ValueError("continuous side lengths must be > 0")
            ents.append((c, ln))
        object.__setattr__(self, "entries", tuple(ents))
        if not ents:
            raise ValueError("a family needs at least one box")

    @property
    def K(self) -> int:
        return len(self.entries)

    def corners(self, axis: int) -> list:
        return [c[axis] for c, _ in self.entries]

    def lengths(self, axis: int) -> list:
        return [ln[axis] for _, ln in self.entries]

    def array(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """int64 corner and length columns (discrete families only)."""
        n = self.corners(axis)
        ln = self.lengths(axis)
        if self.mode != "discrete":
            raise ValueError("integer arrays exist only for discrete families")
        if max(max(map(abs, n)), max(ln)) >= _INT_LIMIT:
            raise OverflowError("family entries exceed the int64 range")
        return np.asarray(n, dtype=np.int64), np.asarray(ln, dtype=np.int64)

    def prefix(self, K: int) -> "BoxFamily":
        if not 1 <= K <= self.K:
            raise ValueError(f"prefix length {K} outside 1..{self.K}")
        return BoxFamily(self.mode, self.d, self.entries[:K], self.generator, self.params,
                         None if self.flips is None else self.flips[:K])

    def lattice_points(self, k: int) -> list[tuple[int, ...]]:
        """Lattice points of box k, honouring reflected axes (discrete only)."""
        corner, lengths = self.entries[k]
        flip = self.flips[k] if self.flips else (False,) * self.d
        axes = [range(c + 1, c + ln + 1) if f else range(c, c + ln) for c, ln, f in zip(corner, lengths, flip)]
        return list(_product(axes))

    def describe(self) -> dict:
        return {"mode": self.mode, "d": self.d, "K": self.K, "generator": self.generator,
                "params": {k: str(v) for k, v in self.params}}


def _product(axes):
    from itertools import product

    return product(*axes)


# -- generators --------------------------------------------------------------


def _ceil_sqrt(k: int) -> int:
    r = math.isqrt(k)
    return r if r * r == k else r + 1


def _gen_linear(k, r=1, d=1):
    return (k,) * d, (r * k,) * d


def _gen_sqrt(k, d=1):
    return (k,) * d, (_ceil_sqrt(k),) * d


def _gen_squares_unit(k, d=1):
    return (k * k,) * d, (1,) * d


def _gen_unit(k, d=1):
    return (k,) * d, (1,) * d


def _gen_pow4(k, d=1):
    return (4**k,) * d, (1,) * d


def _gen_diagonal(k, d=1):
    return (0,) * d, (k,) * d


def _gen_flat_boxes(k, m=1):
    # [k-1, k) x [0, k)^m
    return (k - 1,) + (0,) * m, (1,) + (k,) * m


# name -> (function, default mode, lengths monotone nondecreasing in k)
GENERATORS: dict[str, tuple[Callable, str, bool]] = {
    "linear": (_gen_linear, "discrete", True),
    "sqrt": (_gen_sqrt, "discrete", True),
    "squares_unit": (_gen_squares_unit, "discrete", False),
    "unit": (_gen_unit, "discrete", False),
    "pow4": (_gen_pow4, "discrete", False),
    "diagonal": (_gen_diagonal, "discrete", True),
    "flat_boxes": (_gen_flat_boxes, "continuous", False),
}


def parse_generator(spec: str) -> tuple[str, dict]:
    """``"linear:r=2,d=2"`` -> ("linear", {"r": 2, "d": 2})."""
    name, _, rest = spec.strip().partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"generator parameter {item!r} is not key=value")
        params[key.strip()] = val.strip()
    return name.strip(), params


def generate_family(spec: str | tuple, K: int) -> BoxFamily:
    """First K boxes of a named sequence, k = 1..K.

    Generators: ``linear:r`` (k, rk), ``sqrt`` (k, ceil(sqrt k)),
    ``squares_unit`` (k^2, 1), ``unit`` (k, 1), ``pow4`` (4^k, 1),
    ``diagonal`` (0, k), all replicated on ``d`` axes (default 1), and
    ``flat_boxes:m`` giving [k-1, k) x [0, k)^m.  ``mode=continuous`` turns a
    lattice family into the same boxes in R^d.
    """
    name, params = parse_generator(spec) if isinstance(spec, str) else (spec[0], dict(spec[1]))
    if name not in GENERATORS:
        raise ValueError(f"unknown generator {name!r}; known: {', '.join(sorted(GENERATORS))}")
    if int(K) < 1:
        raise ValueError("prefix length K must be >= 1")
    func, default_mode, _ = GENERATORS[name]
    mode = params.pop("mode", default_mode)
    kwargs = {}
    for key, val in params.items():
        try:
            iv = int(val)
        except ValueError as exc:
            raise ValueError(f"generator parameter {key}={val!r} must be an integer") from exc
        if iv < 1:
            raise ValueError(f"generator parameter {key} must be positive")
        kwargs[key] = iv
    try:
        entries = [func(k, **kwargs) for k in range(1, int(K) + 1)]
    except TypeError as exc:
        raise ValueError(f"bad parameters for generator {name!r}: {exc}") from exc
    d = len(entries[0][0])
    return BoxFamily(mode, d, tuple(entries), generator=name, params=tuple(sorted(kwargs.items())))


def explicit_family(entries: Sequence, mode: str = "discrete") -> BoxFamily:
    """Family from explicit (corner, lengths) pairs; scalars allowed for d = 1."""
    norm = []
    for corner, lengths in entries:
        c = tuple(corner) if isinstance(corner, (list, tuple)) else (corner,)
        ln = tuple(lengths) if isinstance(lengths, (list, tuple)) else (lengths,)
        norm.append((c, ln))
    return BoxFamily(mode, len(norm[0][0]), tuple(norm))


def _next_entry(family: BoxFamily):
    name = family.generator
    if name not in GENERATORS:
        return None
    func = GENERATORS[name][0]
    return func(family.K + 1, **dict(family.params))


# -- orthant splitting -------------------------------------------------------


def orthant_split(family: BoxFamily) -> BoxFamily:
    """Split boxes at the coordinate hyperplanes and reflect negative pieces.

    A discrete axis interval [n, n+l) with n < 0 < n+l becomes the reflected
    piece covering lattice points 1..-n (corner 0, length -n, flipped) and
    [0, n+l).  Entirely negative intervals are reflected whole.  Continuous
    intervals are treated the same way with lengths.
    """
    out, flips = [], []
    old_flips = family.flips or ((False,) * family.d,) * family.K
    for (corner, lengths), oflip in zip(family.entries, old_flips):
        per_axis = []
        for c, ln, f in zip(corner, lengths, oflip):
            pieces = []
            if f:  # already reflected, nonnegative
                pieces.append((c, ln, True))
            elif c >= 0:
                pieces.append((c, ln, False))
            elif c + ln <= 0:
                pieces.append((-c - ln, ln, True))
            else:
                pieces.append((0, -c, True))
                pieces.append((0, c + ln, False))
            per_axis.append(pieces)
        for combo in _product(per_axis):
            out.append((tuple(p[0] for p in combo), tuple(p[1] for p in combo)))
            flips.append(tuple(p[2] for p in combo))
    return BoxFamily(family.mode, family.d, tuple(out), family.generator, family.params, tuple(flips))


# -- cross-sections ----------------------------------------------------------


@dataclass(frozen=True)
class ConeCrossSection:
    axis: int
    alpha: Fraction
    lam: object
    intervals: tuple
    size: object

    def ratio(self) -> float:
        return float(self.size) / float(self.lam)


def _frac(v) -> Fraction:
    if isinstance(v, ExactScalar):
        return v.to_fraction()
    return Fraction(v)


def _discrete_intervals(n: np.ndarray, ln: np.ndarray, alpha: Fraction, lam: Fraction):
    p, q = alpha.numerator, alpha.denominator
    a, b = lam.numerator, lam.denominator
    keep = ln * b <= a
    n, ln = n[keep], ln[keep]
    if n.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    num = p * (a - ln * b)
    ok = num >= 0
    n, num = n[ok], num[ok]
    r = num // (q * b)
    lo, hi = n - r, n + r
    order = np.argsort(lo, kind="stable")
    return lo[order], hi[order]


def _merge_sorted(lo: np.ndarray, hi: np.ndarray) -> list[tuple[int, int]]:
    if lo.size == 0:
        return []
    runmax = np.maximum.accumulate(hi)
    starts = np.ones(lo.size, dtype=bool)
    starts[1:] = lo[1:] > runmax[:-1] + 1
    idx = np.flatnonzero(starts)
    ends = np.append(idx[1:], lo.size) - 1
    return [(int(lo[s]), int(runmax[e])) for s, e in zip(idx, ends)]


def cross_section(family: BoxFamily, axis: int, alpha, lam, *, with_intervals: bool = True) -> ConeCrossSection:
    """Cone cross-section on ``axis`` (1-based) at aperture ``alpha``, height ``lam``.

    Discrete families count the lattice points of the union of the integer
    intervals ``|x - n_k| <= alpha (lam - l_k)``; continuous families return
    its exact total length.
    """
    i = axis - 1
    if not 0 <= i < family.d:
        raise ValueError(f"axis {axis} outside 1..{family.d}")
    alpha_f = _frac(alpha)
    if alpha_f <= 0 or _frac(lam) <= 0:
        raise ValueError("alpha and lambda must be positive")
    if family.mode == "discrete":
        lam_f = _frac(lam)
        n, ln = family.array(i)
        lo, hi = _discrete_intervals(n, ln, alpha_f, lam_f)
        size = _kernels.union_count(lo, hi)
        ivs = tuple(_merge_sorted(lo, hi)) if with_intervals else ()
        return ConeCrossSection(axis, alpha_f, lam, ivs, size)
    lam_e = as_exact(lam)
    a = as_exact(alpha_f)
    ivs = []
    for c, ln in zip(family.corners(i), family.lengths(i)):
        if ln <= lam_e:
            r = a * (lam_e - ln)
            ivs.append((as_exact(c) - r, as_exact(c) + r))
    ivs.sort(key=lambda iv: iv[0])
    merged: list[list] = []
    for lo, hi in ivs:
        if merged and lo <= merged[-1][1]:
            if hi > merged[-1][1]:
                merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    size = sum((hi - lo for lo, hi in merged), ExactScalar(0))
    return ConeCrossSection(axis, alpha_f, lam, tuple((lo, hi) for lo, hi in merged), size)


def brute_force_count(family: BoxFamily, axis: int, alpha, lam) -> int:
    """Direct enumeration of integers x with |x - n_k| <= alpha (lam - l_k) for some k."""
    i = axis - 1
    alpha, lam = Fraction(alpha), Fraction(lam)
    pairs = [(c[i], ln[i]) for c, ln in family.entries]
    lo = min(n for n, _ in pairs) - math.ceil(alpha * lam)
    hi = max(n for n, _ in pairs) + math.ceil(alpha * lam)
    return sum(1 for x in range(lo, hi + 1) if any(l <= lam and abs(x - n) <= alpha * (lam - l) for n, l in pairs))


# -- verdicts ----------------------------------------------------------------


def geometric_grid(lo, hi, ratio: int = 2) -> list:
    """lo, lo*ratio, ... below hi, with hi appended."""
    out, v = [], Fraction(lo)
    hi = Fraction(hi)
    while v < hi:
        out.append(v)
        v *= ratio
    out.append(hi)
    return [int(x) if x.denominator == 1 else x for x in out]


def coverage_bound(family: BoxFamily, axis: int):
    """Heights below this value see the complete infinite family.

    For generators whose lengths never decrease, every entry past the prefix
    has length at least ``l_{K+1,i}`` and so stays out of every cross-section
    at heights below it.  Explicit families are the whole sequence.  Other
    generators return 0: nothing beyond the prefix is certified.
    """
    i = axis - 1
    if family.generator == "explicit":
        return math.inf
    if family.flips is not None or not GENERATORS.get(family.generator, (None, None, False))[2]:
        return 0
    nxt = _next_entry(family)
    return nxt[1][i]


def bounded_lengths(family: BoxFamily, axis: int) -> bool:
    """Lengths along the axis show no growth: the late minimum is not above the early one."""
    ln = family.lengths(axis - 1)
    if len(ln) < 2:
        return True
    half = len(ln) // 2
    return min(ln[half:]) <= min(ln[:half])


def _fit_exponent(lams: Sequence, sizes: Sequence) -> float:
    pts = [(math.log(float(l)), math.log(float(s))) for l, s in zip(lams, sizes) if float(s) > 0]
    if len(pts) < 2:
        return float("nan")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.ptp(x) == 0:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ConeVerdict:
    verdict: str
    axis: int
    alphas: list
    lambdas: list
    witness_A: float | None = None
    witness_alpha: Fraction | None = None
    growth_exponent: float | None = None
    witnesses: list = field(default_factory=list)
    table: list = field(default_factory=list)  # rows (alpha, lambda, size, ratio)
    per_alpha: dict = field(default_factory=dict)
    coverage_bound: object = None
    K: int = 0

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "axis": self.axis,
            "K": self.K,
            "alphas": [str(a) for a in self.alphas],
            "lambdas": [str(l) for l in self.lambdas],
            "witness_A": self.witness_A,
            "witness_alpha": None if self.witness_alpha is None else str(self.witness_alpha),
            "growth_exponent": self.growth_exponent,
            "witnesses": [[str(l), r] for l, r in self.witnesses],
            "per_alpha": self.per_alpha,
            "coverage_bound": str(self.coverage_bound),
        }

    def csv_rows(self) -> list:
        return [[str(a), str(l), str(s), repr(r)] for a, l, s, r in self.table]


def condition_verdict(
    family: BoxFamily,
    axis: int = 1,
    alphas: Iterable = DEFAULT_ALPHAS,
    lambdas: Iterable | None = None,
    *,
    growth_factor: float = 8.0,
    min_exponent: float = 1.2,
    max_lambda=1 << 20,
) -> ConeVerdict:
    """Empirical decision of the cone condition on one axis of a prefix.

    Order of checks: bounded lengths first; then, per alpha, the ratio
    size/lambda is classified as growing (its maximum exceeds ``growth_factor``
    times its value at the smallest height with a nonempty section, and the log-log slope is at least
    ``min_exponent``), linear (neither) or unclear.  Any linear alpha gives
    Holds with the least observed slope bound, all alphas growing gives
    FailsEmpirically, anything else is Inconclusive.
    """
    alphas = [Fraction(a) for a in alphas]
    bound = coverage_bound(family, axis)
    if bounded_lengths(family, axis):
        return ConeVerdict("BoundedLengths", axis, alphas, [], coverage_bound=bound, K=family.K)
    if lambdas is None:
        top = min(bound - 1, max_lambda) if bound != math.inf else max_lambda
        if top < 1:
            raise InsufficientPrefix("the prefix certifies no height")
        lambdas = geometric_grid(1, top)
    lambdas = list(lambdas)
    if not lambdas or any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda grid must be nonempty and strictly increasing")
    if not alphas or any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha grid must be nonempty and strictly increasing")
    if max(lambdas) >= bound:
        raise InsufficientPrefix(
            f"lambda up to {max(lambdas)} needs entries beyond K={family.K}; heights must stay below {bound}"
        )
    table, per_alpha = [], {}
    linear, growing = [], []
    for a in alphas:
        sizes = [cross_section(family, axis, a, l, with_intervals=False).size for l in lambdas]
        ratios = [float(s) / float(l) for s, l in zip(sizes, lambdas)]
        table.extend((a, l, s, r) for l, s, r in zip(lambdas, sizes, ratios))
        expo = _fit_exponent(lambdas, sizes)
        # growth is measured from the first height where the section is nonempty
        base = next((r for r in ratios if r > 0), 0.0)
        big = base > 0 and max(ratios) > growth_factor * base
        steep = not (expo < min_exponent)
        kind = "grows" if big and steep else ("linear" if not big and not steep else "unclear")
        per_alpha[str(a)] = {"max_ratio": max(ratios), "exponent": expo, "behaviour": kind}
        row = (a, max(ratios), expo, list(zip(lambdas, ratios)))
        if kind == "grows":
            growing.append(row)
        elif kind == "linear":
            linear.append(row)
    if linear:
        a, mr, expo, wit = min(linear, key=lambda t: t[1])
        return ConeVerdict("Holds", axis, alphas, lambdas, witness_A=mr, witness_alpha=a, growth_exponent=expo,
                           witnesses=wit, table=table, per_alpha=per_alpha, coverage_bound=bound, K=family.K)
    if len(growing) < len(alphas):
        return ConeVerdict("Inconclusive", axis, alphas, lambdas, table=table, per_alpha=per_alpha,
                           coverage_bound=bound, K=family.K)
    a, mr, expo, wit = min(growing, key=lambda t: t[2])
    return ConeVerdict("FailsEmpirically", axis, alphas, lambdas, witness_alpha=a, growth_exponent=expo,
                       witnesses=wit, table=table, per_alpha=per_alpha, coverage_bound=bound, K=family.K)
