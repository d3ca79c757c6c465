"""Finite unions of half-open boxes on the torus T^m with exact endpoints."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property
from itertools import product as cartesian
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .exact import ExactScalar, as_exact

__all__ = ["TorusSet"]

ZERO = ExactScalar(0)
ONE = ExactScalar(1)


def _wrap_interval(lo: ExactScalar, hi: ExactScalar) -> list[tuple[ExactScalar, ExactScalar]]:
    length = hi - lo
    if length.sign() <= 0:
        return []
    if length >= 1:
        return [(ZERO, ONE)]
    a = lo.frac()
    b = a + length
    if b <= 1:
        return [(a, b)]
    return [(a, ONE), (ZERO, b - 1)]


def _merge_1d(intervals: Iterable[tuple[ExactScalar, ExactScalar]]) -> list[tuple[ExactScalar, ExactScalar]]:
    ivs = sorted((iv for iv in intervals if iv[0] < iv[1]), key=lambda iv: iv[0])
    out: list[list[ExactScalar]] = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1][1] = hi
        else:
            out.append([lo, hi])
    return [(a, b) for a, b in out]


def _overlap(a, b) -> bool:
    for (alo, ahi), (blo, bhi) in zip(a, b):
        if not (alo < bhi and blo < ahi):
            return False
    return True


def _intersect_box(a, b):
    out = []
    for (alo, ahi), (blo, bhi) in zip(a, b):
        lo = alo if alo >= blo else blo
        hi = ahi if ahi <= bhi else bhi
        if lo >= hi:
            return None
        out.append((lo, hi))
    return tuple(out)


def _subtract_box(b, r) -> list:
    if not _overlap(b, r):
        return [b]
    pieces = []
    cur = list(b)
    for c, ((blo, bhi), (rlo, rhi)) in enumerate(zip(b, r)):
        if blo < rlo:
            piece = list(cur)
            piece[c] = (blo, rlo)
            pieces.append(tuple(piece))
        if rhi < bhi:
            piece = list(cur)
            piece[c] = (rhi, bhi)
            pieces.append(tuple(piece))
        cur[c] = (blo if blo >= rlo else rlo, bhi if bhi <= rhi else rhi)
    return pieces


class TorusSet:
    """Finite union of pairwise disjoint half-open boxes in [0, 1)^m.

    Boxes are stored wrap-normalised: every coordinate interval lies inside
    [0, 1], boxes crossing the 0/1 seam are split.  For ``m == 1`` the
    intervals are additionally merged and sorted, which makes the
    representation canonical.
    """

    __slots__ = ("dim", "boxes", "__dict__")

    def __init__(self, dim: int, boxes: Iterable = (), *, normalized: bool = False):
        self.dim = int(dim)
        if normalized:
            bx = tuple(tuple(tuple(iv) for iv in b) for b in boxes)
        else:
            bx = self._normalize(boxes)
        if self.dim == 1:
            bx = tuple(((lo, hi),) for lo, hi in _merge_1d(b[0] for b in bx))
        self.boxes = bx

    # -- construction ------------------------------------------------------
    def _normalize(self, boxes) -> tuple:
        wrapped = []
        for box in boxes:
            if len(box) != self.dim:
                raise ValueError(f"box {box!r} does not have dimension {self.dim}")
            per_coord = [_wrap_interval(as_exact(lo), as_exact(hi)) for lo, hi in box]
            wrapped.extend(tuple(p) for p in cartesian(*per_coord))
        if self.dim == 1:
            return tuple(wrapped)
        return tuple(self._disjoint_union([], wrapped))

    @staticmethod
    def _disjoint_union(existing: list, new: Iterable) -> list:
        result = list(existing)
        for box in new:
            pieces = [box]
            for r in result:
                pieces = [q for p in pieces for q in _subtract_box(p, r)]
                if not pieces:
                    break
            result.extend(pieces)
        return result

    @classmethod
    def full(cls, dim: int) -> "TorusSet":
        return cls(dim, [((ZERO, ONE),) * dim], normalized=True)

    @classmethod
    def empty(cls, dim: int) -> "TorusSet":
        return cls(dim, [], normalized=True)

    @classmethod
    def interval(cls, lo, hi) -> "TorusSet":
        return cls(1, [((as_exact(lo), as_exact(hi)),)])

    @classmethod
    def box(cls, *intervals) -> "TorusSet":
        return cls(len(intervals), [tuple((as_exact(a), as_exact(b)) for a, b in intervals)])

    @classmethod
    def product(cls, factors: Sequence["TorusSet"]) -> "TorusSet":
        """Cartesian product; disjointness is inherited from the factors."""
        dim = sum(f.dim for f in factors)
        boxes = [sum(combo, ()) for combo in cartesian(*(f.boxes for f in factors))]
        return cls(dim, boxes, normalized=True)

    # -- set algebra -------------------------------------------------------
    def _check(self, other: "TorusSet") -> None:
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def union(self, other: "TorusSet") -> "TorusSet":
        self._check(other)
        if self.dim == 1:
            return TorusSet(1, self.boxes + other.boxes, normalized=True)
        return TorusSet(self.dim, self._disjoint_union(list(self.boxes), other.boxes), normalized=True)

    __or__ = union

    def intersection(self, other: "TorusSet") -> "TorusSet":
        self._check(other)
        if self.dim == 1:
            return TorusSet(1, self._intersect_1d(other), normalized=True)
        out = []
        for a in self.boxes:
            for b in other.boxes:
                c = _intersect_box(a, b)
                if c is not None:
                    out.append(c)
        return TorusSet(self.dim, out, normalized=True)

    __and__ = intersection

    def _intersect_1d(self, other: "TorusSet") -> list:
        a = [b[0] for b in self.boxes]
        b = [c[0] for c in other.boxes]
        i = j = 0
        out = []
        while i < len(a) and j < len(b):
            lo = a[i][0] if a[i][0] >= b[j][0] else b[j][0]
            hi = a[i][1] if a[i][1] <= b[j][1] else b[j][1]
            if lo < hi:
                out.append(((lo, hi),))
            if a[i][1] <= b[j][1]:
                i += 1
            else:
                j += 1
        return out

    def complement(self) -> "TorusSet":
        if self.dim == 1:
            out, cur = [], ZERO
            for (lo, hi), in self.boxes:
                if cur < lo:
                    out.append(((cur, lo),))
                cur = hi
            if cur < 1:
                out.append(((cur, ONE),))
            return TorusSet(1, out, normalized=True)
        pieces = [((ZERO, ONE),) * self.dim]
        for r in self.boxes:
            pieces = [q for p in pieces for q in _subtract_box(p, r)]
        return TorusSet(self.dim, pieces, normalized=True)

    def difference(self, other: "TorusSet") -> "TorusSet":
        return self.intersection(other.complement())

    __sub__ = difference

    def translate(self, shift: Sequence) -> "TorusSet":
        """The set x + shift; the preimage of the set under y -> y - shift."""
        if self.dim == 1 and not isinstance(shift, (list, tuple)):
            shift = (shift,)
        if len(shift) != self.dim:
            raise ValueError("shift has the wrong dimension")
        s = [as_exact(v) for v in shift]
        out = []
        for box in self.boxes:
            per = [_wrap_interval(lo + v, hi + v) for (lo, hi), v in zip(box, s)]
            out.extend(tuple(p) for p in cartesian(*per))
        # translation preserves disjointness
        return TorusSet(self.dim, out, normalized=True)

    # -- queries -----------------------------------------------------------
    @cached_property
    def measure(self) -> ExactScalar:
        total = ZERO
        for box in self.boxes:
            vol = ONE
            for lo, hi in box:
                vol = vol * (hi - lo)
            total = total + vol
        return total

    def is_empty(self) -> bool:
        return not self.boxes

    def issubset(self, other: "TorusSet") -> bool:
        self._check(other)
        return self.intersection(other).measure == self.measure

    def isdisjoint(self, other: "TorusSet") -> bool:
        return self.intersection(other).is_empty()

    def same_as(self, other: "TorusSet") -> bool:
        return self.issubset(other) and other.issubset(self)

    def contains_exact(self, point: Sequence) -> bool:
        if self.dim == 1 and not isinstance(point, (list, tuple)):
            point = (point,)
        p = [as_exact(v).frac() for v in point]
        for box in self.boxes:
            if all(lo <= v < hi for (lo, hi), v in zip(box, p)):
                return True
        return False

    @cached_property
    def float_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([[float(a) for a, _ in b] for b in self.boxes], dtype=np.float64).reshape(-1, self.dim)
        hi = np.array([[float(c) for _, c in b] for b in self.boxes], dtype=np.float64).reshape(-1, self.dim)
        return lo, hi

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorised float membership; ``points`` has shape (..., m) and lies in [0, 1)."""
        pts = np.asarray(points, dtype=np.float64)
        if self.dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, self.dim)
        lo, hi = self.float_bounds
        if self.dim == 1:
            res = _kernels.interval_member(np.ascontiguousarray(flat[:, 0]), lo[:, 0].copy(), hi[:, 0].copy())
        else:
            res = _kernels.box_member(flat, lo, hi)
        return res.reshape(shape)

    # -- serialisation -----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "boxes": [[[str(lo), str(hi)] for lo, hi in box] for box in self.boxes],
            "measure": str(self.measure),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TorusSet":
        return cls(int(data["dim"]), [tuple((as_exact(a), as_exact(b)) for a, b in box) for box in data["boxes"]])

    def __len__(self) -> int:
        return len(self.boxes)

    def __repr__(self) -> str:
        return f"TorusSet(dim={self.dim}, boxes={len(self.boxes)}, measure={self.measure})"
