"""Explicit Rokhlin towers with exact certificates.

Discrete towers live on rotation tori: a base set B whose translates
``T^j B`` for ``j`` in a box of exponents are pairwise disjoint.  The flow
tower for a canonical suspension uses the last-coordinate circle as
transversal and the chart ``(x, t) -> (gamma t, x + a . t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Sequence

import numpy as np

from .exact import ExactScalar, as_exact
from .systems import TorusSystem, UncertifiableParameters, product_rotation, rotation
from .torus_sets import TorusSet

__all__ = [
    "RationalRotation",
    "UnachievableCoverage",
    "WrapViolation",
    "Tower",
    "rotation_tower",
    "product_tower",
    "suspension_tower",
    "tower_from_base",
    "verify_tower",
    "TowerReport",
    "min_return_distance",
    "tower_integral_identity",
]


class RationalRotation(ValueError):
    """A rotation by a rational angle is periodic and has no tall towers."""


class UnachievableCoverage(ValueError):
    def __init__(self, achieved, target):
        super().__init__(f"coverage {float(achieved):.6f} is below the target {float(target):.6f}")
        self.achieved = achieved
        self.target = target


class WrapViolation(ValueError):
    """The flow chart would wrap around the torus (gamma * L > 1)."""


def min_return_distance(theta: ExactScalar, N: int) -> tuple[ExactScalar, int]:
    """min over 0 < j < N of ||j theta|| with its argmin (exact)."""
    best, arg = ExactScalar(1), 0
    for j in range(1, N):
        v = (theta * j).dist_to_int()
        if v < best:
            best, arg = v, j
    return best, arg


@dataclass
class Tower:
    """A tower with exact data.

    ``kind`` is ``discrete`` (levels are translates of ``base`` by ``j . theta``)
    or ``suspension`` (``base`` is the transversal circle, ``heights`` the side
    lengths L_i of the flow box).
    """

    kind: str
    base: TorusSet
    heights: tuple
    system: TorusSystem
    coverage: ExactScalar
    meets_target: bool = True
    target: ExactScalar | None = None
    factors: tuple = ()  # per-axis one-dimensional bases of a product tower
    verified: bool = False

    def level(self, j: Sequence[int]) -> TorusSet:
        """T^j B, materialised on demand."""
        if self.kind != "discrete":
            raise ValueError("levels are indexed by integers only for discrete towers")
        j = tuple(j) if isinstance(j, (list, tuple)) else (j,)
        shift = [sum((row[i] * j[i] for i in range(self.system.d)), ExactScalar(0)) for row in self.system.matrix]
        return self.base.translate(shift)

    def axis_levels(self, axis: int, js: Sequence[int]) -> TorusSet:
        """Union of the one-dimensional factor levels on a product torus axis."""
        theta = self.system.matrix[axis][axis]
        out = TorusSet.empty(1)
        for j in js:
            out = out | self.factors[axis].translate(theta * j)
        return out

    def flow_image(self, ranges: Sequence[tuple]) -> TorusSet:
        """U_Q B for a parameter box Q = prod [p_i, q_i) inside the tower."""
        if self.kind != "suspension":
            raise ValueError("flow images exist for suspension towers only")
        g = self.system.gamma
        for (p, q), L in zip(ranges, self.heights):
            if as_exact(p) < 0 or as_exact(q) > L:
                raise ValueError("parameter box leaves the tower")
        boxes = [(g * as_exact(p), g * as_exact(q)) for p, q in ranges]
        if len(ranges) < self.system.d:
            boxes += [(ExactScalar(0), g * L) for L in self.heights[len(ranges):]]
        return TorusSet.box(*boxes, (0, 1))

    @property
    def Y(self) -> TorusSet:
        if self.kind == "suspension":
            return self.flow_image([(0, L) for L in self.heights])
        out = TorusSet.empty(self.base.dim)
        for j in cartesian(*(range(n) for n in self.heights)):
            out = out | self.level(j)
        return out

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "base": self.base.to_json(),
            "heights": [str(h) for h in self.heights],
            "coverage": str(self.coverage),
            "coverage_float": float(self.coverage),
            "meets_target": self.meets_target,
            "target": None if self.target is None else str(self.target),
            "verified": self.verified,
            "system": self.system.describe(),
        }


def _check_irrational(theta: ExactScalar) -> None:
    if theta.is_rational():
        raise RationalRotation(f"rotation angle {theta} is rational")


def rotation_tower(theta, N: int, delta=None, *, strict: bool = False) -> Tower:
    """Tower of height N for x -> x + theta with base [0, min_{0<j<N} ||j theta||)."""
    try:
        th = as_exact(theta)
    except (TypeError, ValueError) as exc:
        raise UncertifiableParameters(str(exc)) from exc
    _check_irrational(th)
    if N < 1:
        raise ValueError("tower height must be >= 1")
    eps, _ = min_return_distance(th, N)
    base = TorusSet.interval(0, eps)
    coverage = eps * N
    target = None if delta is None else 1 - as_exact(delta)
    meets = True if target is None else coverage >= target
    if strict and not meets:
        raise UnachievableCoverage(coverage, target)
    return Tower("discrete", base, (N,), rotation(th), coverage, meets, target, factors=(base,))


def product_tower(thetas: Sequence, Ns: Sequence[int], delta=None, *, strict: bool = False) -> Tower:
    """Product of one-dimensional rotation towers on independent circle factors."""
    if len(thetas) != len(Ns):
        raise ValueError("one height per rotation angle")
    parts = [rotation_tower(t, n) for t, n in zip(thetas, Ns)]
    base = TorusSet.product([p.base for p in parts])
    coverage = ExactScalar(1)
    for p in parts:
        coverage = coverage * p.coverage
    target = None if delta is None else 1 - as_exact(delta)
    meets = True if target is None else coverage >= target
    if strict and not meets:
        raise UnachievableCoverage(coverage, target)
    system = product_rotation([p.system.matrix[0][0] for p in parts])
    return Tower("discrete", base, tuple(Ns), system, coverage, meets, target, factors=tuple(p.base for p in parts))


def tower_from_base(system: TorusSystem, base: TorusSet, heights: Sequence[int]) -> Tower:
    """Candidate tower from an arbitrary base; its coverage assumes disjointness."""
    n = 1
    for h in heights:
        n *= h
    return Tower("discrete", base, tuple(heights), system, base.measure * n)


def suspension_tower(system: TorusSystem, L: Sequence) -> Tower:
    """Flow tower over the circle fiber {(0, ..., 0, x)} of a canonical suspension."""
    if system.kind != "suspension" or system.gamma is None:
        raise ValueError("flow towers need a canonical suspension")
    if len(L) != system.d:
        raise ValueError("one side length per flow direction")
    g = system.gamma
    Ls = tuple(as_exact(v) for v in L)
    for v in Ls:
        if v.sign() <= 0:
            raise ValueError("side lengths must be positive")
        if g * v > 1:
            raise WrapViolation(f"gamma * L = {g * v} exceeds 1")
    fiber = TorusSet.interval(0, 1)  # the transversal circle
    coverage = ExactScalar(1)
    for v in Ls:
        coverage = coverage * g * v
    return Tower("suspension", fiber, Ls, system, coverage)


# -- verification ------------------------------------------------------------


@dataclass
class TowerReport:
    disjoint: bool
    coverage: ExactScalar
    union_measure: ExactScalar | None
    pairs_total: int
    pairs_compared: int
    witness: tuple | None = None
    injective: bool | None = None
    spot_checks: int = 0
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "disjoint": self.disjoint,
            "coverage": str(self.coverage),
            "coverage_float": float(self.coverage),
            "union_measure": None if self.union_measure is None else str(self.union_measure),
            "pairs_total": self.pairs_total,
            "pairs_compared": self.pairs_compared,
            "witness": None if self.witness is None else [list(w) for w in self.witness],
            "injective": self.injective,
            "spot_checks": self.spot_checks,
            "notes": self.notes,
        }


def _sweep_disjoint(items: list) -> tuple[int, tuple | None]:
    """Sweep on the first coordinate over (level, box) items; returns (pairs compared, witness)."""
    items.sort(key=lambda it: it[1][0][0])
    active: list = []
    compared = 0
    for lvl, box in items:
        lo0 = box[0][0]
        active = [a for a in active if a[1][0][1] > lo0]
        for olvl, obox in active:
            if olvl == lvl:
                continue
            compared += 1
            if all(a_lo < b_hi and b_lo < a_hi for (a_lo, a_hi), (b_lo, b_hi) in zip(box, obox)):
                return compared, (olvl, lvl)
        active.append((lvl, box))
    return compared, None


def verify_tower(tower: Tower, *, spot_checks: int = 10_000, seed: int = 0) -> TowerReport:
    """Exact disjointness and coverage of a tower; reports violations, never raises.

    Level boxes are swept in exact order of their first coordinate; only
    pairs whose first-coordinate intervals overlap are compared in full, and
    the sweep certifies every other pair as disjoint.
    """
    if tower.kind == "suspension":
        return _verify_suspension(tower, spot_checks, seed)
    levels = list(cartesian(*(range(n) for n in tower.heights)))
    total_pairs = len(levels) * (len(levels) - 1) // 2
    items = []
    union_measure = ExactScalar(0)
    for j in levels:
        lvl = tower.level(j)
        union_measure = union_measure + lvl.measure
        items.extend((j, box) for box in lvl.boxes)
    compared, witness = _sweep_disjoint(items)
    disjoint = witness is None
    report = TowerReport(disjoint, tower.coverage, union_measure if disjoint else None, total_pairs,
                         compared, witness)
    if disjoint:
        if union_measure != tower.coverage:
            report.notes.append("union measure differs from the stated coverage")
            report.disjoint = False
        tower.verified = report.disjoint
    else:
        tower.verified = False
    return report


def _verify_suspension(tower: Tower, spot_checks: int, seed: int) -> TowerReport:
    system = tower.system
    g = system.gamma
    notes = []
    d = system.d
    # symbolic: the first d coordinates are gamma * t with t in [0, L), no wrap,
    # so they determine t; the last coordinate then determines x
    shape_ok = all(
        (system.matrix[i][j] == g) if i == j else not system.matrix[i][j] for i in range(d) for j in range(d)
    )
    nowrap = all(g * L <= 1 for L in tower.heights)
    injective = bool(shape_ok and nowrap and g.sign() > 0)
    if not shape_ok:
        notes.append("translation matrix is not in canonical form")
    if not nowrap:
        notes.append("gamma * L exceeds 1")
    rng = np.random.default_rng(seed)
    theta = system.theta
    Lf = np.array([float(v) for v in tower.heights])
    x = rng.random(spot_checks)
    t = rng.random((spot_checks, d)) * Lf
    img = np.empty((spot_checks, d + 1))
    img[:, :d] = np.mod(t * theta[np.arange(d), np.arange(d)], 1.0)
    img[:, d] = np.mod(x + t @ theta[d], 1.0)
    # invert the chart and compare with the inputs
    t_back = img[:, :d] / float(g)
    x_back = np.mod(img[:, d] - t_back @ theta[d], 1.0)
    dx = np.abs(x_back - x)
    dx = np.minimum(dx, 1 - dx)
    spot_ok = bool(np.all(np.abs(t_back - t) < 1e-9) and np.all(dx < 1e-9))
    if not spot_ok:
        notes.append("spot check found a chart collision")
    ok = injective and spot_ok
    tower.verified = ok
    return TowerReport(ok, tower.coverage, tower.Y.measure, 0, 0, None, ok, spot_checks, notes)


def tower_integral_identity(tower: Tower, S: TorusSet) -> tuple[ExactScalar, ExactScalar]:
    """Both sides of the flow-tower integral formula for the indicator of S.

    Left: mu(S intersect Y).  Right: the transversal measure gamma^d Leb on
    the fiber times the parameter integral over the tower box; for a box
    indicator the fiber integral equals the box width in the last
    coordinate for every t, which leaves an interval product.
    """
    if tower.kind != "suspension":
        raise ValueError("the formula concerns flow towers")
    g = tower.system.gamma
    d = tower.system.d
    left = S.intersection(tower.Y).measure
    right = ExactScalar(0)
    for box in S.boxes:
        vol = ExactScalar(1)
        for i in range(d):
            lo, hi = box[i]
            # t in [0, L) with gamma t in [lo, hi)
            a = lo / g
            b = hi / g
            L = tower.heights[i]
            a = a if a >= 0 else ExactScalar(0)
            b = b if b <= L else L
            vol = vol * (b - a if b > a else ExactScalar(0))
        lo, hi = box[d]
        right = right + (g**d) * vol * (hi - lo)
    return left, right
