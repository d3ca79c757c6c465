"""Counterexample sets for families whose cone cross-sections grow too fast.

Given a family, an integer height ``lam`` and a prefix ``K`` with a large
cross-section ``Delta``, a tower of suitable height carries a thin set
``H`` (a band of top levels) and a slice ``F`` such that every translate
``T_1^{-z} F`` with ``z`` in ``Delta`` is mapped entirely into ``H`` by some
box of the family.  The measure of the union of those translates divided by
``mu(H)`` grows with the target ``p``; that is what is checked here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as cartesian
from typing import Sequence

import numpy as np

from .averaging import batch_box_averages, exact_point, sample_points
from .cone_geometry import BoxFamily, cross_section
from .exact import ExactScalar, as_exact
from .systems import Indicator, TorusSystem, act
from .torus_sets import TorusSet
from .towers import Tower, verify_tower

__all__ = [
    "NoWitness",
    "HeightMismatch",
    "SweepoutPlan",
    "sweepout_plan",
    "CounterexampleSets",
    "build_counterexample_set",
    "ratio_check",
    "oscillation_scan",
    "tower_heights",
]


class NoWitness(ValueError):
    """No probed height reaches the size threshold within the prefix."""


class HeightMismatch(ValueError):
    """The tower does not have the heights the plan asks for."""


@dataclass
class SweepoutPlan:
    p: int
    lam: int
    K: int
    delta: tuple  # merged intervals of the cross-section, exact endpoints
    delta_size: object  # count (discrete) or exact length (continuous)
    heights: tuple  # N_1..N_d or L_1..L_d
    mode: str
    axis: int = 1
    pad: bool = True
    alpha: Fraction = Fraction(1)

    @property
    def threshold(self):
        return self.p * (4 * self.lam + 1) if self.mode == "discrete" else 4 * self.p * self.lam

    def delta_points(self) -> list[int]:
        if self.mode != "discrete":
            raise ValueError("a continuous cross-section is not a finite set")
        return [z for lo, hi in self.delta for z in range(lo, hi + 1)]

    @property
    def sup_delta(self):
        return self.delta[-1][1]

    def witnesses(self, family: BoxFamily) -> dict:
        """z -> an index k <= K with |z - n_k| <= lam - l_k (discrete)."""
        i = self.axis - 1
        out = {}
        pairs = [(k + 1, c[i], ln[i]) for k, (c, ln) in enumerate(family.entries[: self.K])]
        for z in self.delta_points():
            out[z] = next((k for k, n, l in pairs if l <= self.lam and abs(z - n) <= self.lam - l), None)
        return out

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "lambda": self.lam,
            "K": self.K,
            "mode": self.mode,
            "axis": self.axis,
            "pad": self.pad,
            "delta": [[str(a), str(b)] for a, b in self.delta],
            "delta_size": str(self.delta_size),
            "threshold": str(self.threshold),
            "heights": [str(h) for h in self.heights],
        }


def _size(family: BoxFamily, axis: int, lam, K: int):
    return cross_section(family.prefix(K), axis, 1, lam, with_intervals=False).size


def sweepout_plan(family: BoxFamily, axis: int = 1, p: int = 1, pad: bool = True,
                  lambdas: Sequence[int] | None = None) -> SweepoutPlan:
    """Smallest probed integer height and prefix whose cross-section reaches the threshold.

    Thresholds: ``p (4 lam + 1)`` lattice points (discrete) or length
    ``4 p lam`` (continuous).  Heights ascend through ``lambdas`` (default
    1..64); for each, the least prefix is found by bisection, which is valid
    because the size is monotone in the prefix length.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    lambdas = list(lambdas) if lambdas is not None else list(range(1, 65))
    discrete = family.mode == "discrete"
    for lam in lambdas:
        need = p * (4 * lam + 1) if discrete else 4 * p * lam
        if _size(family, axis, lam, family.K) < need:
            continue
        lo, hi = 1, family.K
        while lo < hi:
            mid = (lo + hi) // 2
            if _size(family, axis, lam, mid) >= need:
                hi = mid
            else:
                lo = mid + 1
        cs = cross_section(family.prefix(lo), axis, 1, lam)
        heights = tower_heights(family, axis, lam, lo, cs.intervals, pad and discrete)
        return SweepoutPlan(p, lam, lo, cs.intervals, cs.size, heights, family.mode, axis, pad and discrete)
    raise NoWitness(
        f"no height in {lambdas[0]}..{lambdas[-1]} reaches the threshold within K={family.K}; enlarge the prefix"
    )


def tower_heights(family: BoxFamily, axis: int, lam, K: int, delta: tuple, pad: bool) -> tuple:
    """N_1 = 2 lam + sup Delta (+1 with padding); N_j = max_k |n_kj + l_kj| otherwise."""
    i = axis - 1
    sup = delta[-1][1]
    first = 2 * lam + sup + (1 if pad else 0)
    out = []
    for j in range(family.d):
        if j == i:
            out.append(first)
        else:
            out.append(max(abs(c[j] + ln[j]) for c, ln in family.entries[:K]))
    return tuple(out)


# -- the sets ----------------------------------------------------------------


@dataclass
class CounterexampleSets:
    H: TorusSet
    F: TorusSet | None  # a positive-measure slice (discrete) or None for a flow
    swept: TorusSet  # union over z in Delta of the translates of F
    plan: SweepoutPlan
    tower: Tower
    mu_H_formula: ExactScalar
    swept_disjoint: bool
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "H": self.H.to_json(),
            "F": None if self.F is None else self.F.to_json(),
            "swept_measure": str(self.swept.measure),
            "mu_H": str(self.H.measure),
            "mu_H_formula": str(self.mu_H_formula),
            "swept_disjoint": self.swept_disjoint,
            "notes": self.notes,
        }


def build_counterexample_set(plan: SweepoutPlan, tower: Tower, system: TorusSystem | None = None) -> CounterexampleSets:
    """H = band of the 4 lam + 1 top levels on the first axis, F = one middle slice.

    Discrete plans need a verified product tower of heights (N_1, 3 N_2, ...).
    Continuous plans need a flow tower of side lengths (L_1, 3 L_2, ...).
    """
    d = len(plan.heights)
    expected = tuple(plan.heights[i] * (1 if i == plan.axis - 1 else 3) for i in range(d))
    if tuple(as_exact(h) for h in tower.heights) != tuple(as_exact(h) for h in expected):
        raise HeightMismatch(f"tower heights {tower.heights} differ from the plan's {expected}")
    if plan.mode == "discrete":
        return _discrete_sets(plan, tower)
    return _flow_sets(plan, tower)


def _discrete_sets(plan: SweepoutPlan, tower: Tower) -> CounterexampleSets:
    if tower.kind != "discrete" or len(tower.factors) != tower.system.d:
        raise ValueError("discrete plans need a product rotation tower")
    if not tower.verified:
        rep = verify_tower(tower)
        if not rep.disjoint:
            raise ValueError("tower failed verification")
    a = plan.axis - 1
    lam = plan.lam
    d = tower.system.d
    N = plan.heights
    H_axes, F_axes = [], []
    for i in range(d):
        if i == a:
            H_axes.append(tower.axis_levels(i, range(N[i] - 4 * lam - 1, N[i])))
            F_axes.append(tower.axis_levels(i, [N[i] - 2 * lam - 1]))
        else:
            H_axes.append(tower.axis_levels(i, range(0, 3 * N[i])))
            F_axes.append(tower.axis_levels(i, range(N[i], 2 * N[i])))
    H = TorusSet.product(H_axes)
    F = TorusSet.product(F_axes)
    theta = tower.system.matrix[a][a]
    swept_axis = TorusSet.empty(1)
    total = ExactScalar(0)
    for z in plan.delta_points():
        piece = F_axes[a].translate(-theta * z)
        total = total + piece.measure
        swept_axis = swept_axis | piece
    swept = TorusSet.product([swept_axis if i == a else F_axes[i] for i in range(d)])
    disjoint = swept_axis.measure == total
    mu_formula = tower.base.measure * (3 ** (d - 1)) * (4 * lam + 1)
    for i in range(d):
        if i != a:
            mu_formula = mu_formula * N[i]
    notes = [] if disjoint else ["translates of F overlap; the union measure is used as the bound"]
    return CounterexampleSets(H, F, swept, plan, tower, mu_formula, disjoint, notes)


def _flow_sets(plan: SweepoutPlan, tower: Tower) -> CounterexampleSets:
    if tower.kind != "suspension":
        raise ValueError("continuous plans need a flow tower")
    a = plan.axis - 1
    lam = as_exact(plan.lam)
    g = tower.system.gamma
    L = [as_exact(h) for h in plan.heights]
    ranges = []
    for i in range(len(L)):
        ranges.append((L[i] - 4 * lam, L[i]) if i == a else (ExactScalar(0), 3 * L[i]))
    H = tower.flow_image(ranges)
    # F is the null slice t_a = L_a - 2 lam; its translates by -z e_a for z in
    # Delta sweep t_a over L_a - 2 lam - Delta
    boxes = []
    for lo, hi in plan.delta:
        t_lo, t_hi = L[a] - 2 * lam - hi, L[a] - 2 * lam - lo
        if t_lo < 0 or t_hi > L[a]:
            raise ValueError("swept slice leaves the tower")
        boxes.append([(t_lo, t_hi) if i == a else (L[i], 2 * L[i]) for i in range(len(L))])
    swept = TorusSet.empty(tower.system.m)
    for b in boxes:
        swept = swept | tower.flow_image(b)
    mu_formula = (4 * lam / L[a]) * tower.Y.measure
    return CounterexampleSets(H, None, swept, plan, tower, mu_formula, True,
                              ["the middle slice is a null set; its swept union is used directly"])


# -- the ratio ---------------------------------------------------------------


def _containment(sets: CounterexampleSets, family: BoxFamily) -> tuple[bool, list]:
    """Exact check that T^j T_1^{-z} F lies in H for every j in the witnessing box.

    Works factor by factor on the product torus, where both sides are
    products of one-dimensional sets.
    """
    plan, tower = sets.plan, sets.tower
    a = plan.axis - 1
    d = tower.system.d
    N = plan.heights
    lam = plan.lam
    H_axes = [tower.axis_levels(i, range(N[i] - 4 * lam - 1, N[i]) if i == a else range(0, 3 * N[i])) for i in range(d)]
    F_axes = [tower.axis_levels(i, [N[i] - 2 * lam - 1] if i == a else range(N[i], 2 * N[i])) for i in range(d)]
    failures = []
    for z, k in plan.witnesses(family).items():
        if k is None:
            failures.append((z, None))
            continue
        corner, lengths = family.entries[k - 1]
        ok = True
        for i in range(d):
            theta = tower.system.matrix[i][i]
            shift0 = -z if i == a else 0
            for j in range(corner[i], corner[i] + lengths[i]):
                if not F_axes[i].translate(theta * (j + shift0)).issubset(H_axes[i]):
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            failures.append((z, k))
    return not failures, failures


def ratio_check(sets: CounterexampleSets, family: BoxFamily, *, eps: float = 0.05, samples: int = 20_000,
                seed: int = 0, containment: bool = True) -> dict:
    """mu(union of swept slices) / mu(H) against p / 3^(d-1), with cross-checks."""
    plan = sets.plan
    d = len(plan.heights)
    muH = sets.H.measure
    swept = sets.swept.measure
    ratio = swept / muH
    bound3 = ExactScalar(Fraction(plan.p, 3 ** (d - 1)))
    report = {
        "mu_H": str(muH),
        "mu_H_float": float(muH),
        "mu_H_formula_holds": muH == sets.mu_H_formula,
        "swept_measure": str(swept),
        "swept_measure_float": float(swept),
        "swept_disjoint": sets.swept_disjoint,
        "ratio": str(ratio),
        "ratio_float": float(ratio),
        "bound": str(bound3),
        "ratio_ge_bound": ratio >= bound3,
    }
    if plan.mode != "discrete":
        bound2 = ExactScalar(Fraction(plan.p, 2 ** (d - 1)))
        report["bound_alt"] = str(bound2)
        report["ratio_ge_bound_alt"] = ratio >= bound2
        return report
    system = sets.tower.system
    if containment:
        ok, failures = _containment(sets, family)
        report["containment"] = ok
        report["containment_failures"] = [list(f) for f in failures[:10]]
    if samples:
        pts = sample_points(system.m, samples, seed)
        boxes = list(family.entries[: plan.K])
        avgs = batch_box_averages(system, Indicator(sets.H), pts, boxes)
        frac = float(np.mean(avgs.max(axis=1) > 1 - eps))
        report["maximal_level_set_estimate"] = frac
        report["sampling_consistent"] = float(swept) <= frac + 1e-2
    return report


# -- oscillation -------------------------------------------------------------


def oscillation_scan(system: TorusSystem, S: TorusSet, family: BoxFamily, sample_count: int = 1000,
                     window: tuple | None = None, seed: int = 0, eps: float = 0.05,
                     exact_recheck: int = 5) -> dict:
    """Averages of the indicator of S along k for seeded samples.

    ``window`` = (k_lo, k_hi) is the construction window; the report gives
    per-sample max inside it, min outside it (over the whole prefix), and
    rechecks exactly the first few samples whose float average is 1.
    """
    K = family.K
    lo, hi = window if window is not None else (1, K)
    pts = sample_points(system.m, sample_count, seed)
    avgs = batch_box_averages(system, Indicator(S), pts, list(family.entries))
    ks = np.arange(1, K + 1)
    inside = (ks >= lo) & (ks <= hi)
    max_in = avgs[:, inside].max(axis=1) if inside.any() else np.zeros(sample_count)
    min_out = avgs[:, ~inside].min(axis=1) if (~inside).any() else np.full(sample_count, np.nan)
    report = {
        "mu_set": str(S.measure),
        "mu_set_float": float(S.measure),
        "sample_count": sample_count,
        "seed": seed,
        "window": [int(lo), int(hi)],
        "eps": eps,
        "fraction_max_ge_1_minus_eps": float(np.mean(max_in >= 1 - eps)),
        "fraction_min_le_eps": float(np.mean(min_out <= eps)) if (~inside).any() else None,
        "overall_max": float(avgs.max()),
        "overall_min": float(avgs.min()),
    }
    exact_hits = []
    if exact_recheck:
        hit_rows, hit_cols = np.nonzero(avgs[:, inside] == 1.0)
        kin = ks[inside]
        seen = set()
        for r, c in zip(hit_rows, hit_cols):
            if r in seen:
                continue
            seen.add(r)
            k = int(kin[c])
            corner, lengths = family.entries[k - 1]
            x = exact_point(pts[r])
            ok = all(
                S.contains_exact(act(system, list(x), list(j)))
                for j in cartesian(*(range(c0, c0 + l0) for c0, l0 in zip(corner, lengths)))
            )
            exact_hits.append({"sample": int(r), "k": k, "exact_value_one": ok,
                               "point": [str(v) for v in x]})
            if len(exact_hits) >= exact_recheck:
                break
    report["exact_hits"] = exact_hits
    report["exact_one_found"] = any(h["exact_value_one"] for h in exact_hits)
    return report
