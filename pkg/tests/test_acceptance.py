"""Acceptance criteria, one test each, with independent oracles where possible."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from movavg.averaging import (
    batch_box_averages,
    batch_box_sums,
    composition_defect,
    convergence_experiment,
    discrete_box_average,
    discrete_box_sum,
)
from movavg.cone_geometry import condition_verdict, cross_section, explicit_family, generate_family
from movavg.exact import GOLDEN, ExactScalar, exact_sqrt, parse_exact
from movavg.submanifold import (
    character_flat_average,
    flat_piece,
    genericity_failure_experiment,
    jacobian_check,
    reduction_check,
)
from movavg.sweepout import build_counterexample_set, oscillation_scan, ratio_check, sweepout_plan
from movavg.systems import Character, Indicator, TrigPoly, canonical_suspension, flow, product_rotation, rotation
from movavg.torus_sets import TorusSet
from movavg.towers import product_tower, rotation_tower, suspension_tower, tower_from_base, verify_tower

HALF = Indicator(TorusSet.interval(0, Fraction(1, 2)))


def _cone_count_oracle(n, l, alpha: Fraction, lam: int) -> int:
    """Integer x with q|x - n_k| <= p(lam - l_k) for some k, by a dense boolean grid."""
    n = np.asarray(n, dtype=np.int64)
    l = np.asarray(l, dtype=np.int64)
    keep = l <= lam
    if not keep.any():
        return 0
    n, l = n[keep], l[keep]
    reach = int(math.ceil(alpha * lam))
    xs = np.arange(n.min() - reach, n.max() + reach + 1, dtype=np.int64)
    p, q = alpha.numerator, alpha.denominator
    hit = (q * np.abs(xs[:, None] - n[None, :]) <= p * (lam - l[None, :])).any(axis=1)
    return int(hit.sum())


def test_c1_cone_oracle_equivalence(criterion):
    rng = np.random.default_rng(1)
    alphas = [Fraction(1, 2), Fraction(1), Fraction(2)]
    mismatches, elapsed = 0, 0.0
    for _ in range(200):
        K = int(rng.integers(1, 51))
        n = rng.integers(-60, 61, size=K)
        l = rng.integers(1, 61, size=K)
        fam = explicit_family([(int(a), int(b)) for a, b in zip(n, l)])
        for a in alphas:
            for lam in range(1, 51):
                t0 = time.perf_counter()
                size = cross_section(fam, 1, a, lam, with_intervals=False).size
                elapsed += time.perf_counter() - t0
                mismatches += size != _cone_count_oracle(n, l, a, lam)
    criterion("C1 cone oracle equivalence", mismatches == 0 and elapsed < 10,
              f"mismatches={mismatches}, cross_section time {elapsed:.2f}s")


def test_c2_dichotomy_examples(criterion):
    ok, notes = True, []
    for r in (1, 2, 3):
        fam = generate_family(f"linear:r={r}", 2000)
        v = condition_verdict(fam, 1)
        # oracle: the k=1 interval contains all the others, so the size is 2(lam - r) + 1
        sizes = [cross_section(fam, 1, 1, lam, with_intervals=False).size for lam in range(1, 501)]
        expect = [max(2 * (lam - r) + 1, 0) if lam >= r else 0 for lam in range(1, 501)]
        max_ratio = max(s / lam for s, lam in zip(sizes, range(1, 501)))
        this = v.verdict == "Holds" and sizes == expect and max_ratio <= 4
        notes.append(f"r={r}: {v.verdict}, max ratio {max_ratio:.3f}")
        ok &= this
    fam = generate_family("sqrt", 10_000)
    v = condition_verdict(fam, 1)
    lams = list(range(10, 101))
    sizes = [cross_section(fam, 1, 1, lam, with_intervals=False).size for lam in lams]
    spot = all(sizes[i] == _cone_count_oracle(*map(np.array, zip(*[(c[0], ln[0]) for c, ln in fam.entries[: lams[i] ** 2]])),
                                             Fraction(1), lams[i]) for i in (0, 40, 90))
    expo = float(np.polyfit(np.log(lams), np.log(sizes), 1)[0])
    ok &= v.verdict == "FailsEmpirically" and expo >= 1.5 and spot
    notes.append(f"sqrt: {v.verdict}, exponent {expo:.3f}")
    criterion("C2 dichotomy examples", ok, "; ".join(notes))


def test_c3_convergence_golden(criterion):
    fam = generate_family("linear:r=1", 10_000)
    t0 = time.perf_counter()
    rep = convergence_experiment(rotation("golden"), HALF, fam, 100, seed=0)
    dt = time.perf_counter() - t0
    assert rep.mean == ExactScalar(Fraction(1, 2))
    # spot check one sample at k = 10^4 against the naive sum
    x = np.random.default_rng(0).random((100, 1))[int(rep.argmax_samples[-1])]
    naive = discrete_box_average(rotation("golden"), HALF, x, fam.entries[-1])
    agree = abs(abs(naive - 0.5) - rep.final_deviation) < 1e-12
    criterion("C3 golden convergence", rep.final_deviation <= 0.05 and dt < 30 and agree,
              f"deviation at k=1e4 {rep.final_deviation:.2e}, {dt:.2f}s")


@pytest.mark.parametrize("d", [1, 2, 3])
def test_c4_batch_kernel(criterion, d):
    rng = np.random.default_rng(10 + d)
    angles = {1: ["golden"], 2: ["golden", "sqrt2m1"], 3: ["golden", "sqrt2m1", "sqrt(3)-1"]}[d]
    system = product_rotation(angles)
    ind = Indicator(TorusSet.box(*([(0, "1/2")] * d)))
    worst, count_ok = 0.0, True
    for _ in range(50):
        K = int(rng.integers(1, 6))
        boxes = [(tuple(int(v) for v in rng.integers(-30, 30, size=d)),
                  tuple(int(v) for v in rng.integers(1, {1: 40, 2: 12, 3: 6}[d], size=d))) for _ in range(K)]
        pts = rng.random((3, d))
        freq = tuple(int(v) for v in rng.integers(-3, 4, size=d))
        batch = batch_box_averages(system, Character(freq), pts, boxes)
        counts = batch_box_sums(system, ind, pts, boxes)
        for i, x in enumerate(pts):
            for j, b in enumerate(boxes):
                worst = max(worst, abs(batch[i, j] - discrete_box_average(system, Character(freq), x, b)))
                count_ok &= int(counts[i, j]) == discrete_box_sum(system, ind, x, b)
    criterion(f"C4 batch kernel d={d}", worst <= 1e-12 and count_ok, f"max char error {worst:.1e}, counts exact={count_ok}")


def test_c5_composition(criterion):
    system = rotation("golden")
    h_box = ((0,), (4,))
    # oracle for the run constant: sum over shifts s=0..3 of 2|s|, divided by |h-box|
    C = Fraction(2 * (0 + 1 + 2 + 3), 4)
    worst, consts = 0.0, set()
    x = np.array([0.3])
    for k in range(1, 1001):
        rep = composition_defect(system, HALF, x, ((k,), (k,)), h_box)
        worst = max(worst, rep.defect * k)
        consts.add(round(rep.constant, 12))
        assert rep.numerators_equal
    flat = composition_defect(system, TrigPoly.constant(0.7, 1), x, ((50,), (50,)), h_box)
    ok = worst <= float(C) and max(consts) <= float(C) + 1e-12 and flat.defect == 0
    criterion("C5 composition defect", ok, f"max defect*l_k {worst:.4f} <= {float(C)}, constant defect {flat.defect}")


def test_c6_tower_exactness(criterion):
    tower = rotation_tower("golden", 5)
    expect = 5 * (3 * GOLDEN).dist_to_int()
    rep = verify_tower(tower)
    levels = [tower.level(j) for j in range(5)]
    pairs = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    all_disjoint = all(levels[i].isdisjoint(levels[j]) for i, j in pairs)
    bad = tower_from_base(tower.system, TorusSet.interval(0, 2 * tower.base.measure), (5,))
    bad_rep = verify_tower(bad)
    ok = (tower.coverage == expect == parse_exact("(35-15*sqrt(5))/2") and abs(float(expect) - 0.72949) < 1e-5
          and rep.disjoint and rep.pairs_total == 10 and len(pairs) == 10 and all_disjoint
          and not bad_rep.disjoint and bad_rep.witness is not None)
    criterion("C6 tower exactness", ok, f"coverage {tower.coverage} = {float(tower.coverage):.5f}, witness {bad_rep.witness}")


@pytest.mark.parametrize("p", [1, 2, 3])
def test_c7_sweepout_ratio(criterion, p):
    t0 = time.perf_counter()
    fam = generate_family("squares_unit", 1000)
    plan = sweepout_plan(fam, 1, p)
    tower = product_tower(["golden"], [plan.heights[0]])
    sets = build_counterexample_set(plan, tower)
    rc = ratio_check(sets, fam)
    ratio = sets.swept.measure / sets.H.measure
    # oracle: disjoint translates of one level give |Delta| / (4 lam + 1)
    oracle = Fraction(plan.delta_size, 4 * plan.lam + 1)
    scan = oscillation_scan(tower.system, sets.H, fam.prefix(4 * plan.K), 1000, (1, plan.K), seed=0, eps=0.05)
    dt = time.perf_counter() - t0
    ok = (ratio >= p and ratio.is_rational() and ratio.to_fraction() == oracle and rc["containment"]
          and rc["mu_H_formula_holds"] and scan["exact_one_found"] and scan["fraction_min_le_eps"] == 1.0
          and dt < 10)
    criterion(f"C7 sweepout ratio p={p}", ok,
              f"ratio {ratio} (oracle {oracle}), exact hit {scan['exact_one_found']}, {dt:.2f}s")


@pytest.mark.parametrize("p", [1, 2, 3])
def test_c8_continuous_tower(criterion, p):
    fam = generate_family("flat_boxes:m=1", 200)
    plan = sweepout_plan(fam, 1, p, pad=False)
    L = [ExactScalar(plan.heights[0]), 3 * ExactScalar(plan.heights[1])]
    gamma = 1 / max(L[0], L[1])
    system = canonical_suspension(gamma, [gamma * exact_sqrt(2), gamma * exact_sqrt(3)])
    tower = suspension_tower(system, L)
    sets = build_counterexample_set(plan, tower)
    # oracle: the flow box has measure gamma^2 L_1 L_2 (fibre of length 1)
    mu_Y = gamma * gamma * L[0] * L[1]
    expect = 4 * plan.lam / L[0] * mu_Y
    ok = gamma * L[0] <= 1 and tower.Y.measure == mu_Y and sets.H.measure == expect
    criterion(f"C8 continuous H measure p={p}", ok, f"mu(H) {sets.H.measure} vs {expect}")


def test_c9_submanifold_reduction(criterion):
    rng = np.random.default_rng(9)
    worst_char, worst_closed, ind_exact = 0.0, 0.0, True
    irr = [exact_sqrt(2), exact_sqrt(3), exact_sqrt(5), exact_sqrt(7)]
    for trial in range(100):
        mat = [[irr[int(rng.integers(4))] * Fraction(int(rng.integers(1, 5)), 8) + Fraction(int(rng.integers(0, 4)), 7)
                for _ in range(2)] for _ in range(3)]
        system = flow(mat)
        u = [Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4))) for _ in range(2)]
        v = [Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4))) for _ in range(2)]
        if u[0] * v[1] - u[1] * v[0] == 0:
            u, v = [1, 0], [Fraction(int(rng.integers(-3, 4))), 1]
        piece = flat_piece(u, [v])
        t = Fraction(int(rng.integers(1, 40)), int(rng.integers(1, 5)))
        x = [Fraction(int(rng.integers(0, 100)), 100) for _ in range(3)]
        lo = [Fraction(int(rng.integers(0, 5)), 10) for _ in range(3)]
        S = TorusSet.box(*[(a, a + Fraction(int(rng.integers(1, 6)), 10)) for a in lo])
        r_ind = reduction_check(system, Indicator(S), x, piece, t)
        ind_exact &= r_ind["exact"] and r_ind["agree"]
        freq = tuple(int(f) for f in rng.integers(-2, 3, size=3))
        r_chr = reduction_check(system, Character(freq), [float(c) for c in x], piece, t)
        worst_char = max(worst_char, r_chr["difference"])
        rhs = complex(r_chr["rhs"])
        worst_closed = max(worst_closed, abs(rhs - character_flat_average(system, freq, [float(c) for c in x], piece, t)))
    # Jacobian factor on random rational V with an independent Fraction oracle
    jac_ok = True
    for _ in range(100):
        V = [[Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4))) for _ in range(3)] for _ in range(2)]
        G = [[sum(a * b for a, b in zip(V[i], V[j])) for j in range(2)] for i in range(2)]
        det = G[0][0] * G[1][1] - G[0][1] * G[1][0]
        if det == 0:
            continue
        a, b = V
        normal = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
        piece = flat_piece(normal, V)
        t = Fraction(int(rng.integers(1, 20)), int(rng.integers(1, 4)))
        left, right = jacobian_check(piece, t)
        jac_ok &= left == right and (right * right).to_fraction() == t ** 4 * det
    ok = worst_char <= 1e-8 and worst_closed <= 1e-8 and ind_exact and jac_ok
    criterion("C9 submanifold reduction", ok,
              f"char diff {worst_char:.1e}, closed form {worst_closed:.1e}, indicators exact={ind_exact}, jacobian={jac_ok}")


def test_c10_genericity_failure(criterion):
    t0 = time.perf_counter()
    rep = genericity_failure_experiment(flat_piece([1, 0], [[0, 1]]), Fraction(1, 10))
    dt = time.perf_counter() - t0
    best = rep.best.get("exact_average_float", rep.best["float_average"])
    ok = (rep.mu_E <= Fraction(1, 10) and best >= 0.95 and rep.lower_bound - float(rep.mu_E) >= 0.5
          and rep.success and dt < 120)
    criterion("C10 genericity failure", ok,
              f"mu(E)={rep.mu_E}, best average {best:.4f}, lower bound gap {rep.gap:.3f}, {dt:.1f}s")
