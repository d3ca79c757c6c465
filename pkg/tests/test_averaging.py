from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from movavg.averaging import (
    BudgetExceeded,
    batch_box_averages,
    batch_box_sums,
    character_box_average,
    composition_defect,
    continuous_box_average,
    discrete_box_average,
    discrete_box_sum,
    exact_indicator_box_average,
    exact_indicator_segment_average,
    maximal_average,
    tensor_midpoint,
)
from movavg.cone_geometry import generate_family
from movavg.exact import ExactScalar, exact_sqrt
from movavg.systems import Character, Indicator, TrigPoly, canonical_suspension, flow, product_rotation, rotation
from movavg.torus_sets import TorusSet

GOLD = rotation("golden")
HALF = Indicator(TorusSet.interval(0, Fraction(1, 2)))
SUSP = canonical_suspension(Fraction(1, 8), [exact_sqrt(2) / 8])

boxes1 = st.tuples(st.tuples(st.integers(-50, 50)), st.tuples(st.integers(1, 60)))
unit = st.floats(0, 1, exclude_max=True)


def test_naive_sum_exact_count():
    # three-distance style check: 10 orbit points of 0 under the golden rotation
    thetas = [(k * (5 ** 0.5 - 1) / 2) % 1 for k in range(10)]
    assert discrete_box_sum(GOLD, HALF, [0.0], ((0,), (10,))) == sum(t < 0.5 for t in thetas)


@settings(max_examples=60, deadline=None)
@given(unit, st.lists(boxes1, min_size=1, max_size=5))
def test_positivity_normalisation_domination(x, boxes):
    small = Indicator(TorusSet.interval(0, Fraction(1, 4)))
    a = batch_box_averages(GOLD, HALF, [[x]], boxes)
    b = batch_box_averages(GOLD, small, [[x]], boxes)
    one = batch_box_averages(GOLD, TrigPoly.constant(1.0, 1), [[x]], boxes)
    assert (a >= 0).all() and (a <= 1).all()
    assert (b <= a).all()
    assert np.allclose(one, 1.0, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(unit, st.lists(boxes1, min_size=1, max_size=4), st.integers(-4, 4))
def test_batch_equals_naive(x, boxes, f):
    counts = batch_box_sums(GOLD, HALF, [[x]], boxes)[0]
    chars = batch_box_averages(GOLD, Character((f,)), [[x]], boxes)[0]
    for j, b in enumerate(boxes):
        assert counts[j] == discrete_box_sum(GOLD, HALF, [x], b)
        assert abs(chars[j] - discrete_box_average(GOLD, Character((f,)), [x], b)) < 1e-12


def test_budget():
    with pytest.raises(BudgetExceeded):
        batch_box_sums(GOLD, HALF, [[0.1]], [((0,), (10_000,))], budget=1000)


def test_two_dimensional_translation_identity():
    s = product_rotation(["golden", "sqrt2m1"])
    ind = Indicator(TorusSet.box((0, "1/2"), (0, "1/3")))
    x = np.array([0.2, 0.6])
    # shifting the box by e_1 equals moving the point by theta_1
    a = discrete_box_average(s, ind, x, ((3, 1), (5, 4)))
    y = (x + np.array([float(s.theta[0, 0]), 0.0])) % 1
    b = discrete_box_average(s, ind, y, ((2, 1), (5, 4)))
    assert abs(a - b) < 1e-12


def test_character_closed_form_vs_quadrature():
    x = np.array([0.3, 0.1])
    box = ((0.0,), (3.5,))
    closed = character_box_average(SUSP, (1, 2), x, box)
    q = tensor_midpoint(SUSP, Character((1, 2)), x, box)
    assert abs(q.value - closed) < 1e-12 and q.converged


def test_exact_indicator_within_rigorous_bound():
    sys2 = flow([["1/8", "0"], ["sqrt(2)/8", "sqrt(3)/8"]])
    obs = Indicator(TorusSet.box((0, "1/2"), (0, "1/2")))
    x = [Fraction(1, 10), Fraction(2, 10)]
    box = ((0, 0), (3, 2))
    exact = exact_indicator_box_average(sys2, obs, x, box)
    q = tensor_midpoint(sys2, obs, np.array([0.1, 0.2]), ((0.0, 0.0), (3.0, 2.0)), tol=1e-3)
    assert q.rigorous and abs(float(exact) - q.value) <= q.error + 1e-15


def test_segment_average_oracle():
    # segment from 0 along (1/2,) covers [0, 1/2) once: the half indicator averages to 1
    assert exact_indicator_segment_average(HALF, (ExactScalar(0),), (ExactScalar(Fraction(1, 2)),)) == 1
    v = exact_indicator_segment_average(HALF, (ExactScalar(0),), (ExactScalar(2),))
    assert v == Fraction(1, 2)


def test_continuous_auto_paths():
    x = [Fraction(0), Fraction(1, 3)]
    obs = Indicator(TorusSet.box((0, 1), (0, "1/2")))
    v = continuous_box_average(SUSP, obs, x, ((0,), (8,)), method="exact")
    # along the flow the last coordinate moves sqrt2 units across the full box: compare with quadrature
    q = continuous_box_average(SUSP, obs, [0.0, 1 / 3], ((0.0,), (8.0,)), method="quadrature", tol=1e-4)
    assert abs(float(v) - q.value) <= q.error + 1e-12


def test_maximal_average():
    fam = generate_family("linear:r=1", 50)
    val, k = maximal_average(GOLD, HALF, [0.0], fam)
    direct = max(discrete_box_average(GOLD, HALF, [0.0], fam.entries[i]) for i in range(50))
    assert val == direct and 1 <= k <= 50


def test_composition_bound():
    rep = composition_defect(GOLD, HALF, [0.3], ((4,), (4,)), ((0,), (4,)))
    assert rep.defect <= rep.bound and rep.numerators_equal
    assert composition_defect(GOLD, TrigPoly.constant(2.5, 1), [0.3], ((7,), (7,)), ((0,), (3,))).defect == 0
