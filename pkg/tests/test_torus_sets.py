from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from movavg.exact import ExactScalar
from movavg.torus_sets import TorusSet

dyadic = st.integers(0, 16).map(lambda n: Fraction(n, 16))


@st.composite
def intervals(draw):
    a, b = draw(dyadic), draw(dyadic)
    return TorusSet.interval(min(a, b), max(a, b))


def _grid_measure(s: TorusSet) -> float:
    pts = (np.arange(4096) + 0.5) / 4096
    return float(s.contains(pts[:, None]).mean())


def test_union_measure():
    s = TorusSet.interval(0, Fraction(1, 4)) | TorusSet.interval(Fraction(1, 8), Fraction(3, 8))
    assert s.measure == Fraction(3, 8)


def test_wrapping_translate():
    s = TorusSet.interval(0, Fraction(1, 4)).translate([Fraction(7, 8)])
    assert s.contains_exact([Fraction(15, 16)]) and s.contains_exact([Fraction(1, 16)])
    assert s.measure == Fraction(1, 4)


def test_product_and_complement():
    b = TorusSet.box((0, Fraction(1, 2)), (0, Fraction(1, 3)))
    assert b.measure == Fraction(1, 6)
    assert b.complement().measure == Fraction(5, 6)
    assert b.isdisjoint(b.complement())


def test_json_roundtrip():
    s = TorusSet.box((0, "sqrt(2)/4"), ("1/3", "1/2"))
    assert TorusSet.from_json(s.to_json()).same_as(s)


@settings(max_examples=100, deadline=None)
@given(intervals(), intervals())
def test_inclusion_exclusion(a, b):
    assert (a | b).measure + (a & b).measure == a.measure + b.measure
    assert (a - b).measure == a.measure - (a & b).measure
    assert abs(float((a | b).measure) - _grid_measure(a | b)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(intervals(), dyadic)
def test_translation_invariance(a, shift):
    assert a.translate([shift]).measure == a.measure
    assert a.translate([shift]).translate([-shift]).same_as(a)


def test_irrational_endpoints():
    s = TorusSet.interval(0, ExactScalar("sqrt(2)") - 1)
    assert s.contains(np.array([[0.41], [0.42]])).tolist() == [True, False]
