from fractions import Fraction

import numpy as np
import pytest

from movavg.exact import SQRT2M1, exact_sqrt
from movavg.systems import (
    Character,
    Indicator,
    TrigPoly,
    UncertifiableParameters,
    act,
    canonical_suspension,
    evaluate,
    flow,
    make_system,
    observable_mean,
    orbit_points,
    product_rotation,
    rotation,
)
from movavg.torus_sets import TorusSet


def test_rotation_certificates():
    s = rotation("sqrt2m1")
    assert s.ergodic and s.aperiodic
    r = rotation(Fraction(1, 2))
    assert not r.ergodic and not r.aperiodic


def test_exact_action():
    s = rotation("sqrt2m1")
    x = act(s, [0], [5])
    assert x[0] == (5 * SQRT2M1).frac() == -7 + 5 * exact_sqrt(2)


def test_float_action_matches_exact():
    s = product_rotation(["golden", "sqrt2m1"])
    ex = act(s, [Fraction(1, 3), Fraction(1, 5)], [7, -3])
    fl = act(s, [1 / 3, 1 / 5], [7, -3])
    assert np.allclose([float(v) for v in ex], fl, atol=1e-12)


def test_suspension_certificates():
    s = canonical_suspension(Fraction(1, 8), [exact_sqrt(2) / 8, exact_sqrt(3) / 8])
    assert s.ergodic and s.aperiodic
    # rational ratios lose ergodicity
    t = canonical_suspension(Fraction(1, 8), [Fraction(1, 16), Fraction(1, 4)])
    assert not t.ergodic


def test_dependent_angles_not_ergodic():
    # x -> x + (sqrt2, 2 sqrt2) keeps the character (2, -1) invariant
    s = make_system({"kind": "discrete", "thetas": [["sqrt(2)", "2*sqrt(2)"]]})
    assert not s.ergodic
    assert product_rotation(["sqrt(2)", "2*sqrt(2)"]).ergodic


def test_make_system_require():
    with pytest.raises(UncertifiableParameters):
        make_system({"kind": "rotation", "theta": "1/3", "require": ["ergodic"]})
    assert make_system({"kind": "flow", "matrix": [["sqrt(2)"], ["sqrt(3)"]]}).d == 1


def test_orbit_points_grid_consistency():
    s = product_rotation(["golden", "sqrt2m1"])
    x = np.array([0.1, 0.7])
    grid = orbit_points(s, x, [np.arange(-3, 5), np.arange(2, 6)])
    sub = orbit_points(s, x, [np.arange(0, 2), np.arange(3, 4)])
    assert np.array_equal(grid[3:5, 1:2], sub)


def test_means():
    assert observable_mean(None, Character((0,))) == 1
    assert observable_mean(None, Character((3,))) == 0
    assert observable_mean(None, Indicator(TorusSet.interval(0, "1/3"))) == Fraction(1, 3)
    tp = TrigPoly((((0,), 2.0), ((1,), 1.0)))
    assert observable_mean(None, tp) == 2.0
    pts = np.array([[0.0], [0.5]])
    assert np.allclose(evaluate(tp, pts), [3.0, 1.0])


def test_flow_rejects_floats():
    with pytest.raises((UncertifiableParameters, TypeError)):
        flow([[0.5]])
