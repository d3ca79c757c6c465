from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from movavg.exact import ExactScalar, exact_sqrt
from movavg.submanifold import (
    DependentDirections,
    character_flat_average,
    dilated_flat_average,
    flat_piece,
    flow_for_reindexed,
    genericity_failure_experiment,
    gram_determinant,
    jacobian_check,
    lower_bound_check,
    reduction_check,
    reindexed_matrix,
)
from movavg.systems import Character, Indicator, canonical_suspension, flow
from movavg.torus_sets import TorusSet

SYS = flow([["sqrt(2)/8", "1/8"], ["sqrt(3)/8", "0"], ["1/3", "sqrt(5)/8"]])
small = st.fractions(min_value=-3, max_value=3, max_denominator=4)


def test_gram_factors():
    assert gram_determinant([[0, 1]]) == 1
    assert flat_piece([1, 0], [[1, 1]]).gram == exact_sqrt(2)


def test_dependent_directions():
    with pytest.raises(DependentDirections):
        flat_piece([1, 1], [[2, 2]])


def test_reindexed_roundtrip():
    target = canonical_suspension(Fraction(1, 8), [exact_sqrt(2) / 8, exact_sqrt(3) / 8])
    piece = flat_piece([1, 2], [[0, 1]])
    f = flow_for_reindexed(target, piece)
    assert reindexed_matrix(f, piece) == [list(r) for r in target.matrix]


def test_indicator_reduction_exact():
    piece = flat_piece([1, 0], [[1, 2]])
    S = TorusSet.box((0, "1/2"), ("1/4", "3/4"), (0, "1/3"))
    r = reduction_check(SYS, Indicator(S), [Fraction(1, 7), 0, Fraction(1, 2)], piece, Fraction(7, 2))
    assert r["exact"] and r["agree"] and r["difference"] == "0"


def test_character_reduction_and_closed_form():
    piece = flat_piece([1, 0], [[1, 2]])
    x = [0.1, 0.2, 0.3]
    r = reduction_check(SYS, Character((1, -1, 2)), x, piece, 5)
    assert r["agree"] and r["difference"] < 1e-8
    q = dilated_flat_average(SYS, Character((1, -1, 2)), x, piece, 5)
    assert abs(q.value - character_flat_average(SYS, (1, -1, 2), x, piece, 5)) < 1e-10


def test_lower_bound_check():
    piece = flat_piece([1, 0], [[0, 1]])
    res = lower_bound_check(SYS, TorusSet.box((0, "1/2"), (0, 1), (0, 1)), [0, 0, 0], piece, 3)
    assert res["holds"] and res["exact"]


@settings(max_examples=50, deadline=None)
@given(st.lists(small, min_size=3, max_size=3), st.lists(small, min_size=3, max_size=3),
       st.fractions(min_value=Fraction(1, 4), max_value=20, max_denominator=6))
def test_jacobian_property(v1, v2, t):
    G = [[sum(a * b for a, b in zip(p, q)) for q in (v1, v2)] for p in (v1, v2)]
    det = G[0][0] * G[1][1] - G[0][1] * G[1][0]
    if det == 0:
        return
    normal = [v1[1] * v2[2] - v1[2] * v2[1], v1[2] * v2[0] - v1[0] * v2[2], v1[0] * v2[1] - v1[1] * v2[0]]
    left, right = jacobian_check(flat_piece(normal, [v1, v2]), t)
    assert left == right
    assert (right * right) == ExactScalar(t ** 4 * det)


def test_genericity_experiment():
    rep = genericity_failure_experiment(flat_piece([1, 0], [[0, 1]]), Fraction(1, 10))
    assert rep.mu_E == Fraction(8, 93) and rep.success
    assert float(ExactScalar(rep.best["exact_average"])) >= 0.95
    assert rep.gap >= 0.5
