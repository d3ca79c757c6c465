from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from movavg.cone_geometry import (
    InsufficientPrefix,
    brute_force_count,
    condition_verdict,
    coverage_bound,
    cross_section,
    explicit_family,
    generate_family,
    geometric_grid,
    orthant_split,
)

entries = st.lists(st.tuples(st.integers(-40, 40), st.integers(1, 30)), min_size=1, max_size=15)
alphas = st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2)])


def test_worked_counts():
    assert cross_section(generate_family("linear:r=1", 50), 1, 1, 10).size == 19
    cs = cross_section(generate_family("linear:r=2", 50), 1, 1, 10)
    assert cs.size == 17 and cs.intervals == ((-7, 9),)
    assert cross_section(explicit_family([(1, 1)]), 1, 1, 3).size == 5


def test_continuous_lengths():
    fam = explicit_family([(Fraction(0), Fraction(1)), (Fraction(5), Fraction(2))], mode="continuous")
    cs = cross_section(fam, 1, 1, 3)
    # [-2, 2] and [4, 6]
    assert cs.size == 6


def test_orthant_split_lattice_points():
    fam = explicit_family([(-2, 5)])
    split = orthant_split(fam)
    assert split.entries == (((0,), (2,)), ((0,), (3,)))
    pts = sorted(abs(p[0]) for k in range(split.K) for p in split.lattice_points(k))
    assert pts == sorted(abs(z) for z in range(-2, 3))


def test_verdicts():
    assert condition_verdict(generate_family("linear:r=2", 2000)).verdict == "Holds"
    assert condition_verdict(generate_family("sqrt", 10_000)).verdict == "FailsEmpirically"
    assert condition_verdict(generate_family("unit", 100)).verdict == "BoundedLengths"


def test_prefix_guard():
    fam = generate_family("linear:r=1", 10)
    assert coverage_bound(fam, 1) == 11
    with pytest.raises(InsufficientPrefix):
        condition_verdict(fam, 1, lambdas=[1, 20])


def test_geometric_grid():
    assert geometric_grid(1, 20) == [1, 2, 4, 8, 16, 20]


@settings(max_examples=150, deadline=None)
@given(entries, alphas, st.integers(1, 40))
def test_matches_brute_force(ents, a, lam):
    fam = explicit_family(ents)
    assert cross_section(fam, 1, a, lam).size == brute_force_count(fam, 1, a, lam)


@settings(max_examples=100, deadline=None)
@given(entries, alphas, st.integers(1, 39))
def test_monotone_in_height_and_prefix(ents, a, lam):
    fam = explicit_family(ents)
    assert cross_section(fam, 1, a, lam).size <= cross_section(fam, 1, a, lam + 1).size
    if fam.K > 1:
        assert cross_section(fam.prefix(fam.K - 1), 1, a, lam).size <= cross_section(fam, 1, a, lam).size


@settings(max_examples=100, deadline=None)
@given(entries, st.integers(1, 40))
def test_monotone_in_aperture(ents, lam):
    fam = explicit_family(ents)
    sizes = [cross_section(fam, 1, a, lam).size for a in (Fraction(1, 2), Fraction(1), Fraction(2))]
    assert sizes == sorted(sizes)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.fractions(-20, 20, max_denominator=4), st.fractions(Fraction(1, 4), 10, max_denominator=4)),
                min_size=1, max_size=6), alphas, st.integers(1, 12))
def test_continuous_length_vs_grid(ents, a, lam):
    import numpy as np

    fam = explicit_family(ents, mode="continuous")
    size = float(cross_section(fam, 1, a, lam).size)
    lo, hi = -20 - 2 * lam, 20 + 2 * lam
    xs = lo + (np.arange(10**6) + 0.5) * (hi - lo) / 10**6
    hit = np.zeros(xs.shape, dtype=bool)
    for c, ln in fam.entries:
        if ln[0] <= lam:
            hit |= np.abs(xs - float(c[0])) <= float(a * (lam - ln[0]))
    grid = hit.mean() * (hi - lo)
    assert abs(size - grid) <= 1e-3 * max(size, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.tuples(st.integers(-9, 9), st.integers(-9, 9)),
                          st.tuples(st.integers(1, 8), st.integers(1, 8))), min_size=1, max_size=4))
def test_orthant_split_preserves_points(ents):
    from collections import Counter

    fam = explicit_family(ents)
    split = orthant_split(fam)
    before = Counter(tuple(abs(v) for v in p) for k in range(fam.K) for p in fam.lattice_points(k))
    after = Counter(p for k in range(split.K) for p in split.lattice_points(k))
    assert before == after
    assert all(v >= 0 for c, _ in split.entries for v in c)
