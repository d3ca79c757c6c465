import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from movavg import _kernels as K

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not importable")


@needs_numba
@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-100, 100), st.integers(0, 30)), min_size=0, max_size=40))
def test_union_count_twins(pairs):
    lo = np.array(sorted(a for a, _ in pairs), dtype=np.int64)
    order = np.argsort([a for a, _ in pairs], kind="stable")
    hi = np.array([pairs[i][0] + pairs[i][1] for i in order], dtype=np.int64)
    brute = len({z for a, b in zip(lo, hi) for z in range(a, b + 1)})
    assert K.union_count_numpy(lo, hi) == K.union_count_numba_wrapper(lo, hi) == brute


@needs_numba
@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 50)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_cumsum2_twins_bitwise(x):
    a = K.cumsum2_numpy(x)
    b = K.cumsum2_numba(x)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@needs_numba
def test_sat_query_twins():
    rng = np.random.default_rng(0)
    for d in (1, 2, 3):
        shape = (7,) * d
        grid = rng.integers(0, 5, size=shape)
        table = np.pad(grid, [(1, 0)] * d)
        for ax in range(d):
            table = np.cumsum(table, axis=ax)
        strides = np.array([s // table.itemsize for s in table.strides], dtype=np.int64)
        starts = rng.integers(0, 4, size=(20, d))
        ends = starts + rng.integers(0, 4, size=(20, d))
        a = K.sat_query_numpy(table.ravel(), strides, starts, ends)
        b = K.sat_query_numba(table.ravel(), strides, starts, ends)
        brute = [grid[tuple(slice(s, e) for s, e in zip(st_, en))].sum() for st_, en in zip(starts, ends)]
        assert np.array_equal(a, b) and a.tolist() == brute


@needs_numba
def test_membership_twins():
    rng = np.random.default_rng(1)
    pts = rng.random(500)
    starts = np.array([0.1, 0.4, 0.8])
    ends = np.array([0.2, 0.5, 0.95])
    assert np.array_equal(K.interval_member_numpy(pts, starts, ends), K.interval_member_numba(pts, starts, ends))
    p2 = rng.random((500, 2))
    lo = rng.random((4, 2)) * 0.5
    hi = lo + 0.3
    assert np.array_equal(K.box_member_numpy(p2, lo, hi), K.box_member_numba(p2, lo, hi))


def test_disable_flag_selects_numpy():
    code = "from movavg import _kernels as K; print(K.BACKEND, K.sat_query is K.sat_query_numpy)"
    env = dict(os.environ, MOVAVG_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]


def test_results_identical_across_backends():
    code = (
        "import numpy as np; from movavg import *; from movavg.cone_geometry import generate_family;"
        "from fractions import Fraction as F;"
        "r=convergence_experiment(make_system({'kind':'rotation','theta':'golden'}),"
        "Indicator(TorusSet.interval(0,F(1,2))),generate_family('linear:r=1',300),10,0);"
        "print(repr(r.deviations[-1]), sum(r.deviations).hex())"
    )
    outs = []
    for flag in ("1", "0"):
        env = dict(os.environ, MOVAVG_DISABLE_NUMBA=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                   check=True).stdout)
    assert outs[0] == outs[1]
