import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bitegra import _kernels as K
from bitegra.chronos import POS_INF

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")
bound = st.integers(-5, 12)
K.warmup()  # keep JIT compilation out of the per-example deadline


def periods(n):
    return st.lists(st.tuples(bound, bound), min_size=n, max_size=n)


def split(ps):
    return np.array([a for a, _ in ps], dtype=np.int64), np.array([b for _, b in ps], dtype=np.int64)


def both(fn, *args):
    out = [fn(*args, use_numba=False)]
    if K.HAVE_NUMBA:
        out.append(fn(*args, use_numba=True))
    return out


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 20).flatmap(periods), bound, bound)
def test_window_mask(ps, lo, hi):
    s, e = split(ps)
    want = [a < hi and b > lo and a < b for a, b in ps]
    for got in both(K.window_mask, s, e, lo, hi):
        assert got.tolist() == want


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 15).flatmap(lambda n: st.tuples(periods(n), periods(n))), bound, bound, bound, bound)
def test_bitemporal_mask(pq, lo, hi, vlo, vhi):
    (s, e), (vs, ve) = split(pq[0]), split(pq[1])
    want = [(a < hi and b > lo and a < b) and (c < vhi and d > vlo and c < d)
            for (a, b), (c, d) in zip(*pq)]
    for got in both(K.bitemporal_mask, s, e, lo, hi, vs, ve, vlo, vhi):
        assert got.tolist() == want


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 20).flatmap(periods), bound)
def test_horizon_ends(ps, horizon):
    s, e = split(ps)
    want = [a if a > horizon else (POS_INF if b > horizon else b) for a, b in ps]
    for got in both(K.horizon_ends, s, e, horizon):
        assert got.tolist() == want


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 14).flatmap(lambda n: st.tuples(st.lists(st.integers(0, 3), min_size=n, max_size=n),
                                                       periods(n), periods(n))))
def test_overlap_pairs(data):
    groups, p1, p2 = data
    order = sorted(range(len(groups)), key=lambda i: groups[i])
    g = np.array([groups[i] for i in order], dtype=np.int64)
    p1, p2 = [p1[i] for i in order], [p2[i] for i in order]
    (s1, e1), (s2, e2) = split(p1), split(p2)
    want = sorted((i, j) for i in range(len(g)) for j in range(i + 1, len(g))
                  if g[i] == g[j] and p1[i][0] < p1[j][1] and p1[j][0] < p1[i][1]
                  and p2[i][0] < p2[j][1] and p2[j][0] < p2[i][1])
    for got in both(K.overlap_pairs, g, s1, e1, s2, e2):
        assert sorted(map(tuple, got.tolist())) == want


@needs_numba
def test_large_inputs_agree():
    rng = np.random.default_rng(7)
    a = rng.integers(0, 10**9, 100_000)
    b = a + rng.integers(-10, 10**6, a.size)
    lo, hi = 10**8, 5 * 10**8
    assert np.array_equal(K.window_mask(a, b, lo, hi, use_numba=True), K.window_mask(a, b, lo, hi, use_numba=False))
    assert np.array_equal(K.horizon_ends(a, b, hi, use_numba=True), K.horizon_ends(a, b, hi, use_numba=False))
