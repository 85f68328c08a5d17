"""Numeric kernels over int64 timestamp columns.

Each kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version.  The numba path is used when numba imports and ``BITEGRA_NUMBA`` is
not set to ``0``; both paths must return identical results.
"""
from __future__ import annotations

import os

import numpy as np

from .chronos import POS_INF

try:  # pragma: no cover - exercised implicitly depending on environment
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("BITEGRA_NUMBA", "1") != "0"


# -- numpy reference path ------------------------------------------------------


def _window_mask_np(starts, ends, lo, hi):
    return (starts < hi) & (ends > lo) & (starts < ends)


def _bitemporal_mask_np(tx_s, tx_e, lo, hi, val_s, val_e, vlo, vhi):
    return _window_mask_np(tx_s, tx_e, lo, hi) & _window_mask_np(val_s, val_e, vlo, vhi)


def _horizon_ends_np(tx_from, tx_to, horizon):
    eff = np.where(tx_to > horizon, np.int64(POS_INF), tx_to)
    # rows stamped after the horizon collapse to an empty period
    return np.where(tx_from > horizon, tx_from, eff)


def _overlap_pairs_np(group, s1, e1, s2, e2):
    """Pairs (i, j), i < j, of equal ``group`` overlapping in both periods.

    ``group`` must be sorted ascending.
    """
    out = []
    n = group.shape[0]
    if n == 0:
        return np.empty((0, 2), dtype=np.int64)
    bounds = np.flatnonzero(np.diff(group)) + 1
    starts = np.concatenate(([0], bounds))
    stops = np.concatenate((bounds, [n]))
    for a, b in zip(starts, stops):
        if b - a < 2:
            continue
        for i in range(a, b - 1):
            j = np.arange(i + 1, b)
            hit = (
                (s1[i] < e1[j]) & (s1[j] < e1[i]) & (s2[i] < e2[j]) & (s2[j] < e2[i])
            )
            for k in j[hit]:
                out.append((i, k))
    if not out:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(out, dtype=np.int64)


# -- numba path ----------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _window_mask_nb(starts, ends, lo, hi):
        n = starts.shape[0]
        out = np.empty(n, dtype=np.bool_)
        for i in range(n):
            s = starts[i]
            e = ends[i]
            out[i] = s < hi and e > lo and s < e
        return out

    @njit(cache=True)
    def _bitemporal_mask_nb(tx_s, tx_e, lo, hi, val_s, val_e, vlo, vhi):
        n = tx_s.shape[0]
        out = np.empty(n, dtype=np.bool_)
        for i in range(n):
            s = tx_s[i]
            e = tx_e[i]
            vs = val_s[i]
            ve = val_e[i]
            out[i] = s < hi and e > lo and s < e and vs < vhi and ve > vlo and vs < ve
        return out

    @njit(cache=True)
    def _horizon_ends_nb(tx_from, tx_to, horizon):
        n = tx_from.shape[0]
        out = np.empty(n, dtype=np.int64)
        inf = np.int64(0x7FFFFFFFFFFFFFFF)
        for i in range(n):
            if tx_from[i] > horizon:
                out[i] = tx_from[i]
            elif tx_to[i] > horizon:
                out[i] = inf
            else:
                out[i] = tx_to[i]
        return out

    @njit(cache=True)
    def _overlap_pairs_nb(group, s1, e1, s2, e2):
        n = group.shape[0]
        cap = 16
        out = np.empty((cap, 2), dtype=np.int64)
        m = 0
        a = 0
        while a < n:
            b = a + 1
            while b < n and group[b] == group[a]:
                b += 1
            for i in range(a, b - 1):
                for j in range(i + 1, b):
                    if s1[i] < e1[j] and s1[j] < e1[i] and s2[i] < e2[j] and s2[j] < e2[i]:
                        if m == cap:
                            cap *= 2
                            grown = np.empty((cap, 2), dtype=np.int64)
                            grown[:m] = out[:m]
                            out = grown
                        out[m, 0] = i
                        out[m, 1] = j
                        m += 1
            a = b
        return out[:m].copy()


# -- public dispatch -----------------------------------------------------------


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def window_mask(starts, ends, lo: int, hi: int, use_numba: bool | None = None):
    """Rows whose non-empty period ``[starts, ends)`` overlaps ``[lo, hi)``."""
    starts, ends = _i64(starts), _i64(ends)
    if use_numba if use_numba is not None else USE_NUMBA:
        return _window_mask_nb(starts, ends, np.int64(lo), np.int64(hi))
    return _window_mask_np(starts, ends, lo, hi)


def bitemporal_mask(tx_s, tx_e, lo, hi, val_s, val_e, vlo, vhi, use_numba=None):
    args = (_i64(tx_s), _i64(tx_e), np.int64(lo), np.int64(hi),
            _i64(val_s), _i64(val_e), np.int64(vlo), np.int64(vhi))
    if use_numba if use_numba is not None else USE_NUMBA:
        return _bitemporal_mask_nb(*args)
    return _bitemporal_mask_np(*args)


def horizon_ends(tx_from, tx_to, horizon: int, use_numba=None):
    """Effective transaction-time ends as seen by a reader at ``horizon``.

    Closures after the horizon are not yet visible (end reads as +inf); rows
    inserted after the horizon come back with an empty period.
    """
    tx_from, tx_to = _i64(tx_from), _i64(tx_to)
    if use_numba if use_numba is not None else USE_NUMBA:
        return _horizon_ends_nb(tx_from, tx_to, np.int64(horizon))
    return _horizon_ends_np(tx_from, tx_to, horizon)


def overlap_pairs(group, s1, e1, s2, e2, use_numba=None):
    args = (_i64(group), _i64(s1), _i64(e1), _i64(s2), _i64(e2))
    if use_numba if use_numba is not None else USE_NUMBA:
        return _overlap_pairs_nb(*args)
    return _overlap_pairs_np(*args)


def warmup() -> None:
    """Trigger JIT compilation so later calls are not charged for it."""
    z = np.zeros(2, dtype=np.int64)
    o = np.ones(2, dtype=np.int64)
    window_mask(z, o, 0, 1)
    bitemporal_mask(z, o, 0, 1, z, o, 0, 1)
    horizon_ends(z, o, 0)
    overlap_pairs(z, z, o, z, o)
