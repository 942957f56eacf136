"""Distance and selection kernels with a numba path and a numpy fallback.

Set ``SISOM_DISABLE_NUMBA=1`` before import to force the numpy path. Both
implementations stay importable as ``numpy_impl`` / ``numba_impl`` so tests
and the benchmark can compare them directly.
"""
import os
import warnings

import numpy as np

from . import _numpy as numpy_impl

try:
    from . import _numba as numba_impl
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None

USE_NUMBA = numba_impl is not None and os.environ.get("SISOM_DISABLE_NUMBA", "0") in ("", "0")

if numba_impl is None and os.environ.get("SISOM_DISABLE_NUMBA", "0") in ("", "0"):
    warnings.warn("numba unavailable, falling back to numpy kernels")

_impl = numba_impl if USE_NUMBA else numpy_impl

__all__ = ["class_min_distances", "greedy_cover", "kcenter_greedy", "backend", "USE_NUMBA"]


def backend():
    return "numba" if USE_NUMBA else "numpy"


def class_min_distances(queries, q_cls, stored, s_cls, q_excl=None):
    """Nearest same-class and other-class Euclidean distance for each query.

    ``q_excl[i]`` is a row of ``stored`` ignored in the same-class search
    (``-1`` for none). Missing classes yield ``inf``.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    stored = np.ascontiguousarray(stored, dtype=np.float64)
    q_cls = np.ascontiguousarray(q_cls, dtype=np.int64)
    s_cls = np.ascontiguousarray(s_cls, dtype=np.int64)
    if q_excl is None:
        q_excl = np.full(len(queries), -1, dtype=np.int64)
    q_excl = np.ascontiguousarray(q_excl, dtype=np.int64)
    if queries.shape[1] != stored.shape[1]:
        raise ValueError(f"feature width mismatch: {queries.shape[1]} vs {stored.shape[1]}")
    return _impl.class_min_distances(queries, q_cls, q_excl, stored, s_cls)


def greedy_cover(points, radius, budget):
    """Greedy fixed-radius max coverage, then farthest-point fill.

    Returns ``(picks, n_greedy)``: selected row indices in pick order and the
    number chosen by the coverage phase.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    budget = min(int(budget), len(points))
    return _impl.greedy_cover(points, float(radius), budget)


def kcenter_greedy(unlabeled, labeled, q):
    unlabeled = np.ascontiguousarray(unlabeled, dtype=np.float64)
    labeled = np.ascontiguousarray(labeled, dtype=np.float64).reshape(-1, unlabeled.shape[1])
    return _impl.kcenter_greedy(unlabeled, labeled, int(q))
