"""Compiled kernels. Loop order mirrors ``_numpy`` exactly (no fastmath)."""
import numpy as np
from numba import njit


@njit(cache=True)
def _sqdist(a, i, b, j):
    acc = 0.0
    for k in range(a.shape[1]):
        diff = a[i, k] - b[j, k]
        acc += diff * diff
    return acc


@njit(cache=True)
def class_min_distances(queries, q_cls, q_excl, stored, s_cls):
    m = queries.shape[0]
    n = stored.shape[0]
    d_in = np.empty(m)
    d_out = np.empty(m)
    for i in range(m):
        best_in = np.inf
        best_out = np.inf
        c = q_cls[i]
        for j in range(n):
            sq = _sqdist(queries, i, stored, j)
            if s_cls[j] == c:
                if j != q_excl[i] and sq < best_in:
                    best_in = sq
            elif sq < best_out:
                best_out = sq
        d_in[i] = np.sqrt(best_in)
        d_out[i] = np.sqrt(best_out)
    return d_in, d_out


@njit(cache=True)
def _greedy_cover(points, radius, budget):
    n = points.shape[0]
    dist = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            dist[i, j] = np.sqrt(_sqdist(points, i, points, j))
    covered = np.zeros(n, dtype=np.bool_)
    chosen = np.zeros(n, dtype=np.bool_)
    picks = np.empty(budget, dtype=np.int64)
    n_picked = 0
    n_covered = 0
    while n_picked < budget and n_covered < n:
        best = -1
        best_gain = -1
        for i in range(n):
            if chosen[i]:
                continue
            gain = 0
            for j in range(n):
                if not covered[j] and dist[i, j] <= radius:
                    gain += 1
            if gain > best_gain:
                best_gain = gain
                best = i
        picks[n_picked] = best
        n_picked += 1
        chosen[best] = True
        for j in range(n):
            if not covered[j] and dist[best, j] <= radius:
                covered[j] = True
                n_covered += 1
    n_greedy = n_picked
    if n_picked < budget:
        mind = np.full(n, np.inf)
        for t in range(n_picked):
            for j in range(n):
                if dist[picks[t], j] < mind[j]:
                    mind[j] = dist[picks[t], j]
        while n_picked < budget:
            best = -1
            best_d = -np.inf
            for i in range(n):
                if not chosen[i] and mind[i] > best_d:
                    best_d = mind[i]
                    best = i
            picks[n_picked] = best
            n_picked += 1
            chosen[best] = True
            for j in range(n):
                if dist[best, j] < mind[j]:
                    mind[j] = dist[best, j]
    return picks, n_greedy


def greedy_cover(points, radius, budget):
    picks, n_greedy = _greedy_cover(points, float(radius), int(budget))
    return picks, int(n_greedy)


@njit(cache=True)
def kcenter_greedy(unlabeled, labeled, q):
    nu = unlabeled.shape[0]
    mind = np.full(nu, np.inf)
    for i in range(nu):
        for j in range(labeled.shape[0]):
            sq = _sqdist(unlabeled, i, labeled, j)
            if sq < mind[i]:
                mind[i] = sq
    chosen = np.zeros(nu, dtype=np.bool_)
    picks = np.empty(q, dtype=np.int64)
    for t in range(q):
        best = -1
        best_d = -np.inf
        for i in range(nu):
            if not chosen[i] and mind[i] > best_d:
                best_d = mind[i]
                best = i
        picks[t] = best
        chosen[best] = True
        for i in range(nu):
            sq = _sqdist(unlabeled, i, unlabeled, best)
            if sq < mind[i]:
                mind[i] = sq
    return picks
