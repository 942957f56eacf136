"""Pure-numpy versions of the hot kernels.

Squared distances are accumulated one coordinate at a time, in the same order
as the compiled loops, so both paths return bit-identical results.
"""
import numpy as np

_BLOCK = 512


def _sqdist_block(a, b):
    out = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        diff = a[:, k, None] - b[None, :, k]
        out += diff * diff
    return out


def class_min_distances(queries, q_cls, q_excl, stored, s_cls):
    m = queries.shape[0]
    d_in = np.full(m, np.inf)
    d_out = np.full(m, np.inf)
    cols = np.arange(stored.shape[0])
    for lo in range(0, m, _BLOCK):
        hi = min(lo + _BLOCK, m)
        sq = _sqdist_block(queries[lo:hi], stored)
        same = s_cls[None, :] == q_cls[lo:hi, None]
        excluded = cols[None, :] == q_excl[lo:hi, None]
        d_in[lo:hi] = np.where(same & ~excluded, sq, np.inf).min(axis=1, initial=np.inf)
        d_out[lo:hi] = np.where(~same, sq, np.inf).min(axis=1, initial=np.inf)
    return np.sqrt(d_in), np.sqrt(d_out)


def greedy_cover(points, radius, budget):
    n = points.shape[0]
    dist = np.sqrt(_sqdist_block(points, points))
    adj = (dist <= radius).astype(np.int64)
    covered = np.zeros(n, dtype=bool)
    chosen = np.zeros(n, dtype=bool)
    picks = []
    while len(picks) < budget and not covered.all():
        gain = adj @ (~covered).astype(np.int64)
        gain[chosen] = -1
        best = int(np.argmax(gain))
        picks.append(best)
        chosen[best] = True
        covered |= adj[best].astype(bool)
    n_greedy = len(picks)
    if len(picks) < budget:
        mind = dist[picks].min(axis=0)
        while len(picks) < budget:
            cand = np.where(chosen, -1.0, mind)
            best = int(np.argmax(cand))
            picks.append(best)
            chosen[best] = True
            mind = np.minimum(mind, dist[best])
    return np.asarray(picks, dtype=np.int64), n_greedy


def kcenter_greedy(unlabeled, labeled, q):
    nu = unlabeled.shape[0]
    mind = np.full(nu, np.inf)
    for lo in range(0, labeled.shape[0], _BLOCK):
        sq = _sqdist_block(unlabeled, labeled[lo:lo + _BLOCK])
        mind = np.minimum(mind, sq.min(axis=1, initial=np.inf))
    chosen = np.zeros(nu, dtype=bool)
    picks = np.empty(q, dtype=np.int64)
    for t in range(q):
        best = int(np.argmax(np.where(chosen, -1.0, mind)))
        picks[t] = best
        chosen[best] = True
        mind = np.minimum(mind, _sqdist_block(unlabeled, unlabeled[best:best + 1])[:, 0])
    return picks
