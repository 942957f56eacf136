"""Scores of query samples against a comparison set."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, MissingClassError, SeparabilityError
from .features import saliency, stable_sigmoid

EPS = 1e-12
MODES = ("sisom", "sisome", "energy")


@dataclass
class ScoreBundle:
    """Per-query scores, one array entry per query (input order)."""

    sample_id: np.ndarray
    pseudo_class: np.ndarray
    d_in: np.ndarray
    d_out: np.ndarray
    r: np.ndarray
    r_ood: np.ndarray
    energy: np.ndarray
    fused: np.ndarray
    mode: str
    r_avg: float = None

    def __len__(self):
        return len(self.r)

    def ind_score(self):
        """Score oriented so that higher means in-distribution."""
        if self.mode == "sisom":
            return self.r_ood
        return -self.fused


@dataclass
class SeparabilityReport:
    r_avg: float
    per_sample_ratios: np.ndarray
    excluded_self_matches: int


def _distances(values, pseudo, cset, exclude=None):
    d_in, d_out = kernels.class_min_distances(values, pseudo, cset.values, cset.classes, exclude)
    return d_in, d_out


def class_distances(query_values, query_class, cset, exclude_id=None, sample_id=None):
    """(d_in, d_out) for a single enhanced vector.

    ``exclude_id`` drops stored entries with that source id from the
    same-class search.
    """
    q = np.asarray(query_values, dtype=np.float64)[None, :]
    labels = cset.classes
    if not (labels != query_class).any():
        raise MissingClassError("comparison set holds a single class; d_out undefined", sample_id)
    if exclude_id is not None:
        cset = cset.take(np.flatnonzero(~((cset.source_id == exclude_id) & (labels == query_class))))
    if not (cset.classes == query_class).any():
        raise MissingClassError(f"no stored entry of class {query_class}", sample_id)
    d_in, d_out = _distances(q, np.array([query_class]), cset)
    return float(d_in[0]), float(d_out[0])


def sisom_score(d_in, d_out):
    d_in = np.asarray(d_in, dtype=np.float64)
    d_out = np.asarray(d_out, dtype=np.float64)
    r = np.where(d_in == 0.0, 0.0, d_in / (d_out + EPS))
    return r if r.ndim else float(r)


def ood_score(r):
    # 1 - (s(r)+1)/2 == s(-r)/2; the right side keeps precision once s(r) rounds to 1
    out = stable_sigmoid(-np.asarray(r, dtype=np.float64)) / 2.0
    return out if out.ndim else float(out)


def energy_score(logits):
    logits = np.asarray(logits, dtype=np.float64)
    m = logits.max(axis=-1)
    out = -(m + np.log(np.exp(logits - m[..., None]).sum(axis=-1)))
    return out if out.ndim else float(out)


def fuse(r, energy, r_avg):
    return min(r_avg, 1.0) * np.asarray(energy) + max(1.0 - r_avg, 0.0) * np.asarray(r)


def separability(cset):
    """Mean d_in/d_out over stored entries, each excluded from its own search."""
    sizes = {c: len(i) for c, i in cset.by_class.items()}
    if len(sizes) < 2:
        raise SeparabilityError("separability needs at least two classes")
    small = [c for c, n in sizes.items() if n < 2]
    if small:
        raise SeparabilityError(f"separability needs two entries per class; class(es) {small} have one")
    n = len(cset)
    d_in, d_out = _distances(cset.values, cset.classes, cset, np.arange(n, dtype=np.int64))
    ratios = sisom_score(d_in, d_out)
    return SeparabilityReport(float(np.mean(ratios)), ratios, n)


def _standardize(v):
    sd = v.std()
    return (v - v.mean()) / sd if sd > 0 else v - v.mean()


def score_features(feats, logits, cset, mode="sisom", r_avg=None, standardize=False):
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    present = set(cset.by_class)
    if len(present) < 2:
        raise MissingClassError("comparison set holds a single class; d_out undefined")
    for sid, c in zip(feats.source_id, feats.pseudo_class):
        if int(c) not in present:
            raise MissingClassError(f"sample {sid}: no stored entry of pseudo-class {c}", sid)
    d_in, d_out = _distances(feats.values, feats.pseudo_class, cset)
    r = sisom_score(d_in, d_out)
    energy = energy_score(logits)
    if mode == "energy":
        fused = energy.copy()
    elif mode == "sisom":
        fused = r.copy()
    else:
        if r_avg is None:
            r_avg = separability(cset).r_avg
        e_in, r_in = (_standardize(energy), _standardize(r)) if standardize else (energy, r)
        fused = fuse(r_in, e_in, r_avg)
    return ScoreBundle(np.asarray(feats.source_id), np.asarray(feats.pseudo_class), d_in, d_out, r,
                       ood_score(r), energy, fused, mode, None if r_avg is None else float(r_avg))


def score_batch(model, steepness, cset, x, mode="sisom", r_avg_override=None, sample_ids=None,
                standardize=False):
    """Score raw inputs: forward, gradient, enhance, then distances and fusion.

    For ``sisome`` the fusion weight is the comparison set's separability
    unless ``r_avg_override`` is given.
    """
    sal = saliency(model, x, sample_ids)
    return score_features(sal.enhance(steepness), sal.logits, cset, mode, r_avg_override, standardize)
