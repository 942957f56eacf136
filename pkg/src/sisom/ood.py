"""OOD benchmark harness: threshold rule, AUROC, FPR@95TPR and checkpoint sweeps.

InD is always the positive class and every score is oriented so that higher
means in-distribution: ``r_ood`` for sisom, ``-fused`` for sisome and ``-E``
for the energy baseline.
"""
from dataclasses import dataclass, field

import numpy as np

from .comparison import build as build_comparison, reduce as reduce_set
from .errors import MetricError, SisomError
from .features import SteepnessConfig, saliency
from .scoring import score_features

IND, OOD = "InD", "OOD"
N_BINS = 50


def decide(score, lam):
    return IND if score >= lam else OOD


def _check(ind, ood):
    ind = np.asarray(ind, dtype=np.float64).ravel()
    ood = np.asarray(ood, dtype=np.float64).ravel()
    if not len(ind) or not len(ood):
        raise MetricError("need at least one InD and one OOD score")
    return ind, ood


def _midranks(values):
    order = np.argsort(values, kind="mergesort")
    sorted_v = values[order]
    starts = np.flatnonzero(np.r_[True, sorted_v[1:] != sorted_v[:-1]])
    ends = np.r_[starts[1:], len(values)]
    # average of 1-based ranks start+1 .. end; stays a multiple of 0.5
    avg = (starts + 1 + ends) / 2.0
    ranks = np.empty(len(values))
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auroc(ind_scores, ood_scores):
    """Mann-Whitney AUROC with InD positive; tied pairs count one half."""
    ind, ood = _check(ind_scores, ood_scores)
    n, m = len(ind), len(ood)
    ranks = _midranks(np.concatenate([ind, ood]))
    u = ranks[:n].sum() - n * (n + 1) / 2.0
    return float(u / (n * m))


def fpr_at_95tpr(ind_scores, ood_scores, tpr=0.95):
    """Lowest OOD acceptance rate over thresholds that keep >= ``tpr`` of InD.

    The best threshold is the ``ceil(tpr * n)``-th largest InD score.
    """
    ind, ood = _check(ind_scores, ood_scores)
    k = int(np.ceil(tpr * len(ind) - 1e-12))
    k = min(max(k, 1), len(ind))
    thresh = np.sort(ind)[::-1][k - 1]
    return float(np.mean(ood >= thresh))


def histogram(ind_scores, ood_scores, bins=N_BINS):
    """Counts over ``bins`` uniform bins spanning the pooled score range."""
    ind, ood = _check(ind_scores, ood_scores)
    pooled = np.concatenate([ind, ood])
    lo, hi = float(pooled.min()), float(pooled.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    return edges, np.histogram(ind, edges)[0], np.histogram(ood, edges)[0]


@dataclass
class OODSet:
    name: str
    tag: str
    features: np.ndarray

    def __post_init__(self):
        if self.tag not in ("near", "far"):
            raise ValueError(f"OOD set tag must be 'near' or 'far', got {self.tag!r}")
        if not len(self.features):
            raise ValueError(f"OOD set {self.name} is empty")


@dataclass
class OODBenchmark:
    ind_eval: np.ndarray
    ood_sets: list
    mode: str = "sisom"
    steepness: object = None
    r_avg_override: float = None
    subset_fraction: float = None
    subset_radius: object = None
    class_source: str = "true"
    baseline: bool = True
    results: list = field(default_factory=list)


def _steepness(model, bench):
    return bench.steepness or SteepnessConfig.uniform(len(model.capture))


def _score_all(model, cset, x, bench, mode):
    sal = saliency(model, x)
    return score_features(sal.enhance(_steepness(model, bench)), sal.logits, cset, mode,
                          bench.r_avg_override)


def _ind_score(bundle):
    return bundle.ind_score() if bundle.mode != "energy" else -bundle.energy


def evaluate_checkpoint(model, labeled_x, labeled_y, bench, checkpoint="model"):
    """Metric rows and histograms for one model against every OOD set."""
    cset = build_comparison(model, labeled_x, labeled_y, _steepness(model, bench),
                            class_source=bench.class_source)
    if bench.subset_fraction is not None:
        cset = reduce_set(cset, bench.subset_radius, bench.subset_fraction)
    scorers = [bench.mode] + (["energy"] if bench.baseline and bench.mode != "energy" else [])
    rows, hists = [], []
    for scorer in scorers:
        try:
            ind_bundle = _score_all(model, cset, bench.ind_eval, bench, scorer)
        except SisomError as exc:
            rows.extend(_error_row(scorer, checkpoint, s, exc) for s in bench.ood_sets)
            continue
        ind = _ind_score(ind_bundle)
        for s in bench.ood_sets:
            try:
                ood = _ind_score(_score_all(model, cset, s.features, bench, scorer))
                rows.append({"scorer": scorer, "checkpoint": checkpoint, "set": s.name, "tag": s.tag,
                             "auroc": auroc(ind, ood), "fpr95": fpr_at_95tpr(ind, ood),
                             "n_ind": int(len(ind)), "n_ood": int(len(ood))})
                hists.append((scorer, checkpoint, s.name) + histogram(ind, ood))
            except SisomError as exc:
                rows.append(_error_row(scorer, checkpoint, s, exc))
        for tag in ("near", "far"):
            block = [r for r in rows if r["scorer"] == scorer and r["tag"] == tag and "error" not in r]
            if block:
                rows.append({"scorer": scorer, "checkpoint": checkpoint, "set": f"{tag}-mean", "tag": tag,
                             "auroc": float(np.mean([r["auroc"] for r in block])),
                             "fpr95": float(np.mean([r["fpr95"] for r in block])),
                             "n_ind": int(len(ind)), "n_ood": int(sum(r["n_ood"] for r in block))})
    return rows, hists, cset


def _error_row(scorer, checkpoint, s, exc):
    return {"scorer": scorer, "checkpoint": checkpoint, "set": s.name, "tag": s.tag, "error": str(exc)}


def run_benchmark(checkpoints, bench):
    """Evaluate ``[(name, model, labeled_x, labeled_y), ...]`` in order.

    Errors for one (checkpoint, set) pair are recorded in its row and the
    run continues.
    """
    all_rows, all_hists = [], []
    for name, model, lx, ly in checkpoints:
        rows, hists, _ = evaluate_checkpoint(model, lx, ly, bench, name)
        all_rows.extend(rows)
        all_hists.extend(hists)
    bench.results = all_rows
    return all_rows, all_hists
