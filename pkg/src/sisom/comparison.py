"""Labeled comparison store of enhanced features and its class-wise reduction."""
import csv
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import ConfigError, DataParseError
from .features import embed

CLASS_SOURCES = ("true", "pseudo")


@dataclass(frozen=True)
class ComparisonSet:
    """Enhanced features of labeled samples, partitioned by class.

    ``class_source`` picks which label partitions stored entries for distance
    queries: the ground-truth label (default) or the model's pseudo-class.
    """

    values: np.ndarray
    true_class: np.ndarray
    pseudo_class: np.ndarray
    source_id: np.ndarray
    class_source: str = "true"
    reduced: bool = False
    radius: object = None
    fraction: float = None

    def __post_init__(self):
        if self.class_source not in CLASS_SOURCES:
            raise ConfigError(f"class_source must be one of {CLASS_SOURCES}")
        for arr in (self.values, self.true_class, self.pseudo_class, self.source_id):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.values)

    @property
    def classes(self):
        return self.true_class if self.class_source == "true" else self.pseudo_class

    @property
    def by_class(self):
        labels = self.classes
        return {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}

    def with_class_source(self, source):
        return replace(self, class_source=source)

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, values=self.values[idx], true_class=self.true_class[idx],
                       pseudo_class=self.pseudo_class[idx], source_id=self.source_id[idx])


def from_features(feats, labels, class_source="true"):
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(feats):
        raise ConfigError(f"{len(feats)} features but {len(labels)} labels")
    if len(labels) == 0:
        raise ConfigError("labeled pool is empty")
    return ComparisonSet(np.array(feats.values, dtype=np.float64), labels.copy(),
                         np.array(feats.pseudo_class, dtype=np.int64), np.array(feats.source_id),
                         class_source)


def build(model, x, y, steepness, source_id=None, class_source="true"):
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ConfigError("labeled pool is empty")
    missing = sorted(set(range(model.n_classes)) - set(np.unique(y).tolist()))
    if missing:
        raise ConfigError(f"labeled pool has no samples of class(es) {missing}")
    return from_features(embed(model, x, steepness, source_id), y, class_source)


def class_budget(size, fraction):
    return max(1, math.ceil(Fraction(repr(float(fraction))) * size))


def median_nn_radius(points):
    """Median nearest-neighbour distance inside one class (0 for a singleton)."""
    if len(points) < 2:
        return 0.0
    zeros = np.zeros(len(points), dtype=np.int64)
    d_nn, _ = kernels.class_min_distances(points, zeros, points, zeros, np.arange(len(points)))
    return float(np.median(d_nn))


def reduce(cset, radius=None, fraction=0.10):
    """Greedy fixed-radius coverage subset per class.

    ``radius`` is a float, a ``{class: radius}`` mapping, or ``None`` for the
    per-class median nearest-neighbour distance. Each class keeps
    ``max(1, ceil(fraction * size))`` entries.
    """
    if not 0 < fraction <= 1:
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    keep, radii = [], {}
    for c, idx in cset.by_class.items():
        pts = cset.values[idx]
        if radius is None:
            rad = median_nn_radius(pts)
        elif isinstance(radius, dict):
            rad = float(radius[c])
        else:
            rad = float(radius)
        if radius is not None and not rad > 0:
            raise ConfigError(f"radius must be positive, got {rad}")
        radii[c] = rad
        picks, _ = kernels.greedy_cover(pts, rad, class_budget(len(idx), fraction))
        keep.append(idx[picks])
    keep = np.sort(np.concatenate(keep))
    out = cset.take(keep)
    stored_radius = radii if radius is None or isinstance(radius, dict) else float(radius)
    return replace(out, reduced=True, radius=stored_radius, fraction=float(fraction))


def save_csv(cset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["source_id", "true_class", "pseudo_class"]
                   + [f"z{i}" for i in range(cset.values.shape[1])])
        for sid, t, p, row in zip(cset.source_id, cset.true_class, cset.pseudo_class, cset.values):
            w.writerow([sid, int(t), int(p)] + [f"{v:.17g}" for v in row])


def load_csv(path, class_source="true"):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:3] != ["source_id", "true_class", "pseudo_class"]:
        raise DataParseError("row 1: expected header source_id,true_class,pseudo_class,z...", 1)
    width = len(rows[0])
    sid, tc, pc, vals = [], [], [], []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataParseError(f"row {n}: expected {width} fields, got {len(row)}", n)
        try:
            sid.append(int(row[0]))
            tc.append(int(row[1]))
            pc.append(int(row[2]))
            vals.append([float(v) for v in row[3:]])
        except ValueError:
            raise DataParseError(f"row {n}: non-numeric field", n)
    return ComparisonSet(np.array(vals, dtype=np.float64).reshape(len(vals), width - 3),
                         np.array(tc, dtype=np.int64), np.array(pc, dtype=np.int64),
                         np.array(sid, dtype=np.int64), class_source)
