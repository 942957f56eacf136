"""Datasets: synthetic generators, stratified splits and the CSV format.

CSV layout: header ``id,label,f0,...,f{d-1}``; ``id`` is a unique integer,
``label`` may be empty on every row (unlabeled set) or the column omitted.
Floats are written with 17 significant digits so a round trip is exact.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataParseError
from .rng import fork


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray = None
    ids: np.ndarray = None
    split: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ConfigError(f"features must be 2-D, got shape {self.features.shape}")
        n = len(self.features)
        if self.ids is None:
            self.ids = np.arange(n, dtype=np.int64)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != n:
                raise ConfigError("labels and features differ in length")
            if n and self.labels.min() < 0:
                raise ConfigError("labels must be non-negative")
        if self.split is None:
            self.split = np.full(n, "train", dtype=object)
        self.split = np.asarray(self.split, dtype=object)
        if len(self.ids) != n or len(np.unique(self.ids)) != n:
            raise ConfigError("ids must be unique, one per sample")
        if not np.all(np.isfinite(self.features)):
            raise ConfigError("features contain non-finite values")

    def __len__(self):
        return len(self.features)

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return 0 if self.labels is None or not len(self.labels) else int(self.labels.max()) + 1

    def subset(self, mask_or_idx):
        idx = np.asarray(mask_or_idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return Dataset(self.features[idx], None if self.labels is None else self.labels[idx],
                       self.ids[idx], self.split[idx], dict(self.meta))

    def where(self, split):
        return self.subset(self.split == split)


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _balanced_labels(n, k):
    return np.arange(n, dtype=np.int64) % k


def blobs(rng, n=400, k=4, dim=8, std=1.0, center_scale=6.0, centers=None, cluster_labels=None):
    """Isotropic Gaussian clusters, assigned round-robin.

    ``cluster_labels`` maps cluster index to class (default: identity), which
    lets several clusters share a class.
    """
    if centers is None:
        _check(k >= 2 and dim >= 2, "blobs need k >= 2 and dim >= 2")
        centers = rng.uniform(-center_scale, center_scale, size=(k, dim))
    centers = np.asarray(centers, dtype=np.float64)
    k, dim = centers.shape
    _check(n >= 1 and std > 0, "blobs need n >= 1 and std > 0")
    cluster = _balanced_labels(n, k)
    x = centers[cluster] + std * rng.standard_normal((n, dim))
    labels = cluster if cluster_labels is None else np.asarray(cluster_labels, dtype=np.int64)[cluster]
    return Dataset(x, labels, meta={"centers": centers.tolist(), "std": std, "cluster": cluster.tolist(),
                                    "radius": float(np.linalg.norm(x, axis=1).max())})


def moons(rng, n=200, noise=0.1):
    _check(n >= 2 and noise >= 0, "moons need n >= 2 and noise >= 0")
    n0 = n - n // 2
    n1 = n // 2
    t0 = rng.uniform(0, np.pi, n0)
    t1 = rng.uniform(0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1 - np.cos(t1), 0.5 - np.sin(t1)])
    x = np.vstack([upper, lower]) + noise * rng.standard_normal((n, 2))
    y = np.concatenate([np.zeros(n0, np.int64), np.ones(n1, np.int64)])
    order = rng.permutation(n)
    return Dataset(x[order], y[order], meta={"radius": float(np.linalg.norm(x, axis=1).max())})


def rings(rng, n=300, k=2, noise=0.1, dim=2):
    _check(n >= 1 and k >= 2 and dim >= 2, "rings need n >= 1, k >= 2, dim >= 2")
    y = _balanced_labels(n, k)
    direction = rng.standard_normal((n, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    x = direction * (1.0 + y)[:, None] + noise * rng.standard_normal((n, dim))
    return Dataset(x, y, meta={"radius": float(np.linalg.norm(x, axis=1).max())})


def shifted_blobs(rng, centers, n=200, std=1.0, pairs=None):
    """Unlabeled clusters at midpoints between pairs of ``centers``."""
    centers = np.asarray(centers, dtype=np.float64)
    _check(centers.ndim == 2 and len(centers) >= 2, "shifted-blobs need at least two centers")
    if pairs is None:
        pairs = [(i, j) for i in range(len(centers)) for j in range(i + 1, len(centers))]
    mids = np.array([(centers[i] + centers[j]) / 2 for i, j in pairs])
    which = np.arange(n) % len(mids)
    x = mids[which] + std * rng.standard_normal((n, centers.shape[1]))
    return Dataset(x, None, meta={"midpoints": mids.tolist()})


def uniform_far(rng, n=200, dim=8, radius=1.0, factor=5.0):
    """Uniform in the hypercube ``[-factor*radius, factor*radius]^dim``."""
    _check(n >= 1 and dim >= 2 and radius > 0 and factor > 0, "uniform-far needs positive n, dim, radius, factor")
    half = factor * radius
    return Dataset(rng.uniform(-half, half, size=(n, dim)), None, meta={"half_width": half})


GENERATORS = {"blobs": blobs, "moons": moons, "rings": rings, "shifted-blobs": shifted_blobs,
              "uniform-far": uniform_far}


def generate(kind, params=None, seed=0, label="data-gen"):
    if kind not in GENERATORS:
        raise ConfigError(f"unknown generator {kind!r}; choose from {sorted(GENERATORS)}")
    try:
        return GENERATORS[kind](fork(seed, label), **(params or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind}: {exc}") from None


def stratified_split(ds, test_fraction, seed, label="data-gen/split"):
    """Tag a class-stratified ``test_fraction`` of the samples as ``test``."""
    _check(0 <= test_fraction < 1, "test_fraction must be in [0, 1)")
    rng = fork(seed, label)
    split = np.full(len(ds), "train", dtype=object)
    for c in np.unique(ds.labels):
        idx = np.flatnonzero(ds.labels == c)
        idx = idx[rng.permutation(len(idx))]
        split[idx[:int(round(test_fraction * len(idx)))]] = "test"
    return Dataset(ds.features, ds.labels, ds.ids, split, dict(ds.meta))


def save_csv(ds, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "label"] + [f"f{i}" for i in range(ds.dim)])
        for i, row in enumerate(ds.features):
            label = "" if ds.labels is None else int(ds.labels[i])
            w.writerow([int(ds.ids[i]), label] + [f"{v:.17g}" for v in row])


def load_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "id":
        raise DataParseError("row 1: header must start with 'id'", 1)
    header = rows[0]
    has_label = len(header) > 1 and header[1] == "label"
    first = 2 if has_label else 1
    expected = [f"f{i}" for i in range(len(header) - first)]
    if header[first:] != expected or not expected:
        raise DataParseError("row 1: feature columns must be f0..f{d-1}", 1)
    ids, labels, feats, seen = [], [], [], {}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataParseError(f"row {n}: expected {len(header)} fields, got {len(row)}", n)
        try:
            sid = int(row[0])
        except ValueError:
            raise DataParseError(f"row {n}: id {row[0]!r} is not an integer", n)
        if sid in seen:
            raise DataParseError(f"row {n}: duplicate id {sid} (first at row {seen[sid]})", n)
        seen[sid] = n
        try:
            feats.append([float(v) for v in row[first:]])
        except ValueError:
            raise DataParseError(f"row {n}: non-numeric feature value", n)
        if not all(np.isfinite(feats[-1])):
            raise DataParseError(f"row {n}: non-finite feature value", n)
        ids.append(sid)
        if has_label:
            labels.append(row[1].strip())
    if has_label and any(labels):
        if not all(labels):
            missing = 2 + next(i for i, v in enumerate(labels) if not v)
            raise DataParseError(f"row {missing}: label missing while other rows carry labels", missing)
        try:
            labels = np.array([int(v) for v in labels], dtype=np.int64)
        except ValueError:
            raise DataParseError("label column holds non-integer values")
    else:
        labels = None
    x = np.array(feats, dtype=np.float64).reshape(len(feats), len(expected))
    return Dataset(x, labels, np.array(ids, dtype=np.int64))
