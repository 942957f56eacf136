"""Helpers that turn a validated ExperimentConfig into runnable pieces."""
import numpy as np

from . import data
from .active import ALConfig
from .errors import ConfigError
from .features import SteepnessConfig
from .nn import init_model, train
from .ood import OODBenchmark, OODSet


def load_datasets(cfg):
    """Return ``(train, test, [(name, tag, Dataset), ...])``."""
    dcfg = cfg.dataset
    if dcfg.path is not None:
        full = data.load_csv(dcfg.path)
        if full.labels is None:
            raise ConfigError(f"{dcfg.path}: training data needs labels")
        if dcfg.test_path is not None:
            train_ds, test_ds = full, data.load_csv(dcfg.test_path)
        else:
            split = data.stratified_split(full, dcfg.test_fraction, cfg.seed)
            train_ds, test_ds = split.where("train"), split.where("test")
        train_ds.meta.setdefault("radius", float(np.linalg.norm(train_ds.features, axis=1).max()))
    else:
        full = data.generate(dcfg.kind, dcfg.params, cfg.seed)
        if full.labels is None:
            raise ConfigError(f"generator {dcfg.kind!r} yields unlabeled data")
        split = data.stratified_split(full, dcfg.test_fraction, cfg.seed)
        train_ds, test_ds = split.where("train"), split.where("test")
    oods = []
    for s in cfg.ood.sets:
        if s.path is not None:
            ds = data.load_csv(s.path)
        else:
            params = dict(s.params)
            if s.kind == "shifted-blobs" and "centers" not in params:
                if "centers" not in train_ds.meta:
                    raise ConfigError(f"OOD set {s.name!r}: shifted-blobs needs centers")
                params["centers"] = train_ds.meta["centers"]
            if s.kind == "uniform-far":
                params.setdefault("dim", train_ds.dim)
                params.setdefault("radius", train_ds.meta["radius"])
            ds = data.generate(s.kind, params, cfg.seed, f"data-gen/ood/{s.name}")
        if ds.dim != train_ds.dim:
            raise ConfigError(f"OOD set {s.name!r} has width {ds.dim}, data has {train_ds.dim}")
        oods.append((s.name, s.tag, ds))
    return train_ds, test_ds, oods


def dims_for(cfg, train_ds):
    n_classes = int(train_ds.labels.max()) + 1
    if n_classes < 2:
        raise ConfigError("need at least two classes")
    return (train_ds.dim, *cfg.model.hidden, n_classes)


def steepness_for(cfg):
    if cfg.steepness.alpha is None:
        return SteepnessConfig.uniform(len(cfg.model.capture))
    return SteepnessConfig(cfg.steepness.alpha)


def train_model(cfg, train_ds):
    model = init_model(dims_for(cfg, train_ds), cfg.model.capture, cfg.seed)
    return train(model, train_ds.features, train_ds.labels, lr=cfg.train.lr, epochs=cfg.train.epochs,
                 batch_size=cfg.train.batch_size, seed=cfg.seed)


def benchmark_for(cfg, test_ds, oods, mode=None):
    if not oods:
        raise ConfigError("ood.sets is empty")
    sub = cfg.subset
    return OODBenchmark(
        test_ds.features, [OODSet(n, t, d.features) for n, t, d in oods],
        mode=mode or cfg.scorer.mode, steepness=steepness_for(cfg),
        r_avg_override=cfg.scorer.r_avg_override,
        subset_fraction=sub.fraction if sub.enabled else None,
        subset_radius=None if sub.radius == "auto-median-nn" else sub.radius,
        class_source=cfg.scorer.class_source)


def al_config_for(cfg):
    return ALConfig(initial_size=cfg.al.initial_size, query_size=cfg.al.query_size, cycles=cfg.al.cycles,
                    strategy=cfg.al.strategy, hidden=tuple(cfg.model.hidden), capture=tuple(cfg.model.capture),
                    lr=cfg.train.lr, epochs=cfg.train.epochs, batch_size=cfg.train.batch_size, seed=cfg.seed,
                    alpha=cfg.steepness.alpha, r_avg_override=cfg.scorer.r_avg_override,
                    class_source=cfg.scorer.class_source)
