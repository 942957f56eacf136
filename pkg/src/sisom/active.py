"""Pool-based active learning: query strategies and the cycle loop."""
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .comparison import build as build_comparison
from .errors import ConfigError, SeparabilityError, SisomError, SizeError
from .features import SteepnessConfig, saliency
from .nn import accuracy, forward, init_model, save_model, train
from .rng import fork
from .scoring import score_features, separability

log = logging.getLogger(__name__)

STRATEGIES = ("sisom", "sisome", "random", "energy", "coreset")


def select_topk(ids, values, q):
    """Ids of the ``q`` largest values; ties go to the lowest id."""
    ids = np.asarray(ids)
    values = np.asarray(values, dtype=np.float64)
    if q > len(ids):
        raise SizeError(f"query size {q} exceeds the {len(ids)} scored samples")
    order = np.lexsort((ids, -values))
    return np.sort(ids[order[:q]])


def coreset_select(labeled_features, unlabeled_features, unlabeled_ids, q):
    """Greedy k-center: repeatedly take the unlabeled point farthest from the
    labeled set plus earlier picks. Ties go to the lowest id."""
    unlabeled_ids = np.asarray(unlabeled_ids)
    if q > len(unlabeled_ids):
        raise SizeError(f"query size {q} exceeds the {len(unlabeled_ids)} unlabeled samples")
    order = np.argsort(unlabeled_ids, kind="stable")
    picks = kernels.kcenter_greedy(np.asarray(unlabeled_features)[order], labeled_features, q)
    return np.sort(unlabeled_ids[order][picks])


@dataclass
class ALConfig:
    initial_size: int = 20
    query_size: int = 20
    cycles: int = 5
    strategy: str = "sisom"
    hidden: tuple = (64, 32)
    capture: tuple = None
    lr: float = 0.05
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    alpha: tuple = None
    r_avg_override: float = None
    class_source: str = "true"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.query_size < 1 or self.cycles < 1 or self.initial_size < 1:
            raise ConfigError("query_size, cycles, initial_size must all be >= 1")
        self.hidden = tuple(self.hidden)
        if self.capture is None:
            self.capture = tuple(range(len(self.hidden)))
        self.capture = tuple(self.capture)

    def steepness(self):
        if self.alpha is None:
            return SteepnessConfig.uniform(len(self.capture))
        return SteepnessConfig(self.alpha)


@dataclass
class CycleRecord:
    cycle: int
    labeled_ids: np.ndarray
    queried: np.ndarray
    test_accuracy: float
    r_avg: float
    query_mean_r: float
    wall_clock_s: float


@dataclass
class PoolState:
    labeled: np.ndarray
    unlabeled: np.ndarray
    cycle: int = 0
    history: list = field(default_factory=list)
    universe: np.ndarray = None

    def __post_init__(self):
        if self.universe is None:
            self.universe = np.union1d(self.labeled, self.unlabeled)

    def check(self):
        """Raise AssertionError if the pools overlap or lose samples."""
        assert not np.intersect1d(self.labeled, self.unlabeled).size, "L and U overlap"
        assert np.array_equal(np.union1d(self.labeled, self.unlabeled), self.universe), "pool not conserved"

    def move(self, ids):
        if not np.isin(ids, self.unlabeled).all():
            raise SizeError("queried ids must come from the unlabeled pool")
        self.labeled = np.sort(np.concatenate([self.labeled, ids]))
        self.unlabeled = np.setdiff1d(self.unlabeled, ids)


def initial_pool(ids, labels, size, seed):
    """Class-stratified random pick of ``size`` ids (remainder to low classes)."""
    classes = np.unique(labels)
    if size < len(classes):
        raise ConfigError(f"initial_size {size} is below the number of classes {len(classes)}")
    rng = fork(seed, "pool-init")
    base, extra = divmod(size, len(classes))
    picks = []
    for i, c in enumerate(classes):
        members = ids[labels == c]
        want = base + (1 if i < extra else 0)
        if want > len(members):
            raise ConfigError(f"class {c} has {len(members)} samples, initial pool wants {want}")
        picks.append(rng.choice(members, size=want, replace=False))
    return np.sort(np.concatenate(picks))


def _fit(cfg, dims, x, y, cycle):
    model = init_model(dims, cfg.capture, cfg.seed, label=f"init/cycle-{cycle}")
    return train(model, x, y, lr=cfg.lr, epochs=cfg.epochs, batch_size=cfg.batch_size,
                 seed=cfg.seed, label=f"shuffle/cycle-{cycle}")


def _r_avg(cset):
    try:
        return separability(cset).r_avg
    except SeparabilityError:
        return float("nan")


def run_cycles(train_ds, test_ds, cfg, checkpoint_dir=None, initial_ids=None, on_cycle=None):
    """Run ``cfg.cycles`` query rounds, retraining from scratch on L each time.

    Cycle 0 is the model trained on the initial pool; cycle i >= 1 queries
    with model i-1, moves the picks to L and trains model i, which is
    written to ``checkpoint_dir/cycle_{i:03d}.mlp``. Returns
    ``(PoolState, models)`` where ``models[i]`` is model i.
    """
    if train_ds.labels is None:
        raise ConfigError("the AL pool needs oracle labels")
    ids = train_ds.ids
    pos = {int(i): k for k, i in enumerate(ids)}
    label_of = dict(zip(ids.tolist(), train_ds.labels.tolist()))
    n_classes = int(train_ds.labels.max()) + 1
    dims = (train_ds.dim, *cfg.hidden, n_classes)
    steep = cfg.steepness()
    if initial_ids is None:
        initial_ids = initial_pool(ids, train_ds.labels, cfg.initial_size, cfg.seed)
    initial_ids = np.sort(np.asarray(initial_ids, dtype=np.int64))
    state = PoolState(initial_ids, np.setdiff1d(ids, initial_ids))
    if checkpoint_dir is not None:
        os.makedirs(checkpoint_dir, exist_ok=True)

    def rows(sel):
        return np.array([pos[int(i)] for i in sel], dtype=np.int64)

    models = []
    queried = np.array([], dtype=np.int64)
    query_r = float("nan")
    for cycle in range(cfg.cycles + 1):
        t0 = time.perf_counter()
        try:
            if cycle > 0:
                queried, query_r = _query(cfg, models[-1], steep, train_ds, rows, state, cycle)
                state.move(queried)
                state.cycle = cycle
            lab = rows(state.labeled)
            y_l = np.array([label_of[int(i)] for i in state.labeled])
            model = _fit(cfg, dims, train_ds.features[lab], y_l, cycle)
            cset = build_comparison(model, train_ds.features[lab], y_l, steep, state.labeled,
                                    cfg.class_source)
            r_avg = _r_avg(cset)
            acc = accuracy(model, test_ds.features, test_ds.labels) if len(test_ds) else float("nan")
        except SisomError as exc:
            raise type(exc)(f"cycle {cycle}: {exc}") from exc
        models.append(model)
        if checkpoint_dir is not None and cycle > 0:
            save_model(model, os.path.join(checkpoint_dir, f"cycle_{cycle:03d}.mlp"))
        state.history.append(CycleRecord(cycle, state.labeled.copy(), queried, acc, r_avg, query_r,
                                         time.perf_counter() - t0))
        state.check()
        log.info("cycle %d: |L|=%d acc=%.4f r_avg=%.4f", cycle, len(state.labeled), acc, r_avg)
        if on_cycle is not None:
            on_cycle(state.history[-1])
    return state, models


def _query(cfg, model, steep, ds, rows, state, cycle):
    """Pick ``query_size`` ids from U; also return the mean ratio r of the picks."""
    lab, unl = rows(state.labeled), rows(state.unlabeled)
    y_l = ds.labels[lab]
    q = cfg.query_size
    if q > len(unl):
        raise SizeError(f"query size {q} exceeds the {len(unl)} unlabeled samples")
    cset = build_comparison(model, ds.features[lab], y_l, steep, state.labeled, cfg.class_source)
    sal = saliency(model, ds.features[unl], state.unlabeled)
    bundle = score_features(sal.enhance(steep), sal.logits, cset,
                            "sisome" if cfg.strategy == "sisome" else "sisom", cfg.r_avg_override)
    if cfg.strategy == "sisom":
        picked = select_topk(state.unlabeled, bundle.r, q)
    elif cfg.strategy == "sisome":
        picked = select_topk(state.unlabeled, bundle.fused, q)
    elif cfg.strategy == "energy":
        picked = select_topk(state.unlabeled, bundle.energy, q)
    elif cfg.strategy == "random":
        rng = fork(cfg.seed, f"query/cycle-{cycle}")
        picked = np.sort(rng.choice(state.unlabeled, size=q, replace=False))
    else:
        last = model.capture[-1]
        feat_l = forward(model, ds.features[lab]).hidden[last]
        feat_u = forward(model, ds.features[unl]).hidden[last]
        picked = coreset_select(feat_l, feat_u, state.unlabeled, q)
    mean_r = float(np.mean(bundle.r[np.isin(state.unlabeled, picked)]))
    return picked, mean_r
