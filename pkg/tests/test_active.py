import numpy as np
import pytest

from sisom import comparison, data
from sisom.active import (ALConfig, PoolState, coreset_select, initial_pool, run_cycles,
                          select_topk)
from sisom.errors import ConfigError, SizeError
from sisom.nn import accuracy, init_model, load_model, train
from sisom.rng import fork
from sisom.scoring import score_batch


def test_select_topk_examples():
    assert list(select_topk([10, 11, 12], [3, 1, 2], 2)) == [10, 12]
    assert list(select_topk([7, 3, 5, 9], [1, 1, 1, 1], 2)) == [3, 5]
    with pytest.raises(SizeError):
        select_topk([1, 2], [0.1, 0.2], 3)


def test_select_topk_matches_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        ids = rng.permutation(5000)[:1000]
        vals = rng.integers(0, 300, 1000).astype(float)  # plenty of ties
        oracle = sorted(zip(ids, vals), key=lambda p: (-p[1], p[0]))[:50]
        assert list(select_topk(ids, vals, 50)) == sorted(i for i, _ in oracle)


def test_coreset_examples():
    lab = np.array([[0.0]])
    unl = np.array([[1.0], [10.0], [11.0]])
    assert list(coreset_select(lab, unl, [1, 2, 3], 1)) == [3]
    assert list(coreset_select(lab, unl, [1, 2, 3], 3)) == [1, 2, 3]
    # a point on top of a labeled one is picked last
    unl = np.array([[0.0], [2.0], [3.0]])
    assert list(coreset_select(lab, unl, [1, 2, 3], 2)) == [2, 3]
    with pytest.raises(SizeError):
        coreset_select(lab, unl, [1, 2, 3], 4)


def test_coreset_brute_force():
    rng = np.random.default_rng(1)
    lab, unl = rng.normal(size=(5, 3)), rng.normal(size=(25, 3))
    ids = np.arange(100, 125)
    centers, picks = list(lab), []
    for _ in range(6):
        best = max((i for i in range(25) if i not in picks),
                   key=lambda i: (min(np.linalg.norm(unl[i] - c) for c in centers), -i))
        picks.append(best)
        centers.append(unl[best])
    assert list(coreset_select(lab, unl, ids, 6)) == sorted(ids[picks])


def test_pool_state_invariants():
    st = PoolState(np.array([1, 2]), np.array([3, 4, 5]))
    st.move(np.array([4]))
    st.check()
    assert list(st.labeled) == [1, 2, 4] and list(st.unlabeled) == [3, 5]
    with pytest.raises(SizeError):
        st.move(np.array([1]))
    st.unlabeled = np.array([3])
    with pytest.raises(AssertionError):
        st.check()


def test_initial_pool_is_stratified():
    ids, labels = np.arange(30), np.arange(30) % 3
    pick = initial_pool(ids, labels, 7, seed=4)
    assert np.bincount(labels[pick]).tolist() == [3, 2, 2]
    assert np.array_equal(pick, initial_pool(ids, labels, 7, seed=4))
    with pytest.raises(ConfigError):
        initial_pool(ids, labels, 2, seed=0)


@pytest.fixture(scope="module")
def moons():
    full = data.generate("moons", {"n": 200, "noise": 0.15}, seed=1)
    split = data.stratified_split(full, 0.25, 1)
    return split.where("train"), split.where("test")


def _cfg(**kw):
    base = dict(initial_size=10, query_size=10, cycles=3, hidden=(16, 8), epochs=40, seed=0)
    base.update(kw)
    return ALConfig(**base)


@pytest.mark.parametrize("strategy", ["sisom", "sisome", "random", "energy", "coreset"])
def test_every_strategy_keeps_pool_invariants(moons, strategy):
    train_ds, test_ds = moons
    st, models = run_cycles(train_ds, test_ds, _cfg(strategy=strategy))
    assert len(models) == 4 and len(st.history) == 4
    assert len(st.labeled) == 40
    for prev, cur in zip(st.history, st.history[1:]):
        assert np.isin(cur.queried, prev.labeled_ids).sum() == 0
        assert np.isin(cur.queried, cur.labeled_ids).all()
        assert len(cur.queried) == 10


def test_random_strategy_reproducible(moons, tmp_path):
    a, _ = run_cycles(*moons, _cfg(strategy="random"), checkpoint_dir=tmp_path / "a")
    b, _ = run_cycles(*moons, _cfg(strategy="random"), checkpoint_dir=tmp_path / "b")
    for ra, rb in zip(a.history, b.history):
        assert np.array_equal(ra.queried, rb.queried) and ra.test_accuracy == rb.test_accuracy
    for i in (1, 2, 3):
        name = f"cycle_{i:03d}.mlp"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert not (tmp_path / "a" / "cycle_000.mlp").exists()


def test_checkpoint_matches_returned_model(moons, tmp_path):
    _, models = run_cycles(*moons, _cfg(cycles=1), checkpoint_dir=tmp_path)
    back = load_model(tmp_path / "cycle_001.mlp")
    x = moons[1].features
    assert accuracy(back, x, moons[1].labels) == accuracy(models[1], x, moons[1].labels)


def test_exhausting_the_pool(moons):
    train_ds, test_ds = moons
    cfg = _cfg(cycles=1, query_size=len(train_ds) - 10)
    st, models = run_cycles(train_ds, test_ds, cfg)
    assert np.array_equal(st.labeled, np.sort(train_ds.ids)) and len(st.unlabeled) == 0
    order = np.argsort(train_ds.ids)
    full = train(init_model((2, 16, 8, 2), cfg.capture, 0, label="init/cycle-1"),
                 train_ds.features[order], train_ds.labels[order], lr=cfg.lr, epochs=cfg.epochs,
                 batch_size=cfg.batch_size, seed=0, label="shuffle/cycle-1")
    assert st.history[-1].test_accuracy == accuracy(full, test_ds.features, test_ds.labels)


def test_query_larger_than_pool(moons):
    with pytest.raises(SizeError, match="cycle 1"):
        run_cycles(*moons, _cfg(cycles=1, query_size=10_000))


def test_sisom_queries_have_higher_ratio_than_random():
    # both selections are scored against the same model and unlabeled pool each cycle
    for seed in range(10):
        full = data.generate("moons", {"n": 200, "noise": 0.15}, seed=seed)
        split = data.stratified_split(full, 0.25, seed)
        tr, te = split.where("train"), split.where("test")
        cfg = _cfg(strategy="sisom", seed=seed)
        st, models = run_cycles(tr, te, cfg)
        pos = {int(i): k for k, i in enumerate(tr.ids)}
        for prev, cur in zip(st.history, st.history[1:]):
            lab = [pos[int(i)] for i in prev.labeled_ids]
            unl_ids = np.setdiff1d(tr.ids, prev.labeled_ids)
            cs = comparison.build(models[prev.cycle], tr.features[lab], tr.labels[lab], cfg.steepness())
            r = score_batch(models[prev.cycle], cfg.steepness(), cs,
                            tr.features[[pos[int(i)] for i in unl_ids]]).r
            rand = fork(seed, f"query/cycle-{cur.cycle}").choice(len(unl_ids), cfg.query_size, replace=False)
            assert cur.query_mean_r == pytest.approx(np.mean(r[np.isin(unl_ids, cur.queried)]), rel=1e-12)
            assert cur.query_mean_r > np.mean(r[rand])


def unseen_cluster_fraction(seed):
    ds = data.generate("blobs", {"n": 300, "std": 1.0, "centers": [[-3, 0], [0, 4], [3, 0]],
                                 "cluster_labels": [0, 0, 1]}, seed=seed)
    cluster = np.asarray(ds.meta["cluster"])
    seen = cluster != 1
    init = initial_pool(ds.ids[seen], ds.labels[seen], 20, seed)
    cfg = ALConfig(initial_size=20, query_size=20, cycles=1, strategy="sisom", hidden=(32, 16),
                   epochs=100, seed=seed)
    st, _ = run_cycles(ds, ds.subset(np.arange(0)), cfg, initial_ids=init)
    in_unseen = dict(zip(ds.ids.tolist(), cluster == 1))
    frac = np.mean([in_unseen[int(i)] for i in st.history[1].queried])
    base = np.mean([in_unseen[int(i)] for i in np.setdiff1d(ds.ids, init)])
    return frac, base


@pytest.mark.slow
def test_unseen_cluster_is_targeted():
    results = [unseen_cluster_fraction(seed) for seed in range(10)]
    assert sum(f >= b for f, b in results) >= 8
