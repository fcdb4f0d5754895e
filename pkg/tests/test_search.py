import warnings

import numpy as np
import pytest

from pqt import (
    PqtConfig,
    VectorSet,
    brute_force_knn,
    build_index,
    knn_query,
    make_ground_truth,
    recall_at,
    search_batch,
    synth_clustered,
)


def _quadratic_scan(X, y, k):
    d = [(sum((float(a) - float(b)) ** 2 for a, b in zip(x, y)), i) for i, x in enumerate(X)]
    d.sort()
    return [i for _, i in d[:k]], [v for v, _ in d[:k]]


def test_brute_force_matches_quadratic_scan(backend):
    rng = np.random.default_rng(0)
    X = rng.integers(0, 4, size=(120, 5)).astype(np.float32)  # many exact ties
    for y in rng.integers(0, 4, size=(10, 5)).astype(np.float32):
        res = brute_force_knn(X, y, 25)
        ids, dists = _quadratic_scan(X, y, 25)
        assert res.ids.tolist() == ids
        assert res.dists.tolist() == dists


def test_brute_force_self_and_all():
    X = np.random.default_rng(1).normal(size=(40, 3)).astype(np.float32)
    res = brute_force_knn(X, X[17], 1)
    assert (res.ids[0], res.dists[0]) == (17, 0.0)
    full = brute_force_knn(X, X[3], 40)
    assert sorted(full.ids.tolist()) == list(range(40))
    assert np.all(np.diff(full.dists) >= 0)


def test_self_query_small_index(backend):
    db = synth_clustered(100, 8, 4, 5.0, seed=2)
    cfg = PqtConfig(dim=8, p_tree=2, k1=2, k2=2, w=2, p_line=4, candidate_budget=100,
                    rerank_exact=100, table_len=64)
    index = build_index(db, db, cfg)
    for i, y in enumerate(db.vectors):
        res = knn_query(index, y, 1)
        assert res.dists[0] == 0.0
        # duplicates may share distance 0; the lowest id wins
        assert res.ids[0] == min(np.flatnonzero((db.vectors == y).all(axis=1)))
        assert res.ids[0] <= i


def _assert_same(a, b):
    assert np.array_equal(a.ids, b.ids)
    assert np.array_equal(a.dists, b.dists)


def test_wave_build_matches_one_shot():
    db = synth_clustered(100, 8, 4, 5.0, seed=3)
    cfg = PqtConfig(dim=8, p_tree=2, k1=2, k2=2, w=2, p_line=4, candidate_budget=40,
                    rerank_exact=5, table_len=64)
    one = build_index(db, db, cfg)
    waves = build_index(db, db, cfg, wave_size=25)
    assert np.array_equal(one.lists.ids, waves.lists.ids)
    assert np.array_equal(one.codes.lam_q, waves.codes.lam_q)
    for y in synth_clustered(30, 8, 4, 5.0, seed=4).vectors:
        _assert_same(knn_query(one, y, 10), knn_query(waves, y, 10))


def test_empty_database():
    train = synth_clustered(50, 8, 2, 1.0, seed=5)
    cfg = PqtConfig(dim=8, p_tree=2, k1=2, k2=2, w=1, p_line=4, table_len=16)
    index = build_index(VectorSet(np.zeros((0, 8), np.float32)), train, cfg)
    assert index.count == 0
    res = knn_query(index, train.vectors[0], 5)
    assert len(res) == 0


def test_build_errors():
    cfg = PqtConfig(dim=8, p_tree=2, k1=2, k2=2, w=1, p_line=4)
    db = synth_clustered(10, 8, 2, 1.0)
    with pytest.raises(ValueError):
        build_index(synth_clustered(10, 4, 2, 1.0), db, cfg)
    with pytest.raises(ValueError):
        build_index(db, VectorSet(np.zeros((0, 8), np.float32)), cfg)
    with pytest.raises(ValueError):
        build_index(db, None, cfg)


def test_short_result_when_few_candidates():
    db = synth_clustered(200, 8, 4, 5.0, seed=6)
    cfg = PqtConfig(dim=8, p_tree=2, k1=4, k2=2, w=2, p_line=4, candidate_budget=7,
                    rerank_exact=0, table_len=64)
    index = build_index(db, db, cfg)
    res = knn_query(index, db.vectors[0], 50)
    assert len(res) == res.stats["candidates"] == 7
    assert np.all(np.diff(res.dists) >= 0)


def test_query_validation():
    db = synth_clustered(50, 8, 2, 1.0)
    index = build_index(db, db, PqtConfig(dim=8, p_tree=2, k1=2, k2=2, w=1, p_line=4, table_len=16))
    with pytest.raises(ValueError):
        knn_query(index, db.vectors[0], 0)
    with pytest.raises(ValueError):
        knn_query(index, np.zeros(5), 1)
    with pytest.raises(ValueError):
        knn_query(index, db.vectors[0], 1, w=3)
    with pytest.raises(ValueError):
        knn_query(index, db.vectors[0], 1, ordering="random")


def test_missing_raw_vectors_disable_rerank():
    db = synth_clustered(80, 8, 2, 1.0)
    index = build_index(db, db, PqtConfig(dim=8, p_tree=2, k1=2, k2=2, w=1, p_line=4, table_len=16))
    index.db = None
    index._db_vectors = None
    with pytest.warns(RuntimeWarning, match="re-ranking disabled"):
        res = knn_query(index, db.vectors[0], 3)
    assert res.stats["exact_evals"] == 0


@pytest.fixture(scope="module")
def clustered():
    data = synth_clustered(11_000, 64, 32, 20.0, seed=7)
    db = VectorSet(data.data[:10_000])
    queries = data.data[10_000:]
    cfg = PqtConfig(dim=64, p_tree=2, k1=16, k2=8, w=8, p_line=32, candidate_budget=4096,
                    rerank_exact=64, seed=7)
    index = build_index(db, db, cfg)
    gt = make_ground_truth(db, queries, 1)
    return index, queries, gt


@pytest.mark.slow
def test_clustered_recall_floor(clustered):
    index, queries, gt = clustered
    results = search_batch(index, queries, 10)
    assert recall_at(results, gt, 1) >= 0.9


@pytest.mark.slow
@pytest.mark.parametrize("ordering", ["heuristic", "isotropic", "dijkstra"])
def test_budget_monotone_recall(clustered, ordering):
    index, queries, gt = clustered
    prev = -1.0
    for budget in (16, 64, 256, 1024):
        res = search_batch(index, queries[:300], 100, budget=budget, rerank_exact=0, ordering=ordering)
        r = recall_at(res, gt.ids[:300], 100)
        assert r >= prev
        prev = r


def test_budget_grows_candidate_prefix(clustered):
    index, queries, _ = clustered
    for y in queries[:20]:
        small = knn_query(index, y, 10_000, budget=100, rerank_exact=0)
        large = knn_query(index, y, 10_000, budget=400, rerank_exact=0)
        assert set(small.ids) <= set(large.ids)


@pytest.mark.slow
def test_parallel_batch_is_deterministic(clustered):
    index, queries, _ = clustered
    a = search_batch(index, queries[:200], 10, threads=1)
    b = search_batch(index, queries[:200], 10, threads=4)
    for x, y in zip(a, b):
        _assert_same(x, y)


def test_results_sorted_and_stats(clustered):
    index, queries, _ = clustered
    for y in queries[:30]:
        for resort in (False, True):
            res = knn_query(index, y, 20, resort=resort)
            assert len(res.ids) == len(res.dists) <= 20
            assert np.all(np.diff(res.dists) >= 0)
            assert res.stats["candidates"] <= index.config.candidate_budget
            assert res.stats["exact_evals"] == index.config.rerank_exact
            assert res.stats["bins_nonempty"] <= res.stats["bins_scanned"]


def test_full_coverage_equals_brute_force(backend):
    data = synth_clustered(600, 16, 8, 15.0, seed=8)
    cfg = PqtConfig(dim=16, p_tree=2, k1=4, k2=4, w=4, p_line=8, candidate_budget=600,
                    rerank_exact=600, table_len=4096, seed=8)
    index = build_index(data, data, cfg)
    for y in synth_clustered(50, 16, 8, 15.0, seed=9).vectors:
        _assert_same(knn_query(index, y, 10), brute_force_knn(data, y, 10))


def test_backends_agree(clustered):
    from pqt import _backend

    if len(_backend.available()) < 2:
        pytest.skip("compiled backend not built")
    index, queries, _ = clustered
    previous = _backend.name
    out = {}
    try:
        for name in _backend.available():
            _backend.use(name)
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                out[name] = search_batch(index, queries[:50], 10, rerank_exact=0)
    finally:
        _backend.use(previous)
    for a, b in zip(out["cython"], out["python"]):
        _assert_same(a, b)
