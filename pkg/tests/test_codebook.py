import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqt import PqtConfig, VectorSet, assign, train_kmeans, train_tree
from pqt.codebook import Codebook


def _best_partition_sse(X, k):
    """Minimum SSE over every labelling of X into at most k clusters."""
    best = np.inf
    for labels in itertools.product(range(k), repeat=len(X)):
        labels = np.array(labels)
        sse = 0.0
        for c in range(k):
            pts = X[labels == c]
            if len(pts):
                sse += float(((pts - pts.mean(axis=0)) ** 2).sum())
        best = min(best, sse)
    return best


def test_four_point_example_matches_enumeration(backend):
    X = np.array([[0, 0], [0, 2], [10, 0], [10, 2]], np.float32)
    cb = train_kmeans(X, 2, seed=0)
    got = sorted(map(tuple, cb.centroids.tolist()))
    assert got == [(0.0, 1.0), (10.0, 1.0)]
    assert cb.sse_history[-1] == pytest.approx(4.0)
    assert _best_partition_sse(X.astype(np.float64), 2) == pytest.approx(4.0)


def test_distinct_points_become_centroids():
    X = np.random.default_rng(0).normal(size=(7, 3)).astype(np.float32)
    cb = train_kmeans(X, 7, seed=5)
    assert sorted(map(tuple, cb.centroids.tolist())) == sorted(map(tuple, X.tolist()))
    assert cb.sse_history[-1] == 0.0


def test_k1_is_mean():
    X = np.random.default_rng(1).normal(size=(50, 4)).astype(np.float32)
    cb = train_kmeans(X, 1)
    np.testing.assert_allclose(cb.centroids[0], X.astype(np.float64).mean(axis=0), rtol=1e-6, atol=1e-6)


def test_more_centroids_than_points_are_distinct():
    X = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]], np.float32)
    cb = train_kmeans(X, 6)
    assert cb.k == 6
    assert np.isfinite(cb.centroids).all()
    assert len(np.unique(cb.centroids, axis=0)) == 6


def test_invalid_inputs():
    with pytest.raises(ValueError):
        train_kmeans(np.zeros((0, 2)), 2)
    with pytest.raises(ValueError):
        train_kmeans(np.zeros((3, 2)), 0)


def test_deterministic_under_seed():
    X = np.random.default_rng(2).normal(size=(400, 5)).astype(np.float32)
    a, b = train_kmeans(X, 9, seed=11), train_kmeans(X, 9, seed=11)
    assert a.centroids.tobytes() == b.centroids.tobytes()
    assert a.sse_history == b.sse_history


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 120), m=st.integers(1, 6), k=st.integers(1, 12), seed=st.integers(0, 10**6))
def test_lloyd_sse_never_increases(n, m, k, seed):
    rng = np.random.default_rng(seed)
    X = (rng.normal(size=(n, m)) * rng.uniform(0.1, 50)).astype(np.float32)
    if seed % 3 == 0:  # heavy duplication exercises empty-cluster repair
        X = X[rng.integers(0, max(1, n // 4), size=n)]
    cb = train_kmeans(X, k, iters=30, seed=seed)
    h = cb.sse_history
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert cb.iterations <= 30
    assert np.isfinite(cb.centroids).all()


def test_assign_exact_match(backend):
    C = np.array([[0, 0], [3, 3], [1, 0], [9, 9], [5, 5], [-1, 0]], np.float32)
    assert assign(C, C[3]) == (3, 0.0)
    assert assign(Codebook(C), C[4]) == (4, 0.0)


def test_assign_tie_prefers_lowest_index(backend):
    C = np.zeros((6, 2), np.float32)
    C[2] = (1, 0)
    C[5] = (-1, 0)
    C[[0, 1, 3, 4]] = 50
    assert assign(C, [0.0, 0.0])[0] == 2


def test_assign_matches_linear_scan(backend):
    rng = np.random.default_rng(7)
    for _ in range(10_000 // 50):
        C = rng.normal(size=(16, 8)).astype(np.float32)
        for x in rng.normal(size=(50, 8)).astype(np.float32):
            best, best_d = 0, np.inf
            for j, c in enumerate(C):
                d = sum((float(a) - float(b)) ** 2 for a, b in zip(x, c))
                if d < best_d:
                    best, best_d = j, d
            idx, d = assign(C, x)
            assert idx == best
            assert d == pytest.approx(best_d, rel=1e-9)


def test_train_tree_single_bin():
    X = np.random.default_rng(3).normal(size=(40, 4)).astype(np.float32)
    cfg = PqtConfig(dim=4, p_tree=2, k1=1, k2=1, w=1, p_line=2)
    tree = train_tree(VectorSet(X), cfg)
    np.testing.assert_allclose(tree.level1[:, 0].reshape(-1), X.astype(np.float64).mean(axis=0), atol=1e-5)
    assert tree.level2.shape == (2, 1, 1, 2)


def test_level2_trained_on_parent_preimage():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(600, 8)).astype(np.float32) * 10
    cfg = PqtConfig(dim=8, p_tree=2, k1=5, k2=3, w=2, p_line=4, seed=2)
    tree = train_tree(VectorSet(X), cfg)
    for p in range(2):
        sub = X[:, p * 4:(p + 1) * 4]
        labels = np.array([assign(tree.level1[p], x)[0] for x in sub])
        for i in range(cfg.k1):
            pre = sub[labels == i]
            expected = train_kmeans(pre, cfg.k2, cfg.train_iters, _seed(cfg.seed, p, i))
            assert np.array_equal(tree.level2[p, i], expected.centroids)


def _seed(seed, p, i):
    return int(np.random.SeedSequence([seed, p, i]).generate_state(1)[0])


def test_empty_parent_gets_jittered_copies():
    # 3 distinct points but k1 = 5: two parents have no members
    X = np.repeat(np.array([[0, 0], [10, 10], [20, 0]], np.float32), 5, axis=0)
    cfg = PqtConfig(dim=2, p_tree=1, k1=5, k2=3, w=1, p_line=1)
    tree = train_tree(VectorSet(X), cfg)
    labels = [assign(tree.level1[0], x)[0] for x in X]
    empty = sorted(set(range(5)) - set(labels))
    assert empty
    for i in empty:
        kids = tree.level2[0, i].astype(np.float64)
        parent = tree.level1[0, i].astype(np.float64)
        assert np.abs(kids - parent).max() <= 3e-6 * max(1.0, np.abs(parent).max())
        assert len(np.unique(kids, axis=0)) == 3


def test_level1_recovers_blob_means():
    rng = np.random.default_rng(8)
    means = np.array([[0, 0], [100, 0], [0, 100], [100, 100]], np.float64)
    n_blob, sigma = 250, 2.0
    X = np.concatenate([m + sigma * rng.standard_normal((n_blob, 2)) for m in means]).astype(np.float32)
    cfg = PqtConfig(dim=2, p_tree=1, k1=4, k2=1, w=1, p_line=1)
    tree = train_tree(VectorSet(X), cfg)
    tol = 3 * sigma / np.sqrt(n_blob)
    for b, m in enumerate(means):
        sample_mean = X[b * n_blob:(b + 1) * n_blob].astype(np.float64).mean(axis=0)
        nearest = tree.level1[0][np.argmin(((tree.level1[0] - m) ** 2).sum(axis=1))]
        assert np.abs(nearest - sample_mean).max() < tol


def test_train_tree_errors():
    cfg = PqtConfig(dim=4, p_tree=2, k1=2, k2=2, w=1, p_line=2)
    with pytest.raises(ValueError):
        train_tree(VectorSet(np.zeros((0, 4), np.float32)), cfg)
    with pytest.raises(ValueError):
        train_tree(VectorSet(np.zeros((5, 6), np.float32)), cfg)


def test_train_tree_thread_independent():
    X = np.random.default_rng(9).normal(size=(500, 8)).astype(np.float32)
    cfg = PqtConfig(dim=8, p_tree=2, k1=4, k2=4, w=2, p_line=4, seed=1)
    a, b = train_tree(VectorSet(X), cfg, threads=1), train_tree(VectorSet(X), cfg, threads=4)
    assert a.level1.tobytes() == b.level1.tobytes()
    assert a.level2.tobytes() == b.level2.tobytes()
