import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knngraph.classifier import bruteforce_knn_counted
from knngraph.dataset import DataError, Dataset, make_blobs
from knngraph.graph_index import (IndexParams, UnionFind, build_index, draw_levels, predict,
                                  predict_batch, search, search_nearest)
from knngraph.sparse_learner import SparseWeights
from oracles import brute_nearest


def symmetric(idx):
    for u in range(idx.n):
        for v in idx.neighbors(0, u):
            if u not in idx.neighbors(0, int(v)):
                return False
    return True


def layers_respect_levels(idx):
    for layer in range(1, idx.max_level + 1):
        for u in range(idx.n):
            nb = idx.neighbors(layer, u)
            if idx.levels[u] < layer and nb.size:
                return False
            if np.any(idx.levels[nb] < layer):
                return False
    return True


def test_single_node():
    ds = Dataset(np.array([[1.0, 2.0]]), np.array([0]))
    idx = build_index(ds, None, ds.labels, IndexParams())
    assert idx.entry_point == 0 and idx.n_components() == 1
    assert search_nearest(idx, np.array([5.0, 5.0])) == 0


def test_empty_dataset_rejected():
    with pytest.raises(DataError):
        Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int))


def test_params_validation():
    with pytest.raises(ValueError):
        IndexParams(M=1)
    with pytest.raises(ValueError):
        IndexParams(M=16, ef_construction=8)
    with pytest.raises(ValueError):
        IndexParams(ef_search=0)
    assert IndexParams(M=8).degree0 == 16


def test_levels_geometric_and_seeded():
    p = IndexParams(M=16, seed=5)
    a, b = draw_levels(20000, p), draw_levels(20000, p)
    assert np.array_equal(a, b)
    # P(level >= 1) = 1/M
    assert abs(np.mean(a >= 1) - 1 / 16) < 0.01


@pytest.fixture(scope="module")
def blobs2000():
    return make_blobs(3000, 10, 3, std=1.4, seed=21)


@pytest.fixture(scope="module")
def static2000(blobs2000):
    ds = blobs2000.subset(np.arange(2000))
    return ds, build_index(ds, None, ds.labels, IndexParams(seed=2))


def test_static_structure(static2000):
    ds, idx = static2000
    assert idx.n_components() == 1
    assert layers_respect_levels(idx)
    assert idx.levels[idx.entry_point] == idx.levels.max()


def test_recall_at_ef32(static2000, blobs2000):
    ds, idx = static2000
    Q = blobs2000.features[2000:]
    hits = 0
    for q in Q[:1000]:
        hits += search_nearest(idx, q, 32) == int(np.argmin(((ds.features - q) ** 2).sum(1)))
    assert hits / 1000 >= 0.95


def test_exhaustive_ef_equals_brute_force(static2000, blobs2000):
    ds, idx = static2000
    for q in blobs2000.features[2000:2100]:
        got = search_nearest(idx, q, idx.n)
        ref, _ = brute_nearest(ds.features.tolist(), q.tolist())
        assert got == ref


def test_training_point_is_found_at_distance_zero(static2000):
    ds, idx = static2000
    for j in (0, 17, 999, 1999):
        d, ids, _ = search(idx, ds.features[j], 1)
        assert d[0] == 0.0 and ids[0] == j


def test_counts_are_bounded_and_positive(static2000, blobs2000):
    _, idx = static2000
    labels, counts = predict_batch(idx, blobs2000.features[2000:2200])
    assert np.all(counts >= 1) and np.all(counts < idx.n)


def test_query_dimension_mismatch(static2000):
    _, idx = static2000
    with pytest.raises(DataError, match="dimension"):
        search_nearest(idx, np.zeros(3))
    with pytest.raises(DataError):
        predict_batch(idx, np.zeros((2, 3)))


def chain_weights(n):
    """Each sample's learned neighbor is its successor (last one: predecessor)."""
    idx = [j + 1 if j + 1 < n else j - 1 for j in range(n)]
    return SparseWeights(np.arange(n + 1), np.array(idx), np.ones(n))


def test_learned_links_embedded_and_symmetric():
    ds = make_blobs(300, 4, 2, std=1.0, seed=3)
    W = chain_weights(ds.n)
    idx = build_index(ds, W, ds.labels, IndexParams(M=8, seed=1))
    assert symmetric(idx)
    assert idx.n_components() == 1
    assert layers_respect_levels(idx)
    for j in range(ds.n):
        nb, _ = W.column(j)
        assert set(nb.tolist()) <= set(idx.neighbors(0, j).tolist())


def test_repair_joins_far_clusters():
    # two clusters whose learned links never cross; the seam must be repaired
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 0.1, (30, 2)), rng.normal(100, 0.1, (30, 2))])
    ds = Dataset(X, np.repeat([0, 1], 30))
    nbr = [(j + 1) % 30 for j in range(30)] + [30 + (j + 1) % 30 for j in range(30)]
    W = SparseWeights(np.arange(61), np.array(nbr), np.ones(60))
    idx = build_index(ds, W, ds.labels, IndexParams(M=2, ef_construction=2, seed=0))
    assert idx.n_components() == 1
    assert symmetric(idx)


def test_predict_returns_stored_label():
    ds = make_blobs(200, 3, 3, std=0.5, seed=8)
    stored = (ds.labels + 1) % 3
    idx = build_index(ds, None, stored, IndexParams(seed=0))
    for j in range(0, 200, 13):
        assert predict(idx, ds.features[j]) == stored[j]


def test_single_class_always_zero():
    ds = Dataset(np.random.default_rng(0).normal(size=(50, 2)), np.zeros(50, dtype=int))
    idx = build_index(ds, None, ds.labels, IndexParams())
    assert set(predict_batch(idx, np.random.default_rng(1).normal(size=(20, 2)))[0].tolist()) == {0}


def test_interior_query_gets_blob_label():
    ds = make_blobs(600, 5, 3, std=0.5, separation=8.0, seed=4)
    idx = build_index(ds, None, ds.labels, IndexParams(seed=0))
    centers = np.array([ds.features[ds.labels == k].mean(0) for k in range(3)])
    for k, c in enumerate(centers):
        assert predict(idx, c) == k == bruteforce_knn_counted(ds, c, 5)[0]


def test_deterministic_build():
    ds = make_blobs(400, 4, 2, seed=9)
    a = build_index(ds, chain_weights(ds.n), ds.labels, IndexParams(seed=4))
    b = build_index(ds, chain_weights(ds.n), ds.labels, IndexParams(seed=4))
    for name in ("levels", "adj0", "deg0", "adj_up", "deg_up"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.entry_point == b.entry_point


@settings(max_examples=25)
@given(n=st.integers(2, 80), d=st.integers(1, 4), M=st.integers(2, 6), seed=st.integers(0, 1000))
def test_random_builds_are_connected_and_symmetric(n, d, M, seed):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.normal(size=(n, d)) * rng.uniform(0.1, 10, d), np.zeros(n, dtype=int))
    k = rng.integers(0, 4, n)
    cols = [rng.choice(np.delete(np.arange(n), j), size=min(int(k[j]), n - 1), replace=False) for j in range(n)]
    W = SparseWeights(np.cumsum([0] + [len(c) for c in cols]), np.concatenate(cols).astype(np.int64),
                      np.ones(int(sum(len(c) for c in cols))))
    idx = build_index(ds, W, ds.labels, IndexParams(M=M, ef_construction=max(M, 10), seed=seed))
    assert idx.n_components() == 1
    assert symmetric(idx)
    assert layers_respect_levels(idx)
    q = rng.normal(size=d)
    assert search_nearest(idx, q, n) == brute_nearest(ds.features.tolist(), q.tolist())[0]


def test_union_find():
    uf = UnionFind(6)
    uf.union(0, 1)
    uf.union(2, 3)
    uf.union(1, 3)
    assert uf.n_sets == 3
    assert uf.find(0) == uf.find(2)
    assert sorted(len(g) for g in uf.groups().values()) == [1, 1, 4]
