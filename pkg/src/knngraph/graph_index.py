"""Multi-layer navigable graph whose bottom layer carries the learned topology.

Upper layers are wired like a standard HNSW index. Layer 0 starts from the
symmetrized learned neighbor sets, gains standard HNSW links for nodes whose
learned degree is below ``M``, and is finally made connected by joining every
stray component to the largest one through its closest cross pair.

Adjacency is kept in padded arrays: ``adj0[u, :deg0[u]]`` for layer 0 and
``adj_up[l - 1, u, :deg_up[l - 1, u]]`` for layer ``l >= 1``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial import cKDTree

from .dataset import DataError, Dataset
from .sparse_learner import SparseWeights


@dataclass(frozen=True)
class IndexParams:
    M: int = 16
    max_degree0: int | None = None
    ef_construction: int = 200
    ef_search: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be at least 2, got {self.M}")
        if self.ef_construction < self.M:
            raise ValueError("ef_construction must be at least M")
        if self.ef_search < 1:
            raise ValueError("ef_search must be at least 1")
        if self.max_degree0 is not None and self.max_degree0 < self.M:
            raise ValueError("max_degree0 must be at least M")

    @property
    def degree0(self) -> int:
        return 2 * self.M if self.max_degree0 is None else self.max_degree0

    @property
    def level_norm(self) -> float:
        return 1.0 / math.log(self.M)


@dataclass
class GraphIndex:
    features: np.ndarray
    labels: np.ndarray
    levels: np.ndarray
    entry_point: int
    adj0: np.ndarray
    deg0: np.ndarray
    adj_up: np.ndarray
    deg_up: np.ndarray
    params: IndexParams = field(default_factory=IndexParams)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def max_level(self) -> int:
        return int(self.levels[self.entry_point])

    @property
    def avg_degree(self) -> float:
        return float(self.deg0.mean())

    def neighbors(self, layer: int, u: int) -> np.ndarray:
        if layer == 0:
            return self.adj0[u, : self.deg0[u]]
        return self.adj_up[layer - 1, u, : self.deg_up[layer - 1, u]]

    def n_components(self) -> int:
        uf = UnionFind(self.n)
        for u in range(self.n):
            for v in self.neighbors(0, u):
                uf.union(u, int(v))
        return uf.n_sets


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.size = np.ones(n, dtype=np.int64)
        self.n_sets = n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return int(a)

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_sets -= 1
        return ra

    def groups(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for u in range(len(self.parent)):
            out.setdefault(self.find(u), []).append(u)
        return out


def draw_levels(n: int, params: IndexParams) -> np.ndarray:
    rng = np.random.default_rng(params.seed)
    u = 1.0 - rng.random(n)  # in (0, 1]
    return np.floor(-np.log(u) * params.level_norm).astype(np.int64)


# ---------------------------------------------------------------- numba core


@numba.njit(cache=True, inline="always")
def sqdist(a, b):
    acc = 0.0
    for t in range(a.shape[0]):
        diff = a[t] - b[t]
        acc += diff * diff
    return acc


@numba.njit(cache=True, inline="always")
def _nbrs(layer, u, adj0, deg0, adj_up, deg_up):
    if layer == 0:
        return adj0[u, : deg0[u]]
    return adj_up[layer - 1, u, : deg_up[layer - 1, u]]


@numba.njit(cache=True)
def _greedy(X, q, ep, ep_d, layer, adj0, deg0, adj_up, deg_up):
    """Move to the closest neighbor until no neighbor is closer."""
    cur, cur_d = ep, ep_d
    count = 0
    changed = True
    while changed:
        changed = False
        for v in _nbrs(layer, cur, adj0, deg0, adj_up, deg_up):
            dv = sqdist(X[v], q)
            count += 1
            if dv < cur_d:
                cur, cur_d = v, dv
                changed = True
    return cur, cur_d, count


@numba.njit(cache=True)
def _search_layer(X, q, entries, entry_d, ef, layer, adj0, deg0, adj_up, deg_up, mask, use_mask):
    """Best-first search keeping the ``ef`` closest nodes seen.

    Returns ``(dists, ids, count)`` sorted by increasing distance, where
    ``count`` is the number of distance evaluations performed here.
    """
    visited = {entries[0]}
    cand = [(entry_d[0], entries[0])]
    res = [(-entry_d[0], entries[0])]
    for a in range(1, entries.size):
        e = entries[a]
        visited.add(e)
        heapq.heappush(cand, (entry_d[a], e))
        heapq.heappush(res, (-entry_d[a], e))
        if len(res) > ef:
            heapq.heappop(res)
    count = 0
    while len(cand) > 0:
        d_c, c = heapq.heappop(cand)
        if d_c > -res[0][0] and len(res) >= ef:
            break
        for v in _nbrs(layer, c, adj0, deg0, adj_up, deg_up):
            if v in visited:
                continue
            visited.add(v)
            if use_mask and not mask[v]:
                continue
            dv = sqdist(X[v], q)
            count += 1
            if len(res) < ef or dv < -res[0][0]:
                heapq.heappush(cand, (dv, v))
                heapq.heappush(res, (-dv, v))
                if len(res) > ef:
                    heapq.heappop(res)
    m = len(res)
    ds = np.empty(m)
    ids = np.empty(m, dtype=np.int64)
    for t in range(m):
        ds[t] = -res[t][0]
        ids[t] = res[t][1]
    # sort by (distance, id) for deterministic ties
    o1 = np.argsort(ids)
    ds, ids = ds[o1], ids[o1]
    o2 = np.argsort(ds, kind="mergesort")
    return ds[o2], ids[o2], count


@numba.njit(cache=True)
def _select(X, cand_d, cand_ids, M, skip, skip_n):
    """Diversity heuristic: keep a candidate only if it is closer to the base
    point than to every candidate already kept."""
    out = np.empty(M, dtype=np.int64)
    k = 0
    for a in range(cand_ids.size):
        e = cand_ids[a]
        bad = False
        for s in range(skip_n):
            if skip[s] == e:
                bad = True
                break
        if bad:
            continue
        good = True
        for b in range(k):
            if sqdist(X[e], X[out[b]]) < cand_d[a]:
                good = False
                break
        if good:
            out[k] = e
            k += 1
            if k == M:
                break
    return out[:k]


@numba.njit(cache=True)
def _has(row, deg, v):
    for a in range(deg):
        if row[a] == v:
            return True
    return False


@numba.njit(cache=True)
def _select_fill(X, cand_d, cand_ids, want, skip, skip_n):
    """Diversity heuristic, then topped up with the nearest pruned candidates
    until ``want`` links are found (HNSW's keep-pruned-connections variant)."""
    first = _select(X, cand_d, cand_ids, want, skip, skip_n)
    if first.size >= want:
        return first
    out = np.empty(want, dtype=np.int64)
    out[: first.size] = first
    k = first.size
    for a in range(cand_ids.size):
        if k == want:
            break
        e = cand_ids[a]
        if _has(skip, skip_n, e) or _has(out, k, e):
            continue
        out[k] = e
        k += 1
    return out[:k]


@numba.njit(cache=True)
def _shrink(X, u, row, deg, M):
    """Re-select ``u``'s neighbor list in place down to ``M`` entries."""
    ids = row[:deg].copy()
    ds = np.empty(deg)
    for a in range(deg):
        ds[a] = sqdist(X[u], X[ids[a]])
    order = np.argsort(ds, kind="mergesort")
    ids = ids[order]
    ds = ds[order]
    keep = _select(X, ds, ids, M, ids[:0], 0)
    row[:] = -1
    row[: keep.size] = keep
    return keep.size


@numba.njit(cache=True)
def _build(X, levels, adj0, deg0, learned_deg, adj_up, deg_up, M, M0, ef_c, standard0):
    n = X.shape[0]
    inserted = np.zeros(n, dtype=np.bool_)
    entry = 0
    top = levels[0]
    inserted[0] = True
    for q in range(1, n):
        xq = X[q]
        lq = levels[q]
        ep = entry
        ep_d = sqdist(X[ep], xq)
        for layer in range(top, lq, -1):
            ep, ep_d, _ = _greedy(X, xq, ep, ep_d, layer, adj0, deg0, adj_up, deg_up)
        entries = np.array([ep])
        entry_d = np.array([ep_d])
        for layer in range(min(top, lq), -1, -1):
            ds, ids, _ = _search_layer(X, xq, entries, entry_d, ef_c, layer,
                                       adj0, deg0, adj_up, deg_up, inserted, True)
            if layer > 0 or standard0:
                cap = M if layer > 0 else M0
                sel = _select(X, ds, ids, M, ids[:0], 0)
                if layer > 0:
                    row_q = adj_up[layer - 1, q]
                else:
                    row_q = adj0[q]
                row_q[: sel.size] = sel
                if layer > 0:
                    deg_up[layer - 1, q] = sel.size
                else:
                    deg0[q] = sel.size
                for e in sel:
                    if layer > 0:
                        row = adj_up[layer - 1, e]
                        dg = deg_up[layer - 1, e]
                    else:
                        row = adj0[e]
                        dg = deg0[e]
                    # rows carry one spare slot beyond cap for this append
                    row[dg] = q
                    dg += 1
                    if dg > cap:
                        dg = _shrink(X, e, row, dg, cap)
                    if layer > 0:
                        deg_up[layer - 1, e] = dg
                    else:
                        deg0[e] = dg
            elif learned_deg[q] < M:
                sel = _select_fill(X, ds, ids, M0 - deg0[q], adj0[q], deg0[q])
                for e in sel:
                    if deg0[q] >= M0:
                        break
                    if deg0[e] >= M0 or e == q:
                        continue
                    adj0[q, deg0[q]] = e
                    deg0[q] += 1
                    adj0[e, deg0[e]] = q
                    deg0[e] += 1
            entries = ids
            entry_d = ds
        if lq > top:
            entry = q
            top = lq
        inserted[q] = True
    return entry


@numba.njit(cache=True)
def _query(X, q, entry, top, ef, adj0, deg0, adj_up, deg_up):
    """Greedy descent through the upper layers, then a layer-0 beam of width ``ef``."""
    ep = entry
    ep_d = sqdist(X[ep], q)
    count = 1
    for layer in range(top, 0, -1):
        ep, ep_d, c = _greedy(X, q, ep, ep_d, layer, adj0, deg0, adj_up, deg_up)
        count += c
    dummy = np.zeros(1, dtype=np.bool_)
    ds, ids, c = _search_layer(X, q, np.array([ep]), np.array([ep_d]), ef, 0,
                               adj0, deg0, adj_up, deg_up, dummy, False)
    return ds, ids, count + c


@numba.njit(cache=True)
def _predict_batch(X, labels, Q, entry, top, ef, adj0, deg0, adj_up, deg_up):
    m = Q.shape[0]
    out = np.empty(m, dtype=np.int64)
    counts = np.empty(m, dtype=np.int64)
    for a in range(m):
        ds, ids, c = _query(X, Q[a], entry, top, ef, adj0, deg0, adj_up, deg_up)
        out[a] = labels[ids[0]]
        counts[a] = c
    return out, counts


# ------------------------------------------------------------- construction


def _learned_edges(W: SparseWeights) -> list[tuple[float, int, int]]:
    """Symmetrized learned links as ``(weight, a, b)`` with ``a < b``, heaviest first."""
    best: dict[tuple[int, int], float] = {}
    for j in range(W.n):
        idx, w = W.column(j)
        for i, wij in zip(idx.tolist(), np.abs(w).tolist()):
            if i == j:
                continue
            key = (i, j) if i < j else (j, i)
            if wij > best.get(key, -1.0):
                best[key] = wij
    edges = [(wt, a, b) for (a, b), wt in best.items()]
    edges.sort(key=lambda t: (-t[0], t[1], t[2]))
    return edges


def _alloc(n: int, levels: np.ndarray, params: IndexParams):
    L = int(levels.max()) if n else 0
    M, M0 = params.M, params.degree0
    # one spare slot per row lets a reverse link land before shrinking
    adj0 = np.full((n, M0 + 1), -1, dtype=np.int64)
    deg0 = np.zeros(n, dtype=np.int64)
    adj_up = np.full((L, n, M + 1), -1, dtype=np.int64)
    deg_up = np.zeros((L, n), dtype=np.int64)
    return adj0, deg0, adj_up, deg_up


def _repair(X: np.ndarray, adj0: np.ndarray, deg0: np.ndarray):
    """Join every layer-0 component to the largest one by its closest cross pair."""
    n = X.shape[0]
    uf = UnionFind(n)
    for u in range(n):
        for v in adj0[u, : deg0[u]]:
            uf.union(u, int(v))
    if uf.n_sets == 1:
        return adj0, []
    groups = sorted(uf.groups().values(), key=lambda g: (-len(g), g[0]))
    main = np.asarray(groups[0])
    tree = cKDTree(X[main])
    added = []
    for comp in groups[1:]:
        comp = np.asarray(comp)
        dist, pos = tree.query(X[comp], k=1)
        a = int(np.lexsort((comp, dist))[0])
        u, v = int(comp[a]), int(main[pos[a]])
        added.append((u, v))
    extra = np.bincount(np.array(added).ravel(), minlength=n)
    need = int((deg0 + extra).max())
    if need > adj0.shape[1]:
        adj0 = np.hstack([adj0, np.full((n, need - adj0.shape[1]), -1, dtype=np.int64)])
    for u, v in added:
        adj0[u, deg0[u]] = v
        deg0[u] += 1
        adj0[v, deg0[v]] = u
        deg0[v] += 1
    return adj0, added


def build_index(ds: Dataset, W: SparseWeights | None, labels: np.ndarray,
                params: IndexParams = IndexParams()) -> GraphIndex:
    """Insert every sample in index order.

    With ``W`` given, layer 0 embeds the learned links; with ``W=None`` it is
    wired by the standard HNSW rule (the static baseline).
    """
    n = ds.n
    if n < 1:
        raise DataError("cannot index an empty dataset")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match n={n}")
    X = ds.features
    levels = draw_levels(n, params)
    adj0, deg0, adj_up, deg_up = _alloc(n, levels, params)
    M0 = params.degree0
    learned_deg = np.zeros(n, dtype=np.int64)
    if W is not None:
        if W.n != n:
            raise ValueError(f"weights cover {W.n} samples, dataset has {n}")
        for _, a, b in _learned_edges(W):
            if deg0[a] < M0 and deg0[b] < M0:
                adj0[a, deg0[a]] = b
                deg0[a] += 1
                adj0[b, deg0[b]] = a
                deg0[b] += 1
        learned_deg[:] = deg0
    entry = 0
    if n > 1:
        entry = int(_build(X, levels, adj0, deg0, learned_deg, adj_up, deg_up,
                           params.M, M0, params.ef_construction, W is None))
    # the entry point is the first node drawn at the top level
    assert levels[entry] == levels.max()
    adj0, _ = _repair(X, adj0, deg0)
    return GraphIndex(X, labels, levels, entry, adj0, deg0, adj_up, deg_up, params)


# ------------------------------------------------------------------ queries


def _check_query(idx: GraphIndex, q) -> np.ndarray:
    q = np.ascontiguousarray(q, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != idx.d:
        raise DataError(f"query has dimension {q.shape[-1] if q.ndim else 0}, index has {idx.d}")
    return q


def search(idx: GraphIndex, q, ef: int):
    """Layer-0 result pool for ``q``: ``(sq_dists, ids, distance_evaluations)``."""
    if ef < 1:
        raise ValueError("ef must be at least 1")
    q = _check_query(idx, q)
    return _query(idx.features, q, idx.entry_point, idx.max_level, int(ef),
                  idx.adj0, idx.deg0, idx.adj_up, idx.deg_up)


def search_nearest(idx: GraphIndex, q, ef: int | None = None) -> int:
    ef = idx.params.ef_search if ef is None else ef
    _, ids, _ = search(idx, q, ef)
    return int(ids[0])


def predict(idx: GraphIndex, q) -> int:
    """Label stored on the node the search lands on; no voting at query time."""
    return int(idx.labels[search_nearest(idx, q)])


def predict_batch(idx: GraphIndex, Q, ef: int | None = None):
    """Labels and per-query distance-evaluation counts for a query matrix."""
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    if Q.ndim != 2 or (Q.shape[0] and Q.shape[1] != idx.d):
        raise DataError(f"queries have dimension {Q.shape[-1]}, index has {idx.d}")
    ef = idx.params.ef_search if ef is None else ef
    if Q.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return _predict_batch(idx.features, idx.labels, Q, idx.entry_point, idx.max_level,
                          int(ef), idx.adj0, idx.deg0, idx.adj_up, idx.deg_up)
