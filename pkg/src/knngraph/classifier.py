"""Training pipeline for the adaptive graph classifier, plus the two baselines."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from . import density as dens
from .config import RunConfig
from .consensus import ConsensusLabels, precompute_all
from .dataset import DataError, Dataset
from .graph_index import GraphIndex, IndexParams, build_index, predict_batch, search, sqdist
from .kernel import KernelParams, build_kernel, resolve_sigma
from .sparse_learner import (SolveTrace, SparseWeights, learn_neighborhoods,
                             learn_neighborhoods_local, local_column_norms, local_pools)

log = logging.getLogger(__name__)


@dataclass
class TrainedModel:
    index: GraphIndex
    config: RunConfig
    class_names: tuple[str, ...]
    resolved: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None
    # in-memory only; not persisted
    weights: SparseWeights | None = None
    consensus: ConsensusLabels | None = None
    trace: SolveTrace | None = None
    timings: dict = field(default_factory=dict)

    def transform(self, Q) -> np.ndarray:
        Q = np.asarray(Q, dtype=np.float64)
        if self.shift is not None:
            Q = (Q - self.shift) / self.scale
        return Q

    def predict(self, Q, ef: int | None = None) -> np.ndarray:
        labels, _ = self.predict_counted(Q, ef)
        return labels

    def predict_counted(self, Q, ef: int | None = None):
        """Predicted class ids and per-query distance-evaluation counts."""
        Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        if Q.shape[0] and Q.shape[1] != self.index.d:
            raise DataError(f"queries have d={Q.shape[1]} but the model was trained with d={self.index.d}")
        return predict_batch(self.index, self.transform(Q), ef)


def index_params(cfg: RunConfig) -> IndexParams:
    return IndexParams(M=cfg.M, max_degree0=cfg.max_degree0,
                       ef_construction=cfg.ef_construction, ef_search=cfg.ef_search,
                       seed=cfg.level_seed)


def _resolve_bounds(cfg: RunConfig, col_sq_norms: np.ndarray) -> tuple[float, float]:
    lo, hi = dens.default_lambda_bounds(col_sq_norms)
    lo = lo if cfg.lambda_min == "auto" else float(cfg.lambda_min)
    hi = hi if cfg.lambda_max == "auto" else float(cfg.lambda_max)
    if cfg.lambda_max == "auto" and hi <= lo:
        hi = 2.0 * lo
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lambda_min < lambda_max, got {lo:g}, {hi:g}")
    dens.check_connectivity(lo, col_sq_norms)
    return lo, hi


def train(ds: Dataset, cfg: RunConfig = RunConfig()) -> TrainedModel:
    """kernel -> density -> penalties -> sparse weights -> consensus -> index."""
    if ds.n < 2:
        raise DataError("training needs at least two samples")
    if cfg.threads > 0:
        numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
    timings = {}
    t_start = time.perf_counter()
    shift = scale = None
    if cfg.normalize:
        shift = ds.features.mean(axis=0)
        scale = ds.features.std(axis=0)
        scale[scale == 0] = 1.0
        ds = ds.zscore()
    kp = KernelParams(cfg.alpha, cfg.sigma, cfg.gamma)
    sigma = resolve_sigma(ds, seed=cfg.sigma_seed) if cfg.sigma == "auto" else float(cfg.sigma)

    t = time.perf_counter()
    if cfg.kernel_mode == "dense":
        budget = int(cfg.memory_budget_gib * 2**30)
        K = build_kernel(ds, kp, sigma=sigma, budget=budget)
        G = K @ K
        norms = np.diag(G).copy()
        profile = dens.compute_density(ds, cfg.density_scales)
        lo, hi = _resolve_bounds(cfg, norms)
        sched = dens.schedule_lambda(profile, lo, hi)
        timings["kernel_s"] = time.perf_counter() - t
        t = time.perf_counter()
        W, trace = learn_neighborhoods(K, sched.lam, cfg.tol, cfg.max_sweeps, G=G)
        del K, G
    else:
        scales = dens._clip_scales(cfg.density_scales, ds.n)
        pool = min(cfg.candidate_pool, ds.n - 1)
        dist, nbr = dens.neighbor_distances(ds.features, max(pool, scales[-1]))
        profile = dens.density_from_distances(dist, scales)
        pools = local_pools(nbr[:, :pool])
        norms = local_column_norms(ds.features, ds.labels, pools, kp.alpha, sigma, kp.gamma)
        lo, hi = _resolve_bounds(cfg, norms)
        sched = dens.schedule_lambda(profile, lo, hi)
        timings["kernel_s"] = time.perf_counter() - t
        t = time.perf_counter()
        W, trace = learn_neighborhoods_local(ds.features, ds.labels, pools, sched.lam,
                                             kp.alpha, sigma, kp.gamma, cfg.tol, cfg.max_sweeps)
    timings["learn_s"] = time.perf_counter() - t

    t = time.perf_counter()
    cons = precompute_all(ds, W, cfg.self_weight_scale)
    idx = build_index(ds, W, cons.y_hat, index_params(cfg))
    timings["index_s"] = time.perf_counter() - t
    timings["train_s"] = time.perf_counter() - t_start

    k = W.optimal_k
    stats = {
        "n": ds.n,
        "d": ds.d,
        "c": ds.c,
        "mean_k": float(k.mean()),
        "min_k": int(k.min()),
        "max_k": int(k.max()),
        "k_histogram": np.bincount(k).tolist(),
        "avg_degree": idx.avg_degree,
        "max_level": idx.max_level,
        "sweeps_to_converge": int(trace.sweeps_to_converge),
        "final_objective": float(trace.objective_per_sweep[-1]) if trace.sweeps_to_converge else 0.0,
        "consensus_changed": int(np.sum(cons.y_hat != ds.labels)),
    }
    resolved = {"sigma": sigma, "lambda_min": lo, "lambda_max": hi}
    log.info("trained n=%d mean K_j=%.2f avg degree=%.2f in %.2fs",
             ds.n, stats["mean_k"], stats["avg_degree"], timings["train_s"])
    return TrainedModel(idx, cfg, ds.class_names, resolved, stats, shift, scale,
                        W, cons, trace, timings)


# ---------------------------------------------------------------- baselines


def majority(labels: np.ndarray, n_classes: int) -> int:
    """Unweighted vote; ties go to the smallest class id."""
    return int(np.argmax(np.bincount(labels, minlength=n_classes)))


@numba.njit(cache=True)
def _all_dists(X, q):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = sqdist(X[i], q)
    return out


def _k_smallest(d: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances, ties broken by smaller index."""
    if k < d.size:
        kth = np.partition(d, k - 1)[k - 1]
        cand = np.flatnonzero(d <= kth)
    else:
        cand = np.arange(d.size)
    order = np.lexsort((cand, d[cand]))
    return cand[order[:k]]


def bruteforce_knn_counted(ds_train: Dataset, q, k: int):
    """Exact kNN majority vote; returns ``(label, distance_evaluations)``."""
    if ds_train.n == 0:
        raise DataError("empty training set")
    if not 1 <= k <= ds_train.n:
        raise ValueError(f"k must lie in [1, {ds_train.n}], got {k}")
    q = np.ascontiguousarray(q, dtype=np.float64)
    if q.shape != (ds_train.d,):
        raise DataError(f"query has dimension {q.shape[-1]}, training data has {ds_train.d}")
    d = _all_dists(ds_train.features, q)
    nn = _k_smallest(d, k)
    return majority(ds_train.labels[nn], ds_train.c), ds_train.n


def baseline_bruteforce_knn(ds_train: Dataset, q, k: int = 1) -> int:
    return bruteforce_knn_counted(ds_train, q, k)[0]


@dataclass
class StaticHNSW:
    """Standard HNSW over raw labels with query-time majority voting."""

    index: GraphIndex
    n_classes: int

    @classmethod
    def build(cls, ds_train: Dataset, params: IndexParams = IndexParams()) -> "StaticHNSW":
        return cls(build_index(ds_train, None, ds_train.labels, params), ds_train.c)

    def predict_counted(self, q, k: int, ef: int | None = None):
        """Vote over the k best of a beam of width max(ef, k).

        The k winners' distances are recomputed for the final ranking, which
        is the per-query voting cost this baseline carries.
        """
        if not 1 <= k <= self.index.n:
            raise ValueError(f"k must lie in [1, {self.index.n}], got {k}")
        ef = self.index.params.ef_search if ef is None else ef
        _, ids, count = search(self.index, q, max(ef, k))
        top = ids[:k]
        q = np.ascontiguousarray(q, dtype=np.float64)
        d = np.array([sqdist(self.index.features[i], q) for i in top])
        count += len(top)
        top = top[np.lexsort((top, d))]
        return majority(self.index.labels[top], self.n_classes), count

    def predict(self, q, k: int, ef: int | None = None) -> int:
        return self.predict_counted(q, k, ef)[0]


def baseline_static_hnsw(ds_train: Dataset, p: IndexParams, q, k: int) -> int:
    """One-shot convenience wrapper; build once with StaticHNSW for repeated queries."""
    return StaticHNSW.build(ds_train, p).predict(q, k)
