"""Kernelized sparse self-representation by cyclic coordinate descent.

For each sample j we minimize

    |K[:, j] - K w|^2 + lam_j * |w|_1    subject to  w_j = 0

working entirely on the Gram matrix G = K^T K, so one coordinate update
costs O(1) plus O(n) when the coordinate actually moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .kernel import kernel_entries

PRUNE = 1e-10
EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class SparseWeights:
    """Column-compressed learned weights: column j lists N*(j).

    ``indices[indptr[j]:indptr[j+1]]`` are the neighbors of sample j and
    ``weights`` the matching signed weights, scaled so sum |w| == 1.
    """

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def optimal_k(self) -> np.ndarray:
        return np.diff(self.indptr)

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        s = slice(self.indptr[j], self.indptr[j + 1])
        return self.indices[s], self.weights[s]

    def to_dense(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        for j in range(self.n):
            idx, w = self.column(j)
            W[idx, j] = w
        return W


@dataclass(frozen=True)
class SolveTrace:
    """Objective summed over all columns after each sweep.

    A column that stopped early keeps contributing its final objective.
    """

    objective_per_sweep: np.ndarray
    sweeps_to_converge: int
    sweeps_per_column: np.ndarray


@numba.njit(cache=True)
def soft_threshold(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@numba.njit(cache=True)
def _objective(G, j, w, c, active, lam):
    # |k_j - K w|^2 = G_jj - 2 w.G[:, j] + w.G w, with c = G w
    val = G[j, j]
    l1 = 0.0
    for i in active:
        val += w[i] * (c[i] - 2.0 * G[i, j])
        l1 += abs(w[i])
    return val + lam * l1


@numba.njit(cache=True)
def _support(w):
    return np.flatnonzero(w)


@numba.njit(cache=True)
def _face_objective(G, j, A, v, lam):
    val = G[j, j]
    for a in range(A.size):
        i = A[a]
        q = 0.0
        for b in range(A.size):
            q += G[i, A[b]] * v[b]
        val += v[a] * (q - 2.0 * G[i, j]) + lam * abs(v[a])
    return val


@numba.njit(cache=True)
def _face_solve(GA, rhs):
    try:
        L = np.linalg.cholesky(GA)
    except Exception:
        # duplicate samples make the support Gram singular
        return np.linalg.lstsq(GA, rhs)[0]
    z = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, z)


@numba.njit(cache=True)
def _refine(G, j, w, lam, obj):
    """Exact minimization over the current support with signs held fixed.

    When the unconstrained face minimizer flips a sign, move toward it only
    as far as the first zero crossing and drop that coordinate, then retry
    on the smaller support. Every accepted step keeps the objective from
    increasing. Returns ``(objective, exact)`` where ``exact`` says the
    support now satisfies its optimality condition; ``w`` is updated in place.
    """
    while True:
        A = np.flatnonzero(w)
        if A.size == 0:
            return obj, True
        s = np.sign(w[A])
        GA = np.empty((A.size, A.size))
        rhs = np.empty(A.size)
        for a in range(A.size):
            rhs[a] = G[A[a], j] - 0.5 * lam * s[a]
            for b in range(A.size):
                GA[a, b] = G[A[a], A[b]]
        v = _face_solve(GA, rhs)
        wa = w[A]
        t = 1.0
        drop = -1
        for a in range(A.size):
            if np.sign(v[a]) != s[a]:
                ta = wa[a] / (wa[a] - v[a])
                if ta < t:
                    t = ta
                    drop = a
        step = wa + t * (v - wa)
        if drop >= 0:
            step[drop] = 0.0
        cand = _face_objective(G, j, A, step, lam)
        if not cand <= obj:
            return obj, False
        w[A] = step
        obj = cand
        if drop < 0:
            return obj, True


@numba.njit(cache=True)
def _inactive_excess(G, j, w, c, lam):
    # max over zero coordinates of |2 g_i| - lam; <= 0 means those stay at zero
    worst = -np.inf
    for i in range(G.shape[0]):
        if i == j or w[i] != 0.0:
            continue
        e = abs(2.0 * (G[i, j] - c[i])) - lam
        if e > worst:
            worst = e
    return worst


@numba.njit(cache=True)
def solve_gram(G, j, lam, tol, max_sweeps, trace):
    """Coordinate descent for one column given the Gram matrix.

    Each sweep is a cyclic pass over all coordinates in ascending order
    followed by an exact solve on the resulting support. The run stops when
    the zero coordinates satisfy their optimality condition (the support
    part holds exactly after the solve), when the relative objective
    decrease falls below ``tol``, or after ``max_sweeps``.
    Returns ``(w, sweeps)`` and writes per-sweep objectives into ``trace``.
    """
    n = G.shape[0]
    w = np.zeros(n)
    c = np.zeros(n)
    # a few ulps of slack so lam == 2 max|G_ij| yields zero however G was rounded
    half = 0.5 * lam * (1.0 + 16.0 * EPS)
    prev = G[j, j]
    sweeps = 0
    while sweeps < max_sweeps:
        for i in range(n):
            if i == j:
                continue
            gii = G[i, i]
            gi = G[i, j] - c[i] + gii * w[i]
            new = soft_threshold(gi, half) / gii
            delta = new - w[i]
            if delta != 0.0:
                for r in range(n):
                    c[r] += delta * G[r, i]
                w[i] = new
        obj = _objective(G, j, w, c, _support(w), lam)
        obj, exact = _refine(G, j, w, lam, min(obj, prev))
        A = _support(w)
        c[:] = 0.0
        for a in A:
            for r in range(n):
                c[r] += w[a] * G[r, a]
        if not np.isfinite(obj):
            raise FloatingPointError("non-finite objective in coordinate descent")
        trace[sweeps] = obj
        sweeps += 1
        rel = (prev - obj) / max(abs(prev), 1e-300)
        prev = obj
        if (exact and _inactive_excess(G, j, w, c, lam) <= 0.0) or rel < tol:
            break
    return w, sweeps


def solve_column(K: np.ndarray, j: int, lam: float, tol: float = 1e-6,
                 max_sweeps: int = 300, G: np.ndarray | None = None):
    """Sparse representation of column ``j`` of ``K`` by the other columns.

    Returns ``(w, trace)`` with ``w`` dense of length n and ``w[j] == 0``.
    """
    if G is None:
        G = K.T @ K
    if tol <= 0 or max_sweeps < 1:
        raise ValueError("tol must be positive and max_sweeps at least 1")
    trace = np.zeros(max_sweeps)
    w, sweeps = solve_gram(G, j, float(lam), float(tol), int(max_sweeps), trace)
    return w, trace[:sweeps].copy()


def lasso_objective(K, j, w, lam) -> float:
    r = K[:, j] - K @ w
    return float(r @ r + lam * np.abs(w).sum())


def kkt_violation(K, j, w, lam) -> float:
    """Largest violation of the Lasso optimality conditions for column j."""
    grad = 2.0 * K.T @ (K @ w - K[:, j])
    mask = np.ones(len(w), dtype=bool)
    mask[j] = False
    act = mask & (w != 0)
    zero = mask & (w == 0)
    v_act = np.abs(grad[act] + np.sign(w[act]) * lam)
    v_zero = np.maximum(np.abs(grad[zero]) - lam, 0.0)
    return float(max(v_act.max(initial=0.0), v_zero.max(initial=0.0)))


@numba.njit(cache=True, parallel=True)
def _learn_dense(G, lam, tol, max_sweeps):
    n = G.shape[0]
    W = np.zeros((n, n))
    traces = np.zeros((n, max_sweeps))
    sweeps_of = np.zeros(n, dtype=np.int64)
    for j in numba.prange(n):
        w, s = solve_gram(G, j, lam[j], tol, max_sweeps, traces[j])
        W[:, j] = w
        sweeps_of[j] = s
    return W, traces, sweeps_of


@numba.njit(cache=True, parallel=True)
def _learn_local(X, y, pools, lam, alpha, sigma, gamma, tol, max_sweeps):
    n, p = pools.shape
    Wl = np.zeros((n, p))
    traces = np.zeros((n, max_sweeps))
    sweeps_of = np.zeros(n, dtype=np.int64)
    for j in numba.prange(n):
        pool = pools[j]
        Kl = np.empty((p, p))
        for a in range(p):
            Kl[a, a] = 1.0
            for b in range(a + 1, p):
                diff = X[pool[a]] - X[pool[b]]
                cls = 1.0 if y[pool[a]] == y[pool[b]] else gamma
                v = alpha * np.exp(-np.dot(diff, diff) / (2.0 * sigma * sigma)) + (1.0 - alpha) * cls
                Kl[a, b] = v
                Kl[b, a] = v
        w, s = solve_gram(Kl @ Kl, 0, lam[j], tol, max_sweeps, traces[j])
        Wl[j] = w
        sweeps_of[j] = s
    return Wl, traces, sweeps_of


def _make_trace(traces, sweeps_of) -> SolveTrace:
    """Sum per-column objectives sweep by sweep in a fixed column order, so
    the total does not depend on how columns were spread over threads."""
    T = int(sweeps_of.max(initial=0))
    if T == 0:
        return SolveTrace(np.zeros(0), 0, sweeps_of)
    last = np.minimum(np.arange(T)[None, :], sweeps_of[:, None] - 1)
    objective = np.take_along_axis(traces, last, axis=1).sum(axis=0)
    return SolveTrace(objective, T, sweeps_of)


def _compress(cols_idx, cols_w) -> SparseWeights:
    indptr = [0]
    indices, weights = [], []
    for idx, w in zip(cols_idx, cols_w):
        keep = np.abs(w) >= PRUNE
        idx, w = idx[keep], w[keep]
        total = np.abs(w).sum()
        if total > 0:
            w = w / total
        indices.append(idx)
        weights.append(w)
        indptr.append(indptr[-1] + len(idx))
    return SparseWeights(
        np.asarray(indptr, dtype=np.int64),
        np.concatenate(indices).astype(np.int64) if indices else np.zeros(0, np.int64),
        np.concatenate(weights) if weights else np.zeros(0),
    )


def learn_neighborhoods(K: np.ndarray, lam: np.ndarray, tol: float = 1e-6,
                        max_sweeps: int = 300, G: np.ndarray | None = None):
    """Solve every column of the dense kernel. Returns ``(SparseWeights, SolveTrace)``."""
    n = K.shape[0]
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (n,):
        raise ValueError(f"penalty vector has shape {lam.shape}, expected ({n},)")
    if G is None:
        G = K.T @ K
    W, traces, sweeps_of = _learn_dense(G, lam, float(tol), int(max_sweeps))
    cols = [np.flatnonzero(W[:, j]) for j in range(n)]
    weights = _compress(cols, [W[c, j] for j, c in enumerate(cols)])
    return weights, _make_trace(traces, sweeps_of)


def local_pools(neighbor_idx: np.ndarray) -> np.ndarray:
    """Candidate pools for local mode: each sample followed by its nearest neighbors."""
    n = neighbor_idx.shape[0]
    return np.hstack([np.arange(n)[:, None], neighbor_idx]).astype(np.int64)


def local_column_norms(X, y, pools, alpha, sigma, gamma) -> np.ndarray:
    """Squared norm of each sample's own column in its local kernel."""
    P = X[pools]
    sq = np.sum((P - P[:, :1]) ** 2, axis=2)
    same = y[pools] == y[pools[:, :1]]
    col = kernel_entries(sq, same, alpha, sigma, gamma)
    col[:, 0] = 1.0
    return np.sum(col * col, axis=1)


def learn_neighborhoods_local(X, y, pools, lam, alpha, sigma, gamma,
                              tol: float = 1e-6, max_sweeps: int = 300):
    """Same problem restricted to each sample's candidate pool.

    The kernel for sample j is built over ``pools[j]`` (j first), so memory
    is O(n * pool) instead of O(n^2).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Wl, traces, sweeps_of = _learn_local(
        X, np.asarray(y, dtype=np.int64), pools, np.asarray(lam, dtype=np.float64),
        float(alpha), float(sigma), float(gamma), float(tol), int(max_sweeps))
    cols_idx, cols_w = [], []
    for j in range(len(pools)):
        nz = np.flatnonzero(Wl[j])
        order = np.argsort(pools[j, nz], kind="stable")
        cols_idx.append(pools[j, nz][order])
        cols_w.append(Wl[j, nz][order])
    return _compress(cols_idx, cols_w), _make_trace(traces, sweeps_of)
