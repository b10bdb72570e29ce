"""Independent reference implementations used as test oracles.

Written with plain loops and no shared code paths with the package, so an
agreement between the two is evidence rather than tautology.
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def kernel_entry(xi, xj, same, alpha=0.5, sigma=1.0, gamma=0.1):
    d2 = sum((a - b) ** 2 for a, b in zip(xi, xj))
    cls = 1.0 if same else gamma
    return alpha * math.exp(-d2 / (2 * sigma * sigma)) + (1 - alpha) * cls


def naive_kernel(X, y, alpha=0.5, sigma=1.0, gamma=0.1):
    n = len(X)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = kernel_entry(X[i], X[j], y[i] == y[j], alpha, sigma, gamma)
    return K


def pairwise_median(X):
    d = [math.dist(X[i], X[j]) for i in range(len(X)) for j in range(i + 1, len(X))]
    return float(np.median(d))


def lasso_value(K, j, w, lam):
    r = K[:, j] - K @ w
    return float(r @ r + lam * np.abs(w).sum())


def best_small_support(K, j, lam, max_size=2):
    """Minimum objective over all supports of size <= max_size, each solved
    exactly by least squares and then charged the L1 penalty."""
    n = K.shape[0]
    others = [i for i in range(n) if i != j]
    best = float(K[:, j] @ K[:, j])
    for size in range(1, max_size + 1):
        for S in itertools.combinations(others, size):
            A = K[:, list(S)]
            v, *_ = np.linalg.lstsq(A, K[:, j], rcond=None)
            w = np.zeros(n)
            w[list(S)] = v
            best = min(best, lasso_value(K, j, w, lam))
    return best


def vote(own_label, neighbors, self_weight_scale=1.0):
    """Exact rational tally. The own label survives any tie it is part of;
    otherwise the first class reached in ascending order wins."""
    if not neighbors:
        return own_label
    w_self = Fraction(self_weight_scale) * max(Fraction(w) for _, w in neighbors)
    classes = sorted({own_label} | {label for label, _ in neighbors})
    best, best_mass = None, None
    for k in classes:
        mass = sum((Fraction(w) for label, w in neighbors if label == k), Fraction(0))
        if k == own_label:
            mass += w_self
        if best_mass is None or mass > best_mass:
            best, best_mass = k, mass
    own_mass = sum((Fraction(w) for label, w in neighbors if label == own_label), Fraction(0)) + w_self
    return own_label if own_mass == best_mass else best


def macro_naive(cm):
    c = len(cm)
    precisions, recalls = [], []
    for k in range(c):
        tp = cm[k][k]
        fp = sum(cm[r][k] for r in range(c)) - tp
        fn = sum(cm[k][col] for col in range(c)) - tp
        precisions.append(tp / (tp + fp) if tp + fp else 0.0)
        recalls.append(tp / (tp + fn) if tp + fn else 0.0)
    P = sum(precisions) / c
    R = sum(recalls) / c
    F = 2 * P * R / (P + R) if P + R else 0.0
    return P, R, F


def brute_nearest(X, q):
    best, arg = math.inf, -1
    for i, x in enumerate(X):
        d = sum((a - b) ** 2 for a, b in zip(x, q))
        if d < best:
            best, arg = d, i
    return arg, best


def brute_knn_vote(X, y, q, k):
    d = [(sum((a - b) ** 2 for a, b in zip(x, q)), i) for i, x in enumerate(X)]
    d.sort()
    counts = {}
    for _, i in d[:k]:
        counts[y[i]] = counts.get(y[i], 0) + 1
    top = max(counts.values())
    return min(c for c, v in counts.items() if v == top)
