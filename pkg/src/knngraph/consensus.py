"""Training-time weighted consensus labels stored on graph nodes."""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .sparse_learner import SparseWeights


@dataclass(frozen=True)
class ConsensusLabels:
    y_hat: np.ndarray
    self_weight: np.ndarray


def consensus_label(own_label: int, neighbors, self_weight_scale: float = 1.0) -> int:
    """Weighted mode over the node's own label and its neighbors' labels.

    ``neighbors`` is a sequence of ``(class_id, weight)`` pairs with
    non-negative weights. The own label carries the largest neighbor weight
    (times ``self_weight_scale``). A tie that includes the own label keeps
    it; other ties go to the smallest class id.
    """
    if not self_weight_scale >= 0:
        raise ValueError(f"self_weight_scale must be non-negative, got {self_weight_scale}")
    neighbors = list(neighbors)
    if not neighbors:
        return int(own_label)
    groups: dict[int, list[float]] = {}
    w_max = 0.0
    for label, w in neighbors:
        w = float(w)
        if not (w >= 0 and math.isfinite(w)):
            raise ValueError("vote weights must be finite and non-negative")
        groups.setdefault(int(label), []).append(w)
        w_max = max(w_max, w)
    own = int(own_label)
    w_self = self_weight_scale * w_max
    groups.setdefault(own, [])
    masses = {label: math.fsum(ws + [w_self] if label == own else ws) for label, ws in groups.items()}
    ranked = sorted(masses.values(), reverse=True)
    if len(ranked) > 1 and ranked[0] - ranked[1] <= 1e-12 * ranked[0]:
        # near tie: decide on the exact sums so rounding cannot pick the winner
        exact = {label: sum(map(Fraction, ws), Fraction(0)) for label, ws in groups.items()}
        exact[own] += Fraction(self_weight_scale) * Fraction(w_max)
        masses = exact
    top = max(masses.values())
    if masses[own] == top:
        return own
    return min(label for label, m in masses.items() if m == top)


def precompute_all(ds: Dataset, W: SparseWeights, self_weight_scale: float = 1.0) -> ConsensusLabels:
    if W.n != ds.n:
        raise ValueError(f"weights cover {W.n} samples, dataset has {ds.n}")
    y = ds.labels
    y_hat = np.empty(ds.n, dtype=np.int64)
    w_self = np.zeros(ds.n)
    for j in range(ds.n):
        idx, w = W.column(j)
        w = np.abs(w)
        if w.size:
            w_self[j] = w.max()
        y_hat[j] = consensus_label(y[j], zip(y[idx], w), self_weight_scale)
    return ConsensusLabels(y_hat, w_self)
