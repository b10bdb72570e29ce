"""Composite feature/label kernel.

K[i, j] = alpha * exp(-|x_i - x_j|^2 / (2 sigma^2)) + (1 - alpha) * C[i, j]
with C[i, j] = 1 for equal labels and ``gamma`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .dataset import DataError, Dataset

# float64 K plus its Gram matrix K @ K must fit in this many bytes
DEFAULT_MEMORY_BUDGET = 2 * 1024**3


@dataclass(frozen=True)
class KernelParams:
    alpha: float = 0.5
    sigma: float | str = "auto"
    gamma: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.sigma != "auto" and not float(self.sigma) > 0:
            raise ValueError(f"sigma must be positive or 'auto', got {self.sigma}")


def resolve_sigma(ds: Dataset, max_samples: int = 1000, seed: int = 0) -> float:
    """Median pairwise distance on a uniform subsample (median heuristic).

    Falls back to the mean nonzero distance when the median is zero and to
    1.0 when every point coincides.
    """
    if ds.n < 2:
        raise DataError("bandwidth needs at least two samples")
    X = ds.features
    if ds.n > max_samples:
        rng = np.random.default_rng(seed)
        X = X[np.sort(rng.choice(ds.n, size=max_samples, replace=False))]
    dist = pdist(X)
    med = float(np.median(dist))
    if med > 0:
        return med
    nz = dist[dist > 0]
    return float(nz.mean()) if nz.size else 1.0


def kernel_entries(sq_dist, same_class, alpha: float, sigma: float, gamma: float):
    """Elementwise composite kernel from squared distances and label agreement."""
    cls = np.where(same_class, 1.0, gamma)
    return alpha * np.exp(-sq_dist / (2.0 * sigma * sigma)) + (1.0 - alpha) * cls


def check_dense_budget(n: int, budget: int = DEFAULT_MEMORY_BUDGET) -> None:
    need = 2 * 8 * n * n
    if need > budget:
        raise DataError(
            f"dense kernel for n={n} needs {need / 2**30:.1f} GiB (budget "
            f"{budget / 2**30:.1f} GiB); use kernel_mode='local' or raise the budget"
        )


def build_kernel(ds: Dataset, params: KernelParams, sigma: float | None = None,
                 budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """Dense symmetric n x n composite kernel with unit diagonal."""
    check_dense_budget(ds.n, budget)
    if sigma is None:
        sigma = resolve_sigma(ds) if params.sigma == "auto" else float(params.sigma)
    # squareform of the condensed vector gives bitwise symmetry
    sq = squareform(pdist(ds.features, "sqeuclidean"))
    y = ds.labels
    K = kernel_entries(sq, y[:, None] == y[None, :], params.alpha, sigma, params.gamma)
    np.fill_diagonal(K, 1.0)
    return K
