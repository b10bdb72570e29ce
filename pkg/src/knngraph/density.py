"""Multi-scale local density and the per-sample L1 penalty schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .dataset import DataError, Dataset

DEFAULT_SCALES = (5, 10, 20)
EPS = 1e-12


class ConnectivityError(ValueError):
    """The lower penalty bound is too large for every sample to keep a neighbor."""


@dataclass(frozen=True)
class DensityProfile:
    rho: np.ndarray
    scales: tuple[int, ...]


@dataclass(frozen=True)
class RegularizationSchedule:
    lam: np.ndarray
    lambda_min: float
    lambda_max: float


def neighbor_distances(X: np.ndarray, k: int):
    """Exact distances and indices of the ``k`` nearest other points of each row.

    Self matches are dropped; with duplicate points the order among
    zero-distance neighbors is the tree's order.
    """
    tree = cKDTree(X)
    dist, idx = tree.query(X, k=k + 1)
    dist = dist.reshape(len(X), k + 1)
    idx = idx.reshape(len(X), k + 1)
    rows = np.arange(len(X))[:, None]
    is_self = idx == rows
    # rows where self is not among the results (many duplicates): drop the last column
    drop = np.where(is_self.any(axis=1), is_self.argmax(axis=1), k)
    keep = np.ones_like(is_self)
    keep[np.arange(len(X)), drop] = False
    return dist[keep].reshape(len(X), k), idx[keep].reshape(len(X), k)


def _clip_scales(scales, n):
    scales = tuple(sorted({min(int(s), n - 1) for s in scales}))
    if not scales or scales[0] < 1:
        raise ValueError(f"scales must be positive, got {scales}")
    return scales


def density_from_distances(dist: np.ndarray, scales) -> DensityProfile:
    """Density profile from sorted nearest-neighbor distances (self excluded)."""
    n = dist.shape[0]
    scales = _clip_scales(scales, n)
    if dist.shape[1] < scales[-1]:
        raise ValueError(f"need {scales[-1]} neighbor distances, got {dist.shape[1]}")
    csum = np.cumsum(dist, axis=1)
    raw = np.zeros(n)
    for s in scales:
        raw += 1.0 / (EPS + csum[:, s - 1] / s)
    raw /= len(scales)
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0:
        rho = np.full(n, 0.5)
    else:
        rho = (raw - lo) / (hi - lo)
    return DensityProfile(rho, scales)


def compute_density(ds: Dataset, scales=DEFAULT_SCALES) -> DensityProfile:
    """Mean over scales of the inverse mean distance to the s nearest neighbors,
    min-max normalized to [0, 1] (all 0.5 when every raw value is equal)."""
    if ds.n < 2:
        raise DataError("density needs at least two samples")
    scales = _clip_scales(scales, ds.n)
    dist, _ = neighbor_distances(ds.features, scales[-1])
    return density_from_distances(dist, scales)


def schedule_lambda(profile: DensityProfile, lambda_min: float, lambda_max: float) -> RegularizationSchedule:
    if not 0 < lambda_min < lambda_max:
        raise ValueError(f"need 0 < lambda_min < lambda_max, got {lambda_min}, {lambda_max}")
    lam = lambda_min + (lambda_max - lambda_min) * (1.0 - profile.rho)
    return RegularizationSchedule(lam, float(lambda_min), float(lambda_max))


def default_lambda_bounds(col_sq_norms: np.ndarray) -> tuple[float, float]:
    """``(0.01 q, 0.5 q)`` with q the mean squared kernel-column norm.

    The penalty that zeroes a column is about twice its squared norm, so this
    range keeps every column well inside the region with nonzero solutions.
    """
    q = float(np.mean(col_sq_norms))
    return 0.01 * q, 0.5 * q


def check_connectivity(lambda_min: float, col_sq_norms: np.ndarray) -> None:
    """Fail unless lambda_min < min_j |K(., j)|^2."""
    bound = float(np.min(col_sq_norms))
    if not lambda_min < bound:
        raise ConnectivityError(
            f"lambda_min={lambda_min:g} violates the connectivity precondition "
            f"lambda_min < min_j |K(.,j)|^2 = {bound:g}; isolated nodes would be possible"
        )
