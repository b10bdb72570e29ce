"""Labeled numeric datasets: CSV ingestion, validation, stratified folds."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with labels encoded to ``0..c-1``.

    ``class_names[k]`` is the original label string of class ``k``.
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(f"labels length {y.shape} does not match {X.shape[0]} rows")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"empty dataset (shape {X.shape})")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite feature at row {r}, column {c}")
        c = int(y.max()) + 1 if y.size else 0
        if y.min() < 0:
            raise DataError("labels must be non-negative")
        present = np.bincount(y, minlength=c)
        if np.any(present == 0):
            missing = np.flatnonzero(present == 0).tolist()
            raise DataError(f"class ids {missing} have no samples; labels must be dense")
        names = tuple(self.class_names) or tuple(str(k) for k in range(c))
        if len(names) != c:
            raise DataError(f"{len(names)} class names for {c} classes")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def c(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "Dataset":
        """Rows ``idx`` as a new dataset, keeping the full class-name table.

        Raises DataError if a class disappears from the subset.
        """
        return Dataset(self.features[idx], self.labels[idx], self.class_names)

    def zscore(self) -> "Dataset":
        mu = self.features.mean(axis=0)
        sd = self.features.std(axis=0)
        sd[sd == 0] = 1.0
        return Dataset((self.features - mu) / sd, self.labels, self.class_names)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _resolve_label_column(selector, header, width) -> int:
    if selector is None or selector == "last":
        return width - 1
    if isinstance(selector, int):
        idx = selector
    elif isinstance(selector, str) and selector.lstrip("-").isdigit():
        idx = int(selector)
    else:
        if header is None or selector not in header:
            raise DataError(f"label column {selector!r} not found in header")
        return header.index(selector)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise DataError(f"label column index {selector} out of range for {width} columns")
    return idx


def _looks_like_header(first, second) -> bool:
    flags = [_is_number(cell) for cell in first]
    if not any(flags):
        return True
    if second is None:
        return False
    return any(not f and k < len(second) and _is_number(second[k]) for k, f in enumerate(flags))


def read_rows(path) -> tuple[list[str] | None, list[list[str]]]:
    """Raw CSV rows with an auto-detected header.

    The first row is a header if all of its cells are non-numeric, or if one
    of its cells is non-numeric where the second row holds a number (so a
    string label column alone does not look like a header).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    header = None
    if rows and _looks_like_header(rows[0], rows[1] if len(rows) > 1 else None):
        header = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
    return header, rows


def load_csv(path, label_column="last", class_names=None) -> Dataset:
    """Load a CSV file with one label column and numeric feature columns.

    Labels are encoded by first appearance unless ``class_names`` fixes the
    order (used when re-loading data for an existing model).
    """
    header, rows = read_rows(path)
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0]) if header is None else len(header)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {r} has {len(row)} cells, expected {width}")
    lab = _resolve_label_column(label_column, header, width)
    feats = np.empty((len(rows), width - 1), dtype=np.float64)
    raw_labels = []
    for r, row in enumerate(rows):
        k = 0
        for col, cell in enumerate(row):
            if col == lab:
                raw_labels.append(cell.strip())
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {r}, column {col}: cannot parse {cell!r}") from None
            if not np.isfinite(v):
                raise DataError(f"{path}: row {r}, column {col}: non-finite value {cell!r}")
            feats[r, k] = v
            k += 1
    if feats.shape[1] == 0:
        raise DataError(f"{path}: no feature columns")

    if class_names is None:
        mapping: dict[str, int] = {}
        for s in raw_labels:
            mapping.setdefault(s, len(mapping))
        names = tuple(mapping)
    else:
        names = tuple(class_names)
        mapping = {s: k for k, s in enumerate(names)}
        unknown = sorted(set(raw_labels) - set(mapping))
        if unknown:
            raise DataError(f"{path}: labels {unknown} not among known classes")
    y = np.array([mapping[s] for s in raw_labels], dtype=np.int64)
    if class_names is None:
        assert np.all(np.bincount(y) > 0)
    return Dataset(feats, y, names)


def load_features(path, d: int | None = None) -> np.ndarray:
    """Load an all-numeric CSV of query vectors (header auto-detected)."""
    _, rows = read_rows(path)
    if not rows:
        return np.empty((0, d or 0))
    try:
        Q = np.array([[float(c) for c in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if not np.all(np.isfinite(Q)):
        r, c = np.argwhere(~np.isfinite(Q))[0]
        raise DataError(f"{path}: non-finite value at row {r}, column {c}")
    return Q


def save_csv(ds: Dataset, path, header: bool = True) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{k}" for k in range(ds.d)] + ["label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [ds.class_names[y]])


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    n_folds: int

    def split(self, f: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.fold_of == f)
        train = np.flatnonzero(self.fold_of != f)
        return train, test


def stratified_folds(ds: Dataset, n_folds: int, seed: int = 0) -> FoldAssignment:
    """Shuffle each class, then deal its members round-robin over the folds.

    The dealer position carries over between classes so fold totals also
    stay within one of each other.
    """
    if n_folds < 2:
        raise DataError(f"need at least 2 folds, got {n_folds}")
    if n_folds > ds.n:
        raise DataError(f"{n_folds} folds requested for only {ds.n} samples")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(ds.n, dtype=np.int64)
    offset = 0
    for k in range(ds.c):
        members = rng.permutation(np.flatnonzero(ds.labels == k))
        fold_of[members] = (offset + np.arange(members.size)) % n_folds
        offset = (offset + members.size) % n_folds
    return FoldAssignment(fold_of, n_folds)


def make_blobs(n: int, d: int, n_classes: int = 3, std: float = 1.0,
               separation: float = 4.0, seed: int = 0) -> Dataset:
    """Isotropic Gaussian blobs with balanced classes.

    Centers are drawn uniformly on a sphere of radius ``separation`` so the
    center geometry does not depend on ``std``.
    """
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_classes, d))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)
    y = np.arange(n) % n_classes
    X = centers[y] + std * rng.standard_normal((n, d))
    return Dataset(X, y)
