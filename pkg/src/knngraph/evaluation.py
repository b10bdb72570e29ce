"""Cross-validation, macro-averaged metrics and the inference benchmark."""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .classifier import StaticHNSW, _all_dists, _k_smallest, index_params, majority, train
from .config import RunConfig
from .dataset import DataError, Dataset, stratified_folds

METHODS = ("proposed", "bruteforce_knn", "static_hnsw")


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    total = cm.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(cm) / total)


def macro_metrics(cm: np.ndarray, f1_mode: str = "macro_pr") -> tuple[float, float, float]:
    """Macro precision, recall and F1 over all classes.

    Classes with a zero denominator score 0. With ``f1_mode="macro_pr"`` F1
    is the harmonic mean of macro precision and macro recall; ``"per_class"``
    averages the per-class F1 values instead.
    """
    cm = np.asarray(cm)
    if cm.sum() == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm).astype(np.float64)
    pred = cm.sum(axis=0)
    true = cm.sum(axis=1)
    prec = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    rec = np.divide(tp, true, out=np.zeros_like(tp), where=true > 0)
    P, R = float(prec.mean()), float(rec.mean())
    if f1_mode == "per_class":
        s = prec + rec
        f1 = np.divide(2 * prec * rec, s, out=np.zeros_like(s), where=s > 0)
        return P, R, float(f1.mean())
    F = 2 * P * R / (P + R) if P + R > 0 else 0.0
    return P, R, F


@dataclass
class FoldMetrics:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float

    @classmethod
    def from_cm(cls, cm, f1_mode="macro_pr") -> "FoldMetrics":
        return cls(accuracy(cm), *macro_metrics(cm, f1_mode))


@dataclass
class EvalReport:
    method: str
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_fold: list[FoldMetrics]
    distance_evals_per_query: float
    confusion: list[list[int]]
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("timing")
        return d


def _aggregate(method, folds: list[FoldMetrics], cm, evals, timing) -> EvalReport:
    mean = lambda name: float(np.mean([getattr(f, name) for f in folds]))
    return EvalReport(method, mean("accuracy"), mean("macro_precision"), mean("macro_recall"),
                      mean("macro_f1"), folds, float(evals), cm.tolist(), timing)


def bruteforce_predict(ds_train: Dataset, Q, k: int):
    labels = np.empty(len(Q), dtype=np.int64)
    for a, q in enumerate(np.ascontiguousarray(Q, dtype=np.float64)):
        nn = _k_smallest(_all_dists(ds_train.features, q), k)
        labels[a] = majority(ds_train.labels[nn], ds_train.c)
    return labels, np.full(len(Q), ds_train.n, dtype=np.int64)


def cross_validate(ds: Dataset, cfg: RunConfig = RunConfig(), n_folds: int | None = None,
                   seed: int | None = None, methods: Sequence[str] = ("proposed",)) -> dict[str, EvalReport]:
    """Stratified F-fold CV; every method sees the same folds.

    Aggregate metrics are means of the per-fold values. Baseline k values
    are capped at the training-fold size.
    """
    n_folds = cfg.folds if n_folds is None else n_folds
    if n_folds < 2:
        raise DataError(f"need at least 2 folds, got {n_folds}")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    fold_seed = cfg.fold_seed if seed is None else seed + 1
    folds = stratified_folds(ds, n_folds, fold_seed)
    per = {m: [] for m in methods}
    cms = {m: np.zeros((ds.c, ds.c), dtype=np.int64) for m in methods}
    evals = {m: 0 for m in methods}
    tim = {m: {"build_s": 0.0, "inference_s": 0.0} for m in methods}
    n_test_total = 0
    for f in range(n_folds):
        tr, te = folds.split(f)
        missing = np.setdiff1d(np.arange(ds.c), ds.labels[tr])
        if missing.size:
            raise DataError(
                f"fold {f}: training split lacks classes {missing.tolist()}; "
                "use fewer folds or provide more samples per class")
        dtr = ds.subset(tr)
        Q, y = ds.features[te], ds.labels[te]
        n_test_total += len(te)
        for m in methods:
            t = time.perf_counter()
            if m == "proposed":
                model = train(dtr, cfg)
                t1 = time.perf_counter()
                pred, counts = model.predict_counted(Q)
            elif m == "bruteforce_knn":
                t1 = time.perf_counter()
                pred, counts = bruteforce_predict(dtr, Q, min(cfg.bruteforce_k, dtr.n))
            else:
                st = StaticHNSW.build(dtr, index_params(cfg))
                t1 = time.perf_counter()
                k = min(cfg.static_k, dtr.n)
                out = [st.predict_counted(q, k) for q in Q]
                pred = np.array([o[0] for o in out], dtype=np.int64)
                counts = np.array([o[1] for o in out], dtype=np.int64)
            t2 = time.perf_counter()
            tim[m]["build_s"] += t1 - t
            tim[m]["inference_s"] += t2 - t1
            cm = confusion_matrix(y, pred, ds.c)
            cms[m] += cm
            per[m].append(FoldMetrics.from_cm(cm, cfg.f1_mode))
            evals[m] += int(np.sum(counts))
    reports = {}
    for m in methods:
        tim[m]["per_query_s"] = tim[m]["inference_s"] / max(n_test_total, 1)
        reports[m] = _aggregate(m, per[m], cms[m], evals[m] / max(n_test_total, 1), tim[m])
    return reports


# ----------------------------------------------------------------- benchmark

PredictFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class BenchRow:
    method: str
    n_train: int
    n_queries: int
    per_query_s: float
    total_s: float
    distance_evals_per_query: float


def bench_inference(models: Sequence[tuple[str, PredictFn]], queries, repeats: int = 5,
                    n_train: int = 0) -> list[BenchRow]:
    """Median-of-repeats wall time per method plus exact distance counts.

    Each prediction function takes the full query matrix and returns
    ``(labels, distance_evaluations_per_query)``. Runs are sequential.
    """
    if repeats < 3:
        raise ValueError("repeats must be at least 3")
    Q = np.ascontiguousarray(queries, dtype=np.float64)
    rows = []
    for name, fn in models:
        fn(Q[: min(len(Q), 2)])  # compile / warm caches outside the timed region
        times = []
        counts = None
        for _ in range(repeats):
            t = time.perf_counter()
            _, counts = fn(Q)
            times.append(time.perf_counter() - t)
        total = statistics.median(times)
        rows.append(BenchRow(name, n_train, len(Q), total / max(len(Q), 1), total,
                             float(np.mean(counts)) if len(Q) else 0.0))
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(asdict(rows[0]).keys()) if rows else ["method"])
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))


def write_report_json(reports: dict[str, EvalReport], path, include_timing=False, extra=None) -> None:
    payload = {"methods": {m: r.to_dict(include_timing) for m, r in reports.items()}}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_report_csv(reports: dict[str, EvalReport], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "accuracy", "macro_precision", "macro_recall", "macro_f1",
                    "distance_evals_per_query", "build_s", "per_query_s"])
        for m, r in reports.items():
            w.writerow([m, r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1,
                        r.distance_evals_per_query, r.timing.get("build_s"), r.timing.get("per_query_s")])


def format_table(reports: dict[str, EvalReport]) -> str:
    lines = [f"{'method':<16}{'acc':>8}{'macroP':>8}{'macroR':>8}{'macroF1':>9}{'dist/q':>10}{'ms/q':>9}"]
    for m, r in reports.items():
        lines.append(f"{m:<16}{r.accuracy:>8.4f}{r.macro_precision:>8.4f}{r.macro_recall:>8.4f}"
                     f"{r.macro_f1:>9.4f}{r.distance_evals_per_query:>10.1f}"
                     f"{1e3 * r.timing.get('per_query_s', 0.0):>9.4f}")
    return "\n".join(lines)
