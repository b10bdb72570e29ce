"""Adaptive kNN classification on a learned navigable graph.

Training learns a sparse neighbor set per sample from a composite
feature/label kernel, precomputes a consensus label for every node and
embeds both into a multi-layer navigable graph. Prediction is a greedy
graph search that returns the label stored on the node it lands on.
"""

import numba as _numba

# the TBB layer warns on older system TBB builds; OpenMP is equally capable here
_numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .classifier import StaticHNSW, TrainedModel, baseline_bruteforce_knn, baseline_static_hnsw, train
from .config import RunConfig, load_config
from .dataset import DataError, Dataset, load_csv, make_blobs, stratified_folds
from .evaluation import bench_inference, cross_validate, macro_metrics
from .graph_index import GraphIndex, IndexParams, build_index, predict, search_nearest
from .persistence import load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "DataError", "Dataset", "GraphIndex", "IndexParams", "RunConfig", "StaticHNSW",
    "TrainedModel", "baseline_bruteforce_knn", "baseline_static_hnsw", "bench_inference",
    "build_index", "cross_validate", "load_config", "load_csv", "load_model",
    "macro_metrics", "make_blobs", "predict", "save_model", "search_nearest",
    "stratified_folds", "train",
]
