"""Self-describing binary model file.

All integers and floats are little-endian. Layout::

    b"KNNG"  u32 version
    params   u32 M, i32 max_degree0 (-1 = default), u32 ef_construction,
             u32 ef_search, i64 seed
    shape    u64 n, u32 d, u32 c, u32 L, u64 entry_point
    levels   n x u32
    layer 0  per node: u32 degree, degree x u32 ids
    layer l  for l = 1..L, per node with level >= l: u32 degree, ids
    features n*d x f64 (row-major)
    labels   n x u32 consensus labels
    classes  c x (u32 byte length, UTF-8 name)
    metadata u32 byte length, UTF-8 JSON {config, resolved, stats}
    scaling  u8 flag; if 1, d x f64 shift then d x f64 scale
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .config import RunConfig
from .graph_index import GraphIndex, IndexParams

MAGIC = b"KNNG"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _u32(v) -> bytes:
    return struct.pack("<I", int(v))


def _blob(b: bytes) -> bytes:
    return _u32(len(b)) + b


def _adjacency(rows, degs) -> bytes:
    out = io.BytesIO()
    for row, k in zip(rows, degs):
        out.write(_u32(k))
        out.write(np.asarray(row[:k], dtype="<u4").tobytes())
    return out.getvalue()


def dumps(model) -> bytes:
    """Serialize a TrainedModel; identical models give identical bytes."""
    idx: GraphIndex = model.index
    p = idx.params
    n, d, L = idx.n, idx.d, idx.max_level
    buf = io.BytesIO()
    w = buf.write
    w(MAGIC + _u32(VERSION))
    w(struct.pack("<IiIIq", p.M, -1 if p.max_degree0 is None else p.max_degree0,
                  p.ef_construction, p.ef_search, p.seed))
    w(struct.pack("<QIIIQ", n, d, len(model.class_names), L, idx.entry_point))
    w(idx.levels.astype("<u4").tobytes())
    w(_adjacency(idx.adj0, idx.deg0))
    for layer in range(1, L + 1):
        nodes = np.flatnonzero(idx.levels >= layer)
        w(_adjacency(idx.adj_up[layer - 1, nodes], idx.deg_up[layer - 1, nodes]))
    w(np.ascontiguousarray(idx.features, dtype="<f8").tobytes())
    w(idx.labels.astype("<u4").tobytes())
    for name in model.class_names:
        w(_blob(name.encode("utf-8")))
    meta = {"config": model.config.to_dict(), "resolved": model.resolved, "stats": model.stats}
    w(_blob(json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")))
    if model.shift is None:
        w(b"\x00")
    else:
        w(b"\x01")
        w(np.asarray(model.shift, dtype="<f8").tobytes())
        w(np.asarray(model.scale, dtype="<f8").tobytes())
    return buf.getvalue()


def save_model(model, path) -> None:
    Path(path).write_bytes(dumps(model))


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, k: int) -> memoryview:
        if self.pos + k > len(self.data):
            raise ModelFormatError(f"truncated model file (wanted {k} bytes at offset {self.pos})")
        out = self.data[self.pos:self.pos + k]
        self.pos += k
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()

    def blob(self) -> bytes:
        (k,) = self.unpack("<I")
        return bytes(self.take(k))


def _read_adjacency(r: _Reader, nodes, n, width, adj, deg):
    for u in nodes:
        (k,) = r.unpack("<I")
        if k > width:
            raise ModelFormatError(f"node {u} has degree {k}, above the stored cap {width}")
        ids = r.array("<u4", k).astype(np.int64)
        if k and ids.max() >= n:
            raise ModelFormatError(f"node {u} links to id {ids.max()} >= n={n}")
        adj[u, :k] = ids
        deg[u] = k


def read_header(r: _Reader) -> dict:
    magic = bytes(r.take(4))
    if magic != MAGIC:
        raise ModelFormatError(f"not a model file (magic {magic!r}, expected {MAGIC!r})")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ModelFormatError(f"unsupported format version {version}; this build reads {VERSION}")
    M, md0, efc, efs, seed = r.unpack("<IiIIq")
    n, d, c, L, entry = r.unpack("<QIIIQ")
    return {"version": version, "M": M, "max_degree0": None if md0 < 0 else md0,
            "ef_construction": efc, "ef_search": efs, "seed": seed,
            "n": n, "d": d, "c": c, "L": L, "entry_point": entry}


def loads(data: bytes):
    from .classifier import TrainedModel

    r = _Reader(data)
    h = read_header(r)
    params = IndexParams(h["M"], h["max_degree0"], h["ef_construction"], h["ef_search"], h["seed"])
    n, d, c, L = h["n"], h["d"], h["c"], h["L"]
    levels = r.array("<u4", n).astype(np.int64)
    if n and int(levels.max()) != L:
        raise ModelFormatError(f"level table maximum {levels.max()} disagrees with header L={L}")
    # layer 0 may exceed the nominal cap after the connectivity repair
    start = r.pos
    degs = []
    for _ in range(n):
        (k,) = r.unpack("<I")
        degs.append(k)
        r.take(4 * k)
    r.pos = start
    width = max(params.degree0 + 1, max(degs, default=0))
    adj0 = np.full((n, width), -1, dtype=np.int64)
    deg0 = np.zeros(n, dtype=np.int64)
    _read_adjacency(r, range(n), n, width, adj0, deg0)
    adj_up = np.full((L, n, params.M + 1), -1, dtype=np.int64)
    deg_up = np.zeros((L, n), dtype=np.int64)
    for layer in range(1, L + 1):
        nodes = np.flatnonzero(levels >= layer)
        _read_adjacency(r, nodes, n, params.M + 1, adj_up[layer - 1], deg_up[layer - 1])
    features = r.array("<f8", n * d).reshape(n, d)
    labels = r.array("<u4", n).astype(np.int64)
    if n and labels.max() >= c:
        raise ModelFormatError(f"label {labels.max()} out of range for c={c}")
    names = tuple(r.blob().decode("utf-8") for _ in range(c))
    meta = json.loads(r.blob().decode("utf-8"))
    (flag,) = r.unpack("<B")
    shift = scale = None
    if flag:
        shift = r.array("<f8", d)
        scale = r.array("<f8", d)
    if r.pos != len(r.data):
        raise ModelFormatError(f"{len(r.data) - r.pos} trailing bytes after the model")
    idx = GraphIndex(features, labels, levels, int(h["entry_point"]), adj0, deg0, adj_up, deg_up, params)
    cfg = RunConfig.from_dict({k: v for k, v in meta["config"].items()})
    return TrainedModel(idx, cfg, names, meta["resolved"], meta["stats"], shift, scale)


def load_model(path):
    return loads(Path(path).read_bytes())


def inspect_model(path) -> dict:
    """Header fields plus n, d, c, L and the mean layer-0 degree."""
    model = load_model(path)
    h = read_header(_Reader(Path(path).read_bytes()))
    h.update({"avg_degree": model.index.avg_degree, "class_names": list(model.class_names),
              "stats": model.stats, "resolved": model.resolved})
    return h
