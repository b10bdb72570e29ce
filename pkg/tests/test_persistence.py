import struct

import numpy as np
import pytest

from knngraph.config import RunConfig
from knngraph.dataset import Dataset, make_blobs
from knngraph.classifier import train
from knngraph.persistence import MAGIC, VERSION, ModelFormatError, dumps, inspect_model, load_model, loads, save_model


def test_header_layout(model300):
    raw = dumps(model300)
    assert raw[:4] == MAGIC
    assert struct.unpack("<I", raw[4:8])[0] == VERSION
    M, md0, efc, efs, seed = struct.unpack("<IiIIq", raw[8:32])
    assert (M, md0, efc, efs) == (16, -1, 200, 1)
    n, d, c, L, entry = struct.unpack("<QIIIQ", raw[32:60])
    assert (n, d, c) == (300, 5, 3)
    assert L == model300.index.max_level and entry == model300.index.entry_point


def test_round_trip_preserves_predictions(model300, blobs300, tmp_path):
    path = tmp_path / "m.kng"
    save_model(model300, path)
    back = load_model(path)
    for name in ("features", "labels", "levels", "deg0", "deg_up"):
        assert np.array_equal(getattr(back.index, name), getattr(model300.index, name))
    for u in range(back.index.n):
        assert np.array_equal(back.index.neighbors(0, u), model300.index.neighbors(0, u))
    Q = np.random.default_rng(0).normal(0, 3, (100, 5))
    assert np.array_equal(back.predict(Q), model300.predict(Q))
    assert back.config == model300.config
    assert back.class_names == model300.class_names
    assert dumps(back) == dumps(model300)


def test_class_names_and_scaling_survive():
    ds = make_blobs(80, 3, 2, seed=1)
    ds = Dataset(ds.features * 50, ds.labels, ("ünïcode", "b,c"))
    m = train(ds, RunConfig(normalize=True))
    back = loads(dumps(m))
    assert back.class_names == ("ünïcode", "b,c")
    assert np.array_equal(back.shift, m.shift) and np.array_equal(back.scale, m.scale)
    assert np.array_equal(back.predict(ds.features), m.predict(ds.features))


def test_inspect(model300, tmp_path):
    path = tmp_path / "m.kng"
    save_model(model300, path)
    info = inspect_model(path)
    assert (info["n"], info["d"], info["c"]) == (300, 5, 3)
    assert info["L"] == model300.index.max_level
    assert info["avg_degree"] == pytest.approx(model300.index.avg_degree)


def test_rejects_bad_magic_version_and_truncation(model300):
    raw = dumps(model300)
    with pytest.raises(ModelFormatError, match="magic"):
        loads(b"XXXX" + raw[4:])
    with pytest.raises(ModelFormatError, match="version"):
        loads(raw[:4] + struct.pack("<I", 99) + raw[8:])
    with pytest.raises(ModelFormatError, match="truncated"):
        loads(raw[:-40])
    with pytest.raises(ModelFormatError, match="trailing"):
        loads(raw + b"\x00")
