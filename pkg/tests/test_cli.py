import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from knngraph.cli import main
from knngraph.dataset import Dataset, make_blobs, save_csv
from knngraph.persistence import load_model


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    ds = make_blobs(240, 4, 3, std=1.5, seed=12)
    ds = Dataset(ds.features, ds.labels, ("red", "green", "blue"))
    save_csv(ds.subset(np.arange(200)), d / "train.csv")
    save_csv(ds.subset(np.arange(200, 240)), d / "test.csv")
    with (d / "queries.csv").open("w", newline="") as fh:
        csv.writer(fh).writerows(ds.features[200:].tolist())
    assert main(["train", "--data", str(d / "train.csv"), "--out", str(d / "m.kng"),
                 "--trace-out", str(d / "trace.csv"), "--config-out", str(d / "cfg.json")]) == 0
    return d


def test_train_outputs(workdir, capsys):
    obj = [float(r["objective"]) for r in csv.DictReader((workdir / "trace.csv").open())]
    assert obj and all(b <= a * (1 + 1e-12) for a, b in zip(obj, obj[1:]))
    cfg = json.loads((workdir / "cfg.json").read_text())
    assert cfg["alpha"] == 0.5 and cfg["gamma"] == 0.1


def test_train_is_byte_deterministic(workdir):
    assert main(["train", "--data", str(workdir / "train.csv"), "--out", str(workdir / "m2.kng")]) == 0
    assert (workdir / "m.kng").read_bytes() == (workdir / "m2.kng").read_bytes()


def test_predict_matches_library(workdir, capsys):
    assert main(["predict", "--model", str(workdir / "m.kng"), "--queries", str(workdir / "queries.csv"),
                 "--out", str(workdir / "pred.txt")]) == 0
    model = load_model(workdir / "m.kng")
    Q = np.loadtxt(workdir / "queries.csv", delimiter=",")
    expected = [model.class_names[y] for y in model.predict(Q)]
    assert (workdir / "pred.txt").read_text().split() == expected
    assert "latency" in capsys.readouterr().err


def test_predict_drops_label_column(workdir, capsys):
    assert main(["predict", "--model", str(workdir / "m.kng"), "--queries", str(workdir / "test.csv"),
                 "--label-col", "last"]) == 0
    out = capsys.readouterr().out.split()
    assert out == (workdir / "pred.txt").read_text().split()


def test_predict_empty_file(workdir, capsys):
    (workdir / "empty.csv").write_text("")
    assert main(["predict", "--model", str(workdir / "m.kng"), "--queries", str(workdir / "empty.csv")]) == 0
    assert capsys.readouterr().out == ""


def test_predict_dimension_mismatch(workdir, capsys):
    (workdir / "bad.csv").write_text("1,2\n3,4\n")
    assert main(["predict", "--model", str(workdir / "m.kng"), "--queries", str(workdir / "bad.csv")]) == 2
    err = capsys.readouterr().err
    assert "d=2" in err and "d=4" in err


def test_lambda_violation_exits_1(workdir, capsys):
    code = main(["train", "--data", str(workdir / "train.csv"), "--out", str(workdir / "x.kng"),
                 "--lambda-min", "1e9", "--lambda-max", "2e9"])
    assert code == 1
    assert "lambda_min" in capsys.readouterr().err
    assert not (workdir / "x.kng").exists()


def test_missing_files_exit_2(workdir):
    assert main(["train", "--data", str(workdir / "nope.csv"), "--out", str(workdir / "y.kng")]) == 2
    (workdir / "junk.kng").write_bytes(b"nonsense")
    assert main(["inspect", str(workdir / "junk.kng")]) == 2


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1


def test_inspect(workdir, capsys):
    assert main(["inspect", str(workdir / "m.kng"), "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert (info["n"], info["d"], info["c"]) == (200, 4, 3)
    assert main(["model", "inspect", str(workdir / "m.kng")]) == 0
    assert "KNNG" in capsys.readouterr().out


def test_evaluate_is_deterministic(workdir):
    args = ["evaluate", "--data", str(workdir / "train.csv"), "--folds", "3", "--with-baselines"]
    assert main(args + ["--report-json", str(workdir / "a.json"), "--report-csv", str(workdir / "a.csv")]) == 0
    assert main(args + ["--report-json", str(workdir / "b.json")]) == 0
    assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()
    data = json.loads((workdir / "a.json").read_text())
    assert set(data["methods"]) == {"proposed", "bruteforce_knn", "static_hnsw"}
    rows = list(csv.DictReader((workdir / "a.csv").open()))
    assert len(rows) == 3


def test_config_files(workdir, capsys):
    (workdir / "c.cfg").write_text("# overrides\nM = 8\nnormalize = true\ndensity_scales = 3,6\n")
    assert main(["train", "--data", str(workdir / "train.csv"), "--out", str(workdir / "c.kng"),
                 "--config", str(workdir / "c.cfg"), "--config-out", str(workdir / "c.json"),
                 "--seed", "9"]) == 0
    cfg = json.loads((workdir / "c.json").read_text())
    assert cfg["M"] == 8 and cfg["normalize"] is True and cfg["seed"] == 9
    assert cfg["density_scales"] == [3, 6]
    (workdir / "bad.cfg").write_text("no_such_key = 1\n")
    assert main(["train", "--data", str(workdir / "train.csv"), "--out", str(workdir / "d.kng"),
                 "--config", str(workdir / "bad.cfg")]) == 1


def test_console_entry_point(workdir):
    res = subprocess.run([sys.executable, "-m", "knngraph.cli", "inspect", str(workdir / "m.kng")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "n        200" in res.stdout
