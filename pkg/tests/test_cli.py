import csv
import json

import numpy as np
import pytest

from mcsort.classify import ScoredReferenceSet
from mcsort.cli import main
from mcsort.dataset import CriterionScale
from mcsort.encoding import WeightVector
from mcsort.learner import Hyperparams, InteractionStructure, SortingModel
from mcsort.modelfile import ModelFile, ModelFileError

from conftest import B_VALUE, E1_CLASSES, E_VALUES, synthetic_table


def write_table(path, table, label_name="label"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *table.criterion_names, label_name])
        for ident, row, lab in zip(table.alternatives, table.performances, table.labels):
            w.writerow([ident, *[repr(float(v)) for v in row], int(lab)])
    return path


@pytest.fixture
def data_csv(tmp_path):
    return write_table(tmp_path / "data.csv", synthetic_table(n_alt=40, n_crit=3, q=3, noise=0.03, seed=1))


@pytest.fixture(autouse=True)
def fixed_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


def test_train_writes_normalized_model(tmp_path, data_csv, capsys):
    out = tmp_path / "m.json"
    rc = main(["train", "--data", str(data_csv), "--id-col", "id", "--gamma", "2", "--interactions", "none",
               "--c1", "1e-3", "--c2", "1e-3", "--out", str(out), "--jobs", "1"])
    assert rc == 0
    mf = ModelFile.load(out)
    weights = [float(np.sum(s)) for s in mf.model.weights.marginal_steps]
    assert sum(weights) == pytest.approx(1.0, abs=1e-8)
    doc = json.loads(out.read_text())
    assert doc["training"]["timestamp"] == "2023-11-14T22:13:20Z"
    assert doc["labels"] == [1, 2, 3]
    assert "w[g1]" in capsys.readouterr().out


def test_model_round_trip_byte_identical(tmp_path, data_csv):
    out = tmp_path / "m.json"
    main(["train", "--data", str(data_csv), "--id-col", "id", "--interactions", "product", "--out", str(out), "--jobs", "1"])
    text = out.read_text()
    again = ModelFile.loads(text).dumps()
    assert again == text
    assert ModelFile.loads(again).dumps() == again


def test_negative_only_policy(tmp_path, data_csv):
    out = tmp_path / "m.json"
    main(["train", "--data", str(data_csv), "--id-col", "id", "--interactions", "product", "--policy", "negative-only",
          "--out", str(out), "--jobs", "1"])
    assert all(s == -1 for s in json.loads(out.read_text())["structure"]["signs"])


def test_guard_exit_code(tmp_path, capsys):
    rng = np.random.default_rng(0)
    path = tmp_path / "wide.csv"
    with open(path, "w") as fh:
        fh.write(",".join(f"g{i}" for i in range(13)) + ",label\n")
        for i in range(10):
            fh.write(",".join(map(str, rng.random(13))) + f",{i % 2 + 1}\n")
    rc = main(["train", "--data", str(path), "--interactions", "product", "--out", str(tmp_path / "m.json")])
    assert rc == 4
    assert "19674097" in capsys.readouterr().err


def test_data_error_exit_code(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("g1,label\n1,abc\n2,1\n")
    assert main(["train", "--data", str(path), "--out", str(tmp_path / "m.json")]) == 2


def test_infeasible_exit_code(tmp_path):
    path = tmp_path / "inv.csv"
    path.write_text("g1,g2,label\n1,1,1\n0,0,2\n")
    assert main(["train", "--data", str(path), "--gamma", "1", "--out", str(tmp_path / "m.json")]) == 3


def e1_model_file(tmp_path):
    """One criterion on [0, 1] with a single piece, so U equals the raw performance."""
    model = SortingModel(weights=WeightVector((np.array([1.0]),)), structure=InteractionStructure(),
                         form="none", scales=(CriterionScale(0.0, 1.0, gamma=1),), d=0.0, objective=0.0,
                         hyperparams=Hyperparams(1e-3, 1e-3), label_values=(1, 2, 3))
    refs = ScoredReferenceSet.from_arrays(E_VALUES, E1_CLASSES, 3)
    mf = ModelFile(model=model, criteria=("g",), references=refs,
                   reference_ids=tuple(f"a{i + 1}" for i in range(11)), method="m1")
    path = tmp_path / "e1.json"
    mf.save(path)
    return path


def test_predict_e1_m1(tmp_path):
    model = e1_model_file(tmp_path)
    data = tmp_path / "b.csv"
    data.write_text(f"id,g\nb,{B_VALUE}\n")
    out = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model), "--data", str(data), "--id-col", "id", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["id"] == "b" and rows[0]["class"] == "3"
    assert float(rows[0]["score_3"]) == pytest.approx(5 / 8)


def test_predict_m4_without_k(tmp_path, capsys):
    model = e1_model_file(tmp_path)
    data = tmp_path / "b.csv"
    data.write_text("g\n0.5\n")
    assert main(["predict", "--model", str(model), "--data", str(data), "--method", "m4"]) == 2
    assert "K required" in capsys.readouterr().err
    assert main(["predict", "--model", str(model), "--data", str(data), "--method", "m4", "--k", "3"]) == 0
    assert capsys.readouterr().out.splitlines()[1].split(",")[2] == "1"


def test_predict_clamping_warning(tmp_path, capsys):
    model = e1_model_file(tmp_path)
    data = tmp_path / "b.csv"
    data.write_text("g\n1.7\n")
    assert main(["predict", "--model", str(model), "--data", str(data)]) == 0
    assert "warning" in capsys.readouterr().err


def test_predict_schema_mismatch(tmp_path):
    model = e1_model_file(tmp_path)
    data = tmp_path / "b.csv"
    data.write_text("other\n0.5\n")
    assert main(["predict", "--model", str(model), "--data", str(data)]) == 2


def test_load_rejects_bad_normalization(tmp_path):
    path = e1_model_file(tmp_path)
    doc = json.loads(path.read_text())
    doc["weights"]["marginal_steps"] = [[0.9]]
    with pytest.raises(ModelFileError, match="normalization"):
        ModelFile.from_dict(doc)
    doc = json.loads(path.read_text())
    doc["schema_version"] = 99
    with pytest.raises(ModelFileError, match="schema_version"):
        ModelFile.from_dict(doc)
    del doc["form"]
    doc["schema_version"] = 1
    with pytest.raises(ModelFileError):
        ModelFile.from_dict(doc)


def test_evaluate_and_ttest(tmp_path, data_csv, capsys):
    a = tmp_path / "a.json"
    rc = main(["evaluate", "--data", str(data_csv), "--id-col", "id", "--folds", "5", "--grid", "quick",
               "--method", "m2", "--repeats", "1", "--baseline", "choquet", "--out", str(a), "--jobs", "1"])
    assert rc == 0
    rep = json.loads(a.read_text())
    assert "accuracy" in rep["results"]["value"]["mean"]
    assert len(rep["paired_accuracy"]["value"]) == len(rep["paired_accuracy"]["choquet"]) == 5
    assert a.with_suffix(".txt").read_text().startswith("Metric")
    capsys.readouterr()
    b = tmp_path / "b.json"
    main(["evaluate", "--data", str(data_csv), "--id-col", "id", "--folds", "5", "--repeats", "1", "--c2", "10",
          "--out", str(b), "--jobs", "1"])
    capsys.readouterr()
    assert main(["ttest", str(a), str(b), "--metric", "accuracy"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert set(res) == {"metric", "t", "p", "df", "degenerate"} and res["df"] == 4


def test_evaluate_deterministic(tmp_path, data_csv):
    outs = []
    for name in ("x.json", "y.json"):
        main(["evaluate", "--data", str(data_csv), "--id-col", "id", "--repeats", "2", "--seed", "3", "--out", str(tmp_path / name),
              "--jobs", "1"])
        outs.append(json.loads((tmp_path / name).read_text())["results"]["value"]["fold_values"])
    assert outs[0] == outs[1]


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "mcsort", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "mcsort" in r.stdout
