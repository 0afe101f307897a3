import json

import pandas as pd
import pytest

from cli import main


def run(*argv) -> int:
    return main([str(a) for a in argv])


def test_generate_counts_and_determinism(tmp_path, capsys):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("generate", "--classes", "S1,S2", "--per-class", 10, "--seed", 7, "--out", first) == 0
    assert "20 training" in capsys.readouterr().out
    assert run("generate", "--classes", "S1,S2", "--per-class", 10, "--seed", 7, "--out", second) == 0

    frame = pd.read_csv(first)
    assert len(frame) == 20
    assert list(frame["label"].value_counts().sort_index()) == [10, 10]
    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / "a.params.json").exists()


def test_generate_unknown_class(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("generate", "--classes", "S99", "--out", tmp_path / "x.csv")
    assert exc.value.code == 2
    assert "unknown class" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_generate_preset_writes_both_splits(tmp_path):
    out = tmp_path / "small.csv"
    assert run("generate", "--preset", "11class", "--scale", 0.01, "--out", out) == 0
    assert len(pd.read_csv(tmp_path / "small_train.csv")) == 33
    assert len(pd.read_csv(tmp_path / "small_test.csv")) == 11


def test_decompose_dump(tmp_path):
    out = tmp_path / "decomp.json"
    assert run("decompose", "--class", "S4", "--seed", 1, "--out", out) == 0
    dump = json.loads(out.read_text())
    assert [len(dump[f"D{i}"]) for i in range(1, 12)] == [1283, 645, 326, 166, 86, 46, 26, 16, 11, 9, 8]
    assert dump["label"] == "S4" and dump["original_length"] == 2560


def test_pipeline_generate_extract_train_eval(tmp_path):
    dataset = tmp_path / "ds.csv"
    features = tmp_path / "features.csv"
    model = tmp_path / "model.json"
    reports = tmp_path / "reports"

    assert run("generate", "--classes", "S0,S1,S5", "--per-class", 20, "--seed", 1, "--out", dataset) == 0
    assert run("extract", "--input", dataset, "--out", features) == 0
    assert run(
        "train", "--features", features, "--activation", "sigmoid", "--hidden", 20, "--chunk-size", 10, "--out", model
    ) == 0
    assert run("eval", "--model", model, "--features", features, "--out", reports) == 0

    report = json.loads((reports / "report.json").read_text())
    assert report["classes"] == ["S0", "S1", "S5"]
    assert sum(map(sum, report["confusion"])) == 60
    assert 0.0 <= report["overall_accuracy"] <= 1.0
    assert (reports / "confusion_eval.csv").exists()


def test_compare_from_spec_file(tmp_path, capsys):
    spec = tmp_path / "experiment.json"
    spec.write_text(
        json.dumps(
            {
                "classes": ["S1", "S2"],
                "n_train": 40,
                "n_test": 10,
                "hidden_neurons": [15],
                "chunk_size": 10,
                "n_seeds": 1,
            }
        )
    )
    out = tmp_path / "compare"
    assert run("compare", "--spec", spec, "--activations", "sigmoid,hardlim", "--out", out) == 0
    table = pd.read_csv(out / "compare.csv")
    assert list(table["activation"]) == ["sigmoid", "hardlim"]
    assert (out / "report.json").exists()
    assert "hardlim" in capsys.readouterr().out


def test_sweep_rejects_unsorted_hidden(tmp_path):
    spec = tmp_path / "experiment.json"
    spec.write_text(json.dumps({"classes": ["S1", "S2"], "n_train": 40, "n_test": 10, "n_seeds": 1}))
    assert run("sweep", "--spec", spec, "--hidden", "20,10", "--out", tmp_path / "sweep") == 2


def test_reproduce_table3(tmp_path, capsys):
    assert run("reproduce", "--table", 3, "--out", tmp_path) == 0
    assert "4353" in capsys.readouterr().out
    table = pd.read_csv(tmp_path / "table3.csv")
    assert list(table["testing_samples"]) == [815, 879, 1090]


def test_reproduce_rejects_other_tables(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("reproduce", "--table", 5, "--out", tmp_path)
    assert exc.value.code == 2


def test_missing_input_file(tmp_path):
    assert run("extract", "--input", tmp_path / "missing.csv") == 1


def test_malformed_model_file(tmp_path, capsys):
    model = tmp_path / "model.json"
    model.write_text(json.dumps({"activation": "sigmoid"})[:-1])
    assert run("eval", "--model", model, "--features", tmp_path / "features.csv") == 1
    assert "error:" in capsys.readouterr().err

    model.write_text(json.dumps({"activation": "sigmoid"}))
    assert run("eval", "--model", model, "--features", tmp_path / "features.csv") == 1


@pytest.mark.parametrize("flag, value", [("--per-class", -3), ("--per-class", 0), ("--scale", 0)])
def test_generate_rejects_bad_counts(tmp_path, flag, value):
    with pytest.raises(SystemExit) as exc:
        run("generate", "--classes", "S1", flag, value, "--out", tmp_path / "x.csv")
    assert exc.value.code == 2
    assert not (tmp_path / "x.csv").exists()


@pytest.mark.slow
def test_reproduce_table4_deterministic(tmp_path):
    tables = []
    for name in ("first", "second"):
        assert run("reproduce", "--table", 4, "--seeds", 1, "--seed", 123, "--out", tmp_path / name) == 0
        table = pd.read_csv(tmp_path / name / "table4.csv")
        timing = [column for column in table.columns if column.endswith("_time_s")]
        tables.append(table.drop(columns=timing).to_csv(index=False))
    assert tables[0] == tables[1]
