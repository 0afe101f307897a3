import json

import numpy as np
import pytest

import harness
import oselm
from harness import ExperimentSpec, ExperimentSpecError
from oselm import ActivationKind
from siggen import EventClass


SMALL_CLASSES = [EventClass.S1, EventClass.S2, EventClass.S5]


def small_spec(**overrides) -> ExperimentSpec:
    options = dict(
        classes=SMALL_CLASSES,
        train_counts={c: 30 for c in SMALL_CLASSES},
        test_counts={c: 8 for c in SMALL_CLASSES},
        activations=[ActivationKind.SIGMOID],
        hidden_neurons=[20],
        chunk_size=10,
        n_seeds=1,
        master_seed=3,
    )
    options.update(overrides)
    return ExperimentSpec(**options)


def test_run_experiment_reports():
    reports = harness.run_experiment(small_spec(n_seeds=2))
    assert len(reports) == 2
    for report in reports:
        assert report.confusion.shape == (3, 3)
        assert list(report.confusion.sum(axis=1)) == [8, 8, 8]
        assert report.overall_accuracy == pytest.approx(np.trace(report.confusion) / 24)
        assert 0.0 <= report.overall_accuracy <= 1.0
        assert 0.0 <= report.train_accuracy <= 1.0
        for i, accuracy in enumerate(report.per_class_accuracy):
            assert accuracy == pytest.approx(report.confusion[i, i] / 8)
        assert report.allocation["S1"] == {"train": 30, "test": 8}
    assert reports[0].model_seed != reports[1].model_seed


def test_run_experiment_deterministic():
    first = harness.run_experiment(small_spec())
    second = harness.run_experiment(small_spec())
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.confusion, b.confusion)
        assert a.overall_accuracy == b.overall_accuracy
        assert a.train_accuracy == b.train_accuracy


def test_memorization_when_testing_on_training_set():
    spec = small_spec(
        train_counts={c: 10 for c in SMALL_CLASSES},
        test_counts={},
        activations=[ActivationKind.SINUSOID],
        hidden_neurons=[30],
        test_on_train=True,
    )
    (report,) = harness.run_experiment(spec)
    assert report.overall_accuracy == 1.0
    assert report.train_accuracy == 1.0


def test_evaluate_unknown_label():
    spec = small_spec()
    data = harness._prepare_data(spec, 0)
    model = oselm.fit(data.X_train, data.y_train, spec.classes, 20, ActivationKind.SIGMOID, 0, 10)
    result = harness.evaluate(model, data.X_test, data.y_test)
    assert result.confusion.sum() == 24
    with pytest.raises(ExperimentSpecError):
        harness.evaluate(model, data.X_test[:1], [EventClass.S16])


def test_neuron_sweep_requires_sorted_values():
    with pytest.raises(ExperimentSpecError):
        harness.neuron_sweep(small_spec(), [50, 20])


def test_neuron_sweep_single_value_matches_experiment():
    spec = small_spec()
    table, reports = harness.neuron_sweep(spec, [20])
    assert len(table) == 1
    assert table["test_accuracy_pct"].iloc[0] == pytest.approx(reports[0].overall_accuracy * 100)
    direct = harness.run_experiment(spec)
    assert direct[0].overall_accuracy == reports[0].overall_accuracy


def test_compare_activations_table():
    spec = small_spec(activations=[ActivationKind.SIGMOID, ActivationKind.HARDLIM])
    table, reports = harness.compare_activations(spec)
    assert list(table["activation"]) == ["sigmoid", "hardlim"]
    assert len(reports) == 2
    assert set(table.columns) >= {"train_time_s", "test_time_s", "train_accuracy_pct", "test_accuracy_pct"}


def test_spec_validation():
    with pytest.raises(ExperimentSpecError):
        small_spec(hidden_neurons=[0])
    with pytest.raises(ExperimentSpecError):
        small_spec(test_counts={EventClass.S1: 8})
    with pytest.raises(ExperimentSpecError):
        small_spec(activations=[])


def test_spec_from_dict():
    spec = ExperimentSpec.from_dict({"classes": 11, "scale": 0.01, "n_seeds": 2})
    assert spec.preset == "11class"
    assert len(spec.classes) == 11
    assert spec.n_train == 33 and spec.n_test == 11
    assert spec.hidden_neurons == [500]

    custom = ExperimentSpec.from_dict(
        {"classes": ["S1", "S3"], "n_train": 10, "n_test": 4, "activations": ["rbf", "sinusoidal"]}
    )
    assert custom.train_counts == {EventClass.S1: 5, EventClass.S3: 5}
    assert custom.test_counts == {EventClass.S1: 2, EventClass.S3: 2}
    assert custom.activations == [ActivationKind.RBF, ActivationKind.SINUSOID]

    with pytest.raises(ExperimentSpecError):
        ExperimentSpec.from_dict({"classes": ["S1"]})
    with pytest.raises(ExperimentSpecError):
        ExperimentSpec.from_dict({"classes": "12class"})


def test_spec_json_round_trip(tmp_path):
    spec = small_spec(activations=[ActivationKind.RBF], hidden_neurons=[10, 20])
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(spec.to_dict()))
    loaded = harness.load_experiment_spec(path)
    assert loaded.train_counts == spec.train_counts
    assert loaded.activations == spec.activations
    assert loaded.hidden_neurons == [10, 20]


def test_split_seeds_disjoint():
    data = harness._prepare_data(small_spec(), 0)
    assert len(data.X_train) == 90 and len(data.X_test) == 24
    assert {c for c in data.y_train} == set(SMALL_CLASSES)


def test_write_reports(tmp_path):
    reports = harness.run_experiment(small_spec())
    harness.write_reports(reports, tmp_path, extra={"note": "small"})
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["note"] == "small"
    assert saved["reports"][0]["confusion"] == reports[0].confusion.tolist()
    confusion_csv = (tmp_path / f"confusion_{reports[0].run_id}.csv").read_text().splitlines()
    assert confusion_csv[0] == "true_class,S1,S2,S5"


def test_table3(tmp_path):
    table = harness.reproduce_table(3, n_seeds=1, master_seed=0, out_dir=tmp_path)
    assert list(table["classes"]) == [11, 13, 16]
    assert list(table["training_samples"]) == [3254, 3510, 4353]
    assert list(table["testing_samples"]) == [815, 879, 1090]
    assert (table["training_samples"] == table["reference_training_samples"]).all()
    assert (tmp_path / "table3.csv").exists()


def test_reproduce_unknown_table(tmp_path):
    with pytest.raises(ExperimentSpecError):
        harness.reproduce_table(5, n_seeds=1, master_seed=0, out_dir=tmp_path)


@pytest.mark.slow
def test_sixteen_class_sigmoid_accuracy():
    spec = ExperimentSpec.from_preset("16class", n_seeds=5)
    reports = harness.run_experiment(spec)
    accuracies = [report.overall_accuracy for report in reports]
    assert len(accuracies) == 5
    assert np.mean(accuracies) >= 0.97
    assert min(accuracies) >= 0.95


@pytest.mark.slow
def test_hidden_neuron_sweep_shape():
    spec = ExperimentSpec.from_preset("16class", n_seeds=1)
    table, _ = harness.neuron_sweep(spec, [50, 500, 700])
    accuracy = dict(zip(table["hidden_neurons"], table["test_accuracy_pct"]))
    assert accuracy[500] - accuracy[50] >= 5.0
    assert abs(accuracy[700] - accuracy[500]) <= 1.5


@pytest.mark.slow
def test_activation_ordering():
    spec = ExperimentSpec.from_preset("16class", activations=list(ActivationKind), n_seeds=1)
    table, _ = harness.compare_activations(spec)
    accuracy = dict(zip(table["activation"], table["test_accuracy_pct"]))
    assert accuracy["sigmoid"] >= accuracy["sinusoid"] - 1.0
    assert accuracy["sigmoid"] > accuracy["rbf"]
    assert accuracy["rbf"] > accuracy["hardlim"]
    assert accuracy["hardlim"] <= accuracy["sigmoid"] - 5.0


@pytest.mark.slow
def test_table6_training_time_grows_with_hidden_neurons(tmp_path):
    table = harness.reproduce_table(6, n_seeds=1, master_seed=0, out_dir=tmp_path)
    assert list(table["hidden_neurons"]) == sorted(harness.REFERENCE_SWEEP)
    assert len(table) == 16
    assert (np.diff(table["train_time_s"].to_numpy()) > 0).all()
