"""Experiment orchestration: dataset splits, OS-ELM training/evaluation, activation and hidden-neuron tables."""

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix

import oselm
from features import extract_many, to_matrix
from oselm import ActivationKind
from siggen import PRESETS, DatasetSpec, EventClass, allocate_counts, derive_seed, generate_dataset
from utils.file_utils import load_json, save_csv, save_json

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 50
DEFAULT_N_SEEDS = 5
# hidden-neuron count each class set is compared at
DEFAULT_HIDDEN = {"11class": 500, "13class": 500, "16class": 700}

# published reference results, written next to ours by reproduce_table
# (classes, activation) -> (train time s, test time s, train acc %, test acc %, hidden neurons)
REFERENCE_ACTIVATIONS = {
    (11, "sigmoid"): (2.6052, 0.0624, 99.85, 99.63, 500),
    (11, "rbf"): (2.5584, 0.1872, 97.73, 96.89, 500),
    (11, "sinusoid"): (3.1044, 0.0624, 99.91, 99.51, 500),
    (11, "hardlim"): (2.1372, 0.0624, 89.52, 88.47, 500),
    (13, "sigmoid"): (3.0732, 0.0624, 99.77, 99.43, 500),
    (13, "rbf"): (2.6208, 0.436, 97.01, 95.90, 500),
    (13, "sinusoid"): (2.6832, 0.0, 99.72, 99.09, 500),
    (13, "hardlim"): (2.0436, 0.0312, 84.84, 79.29, 500),
    (16, "sigmoid"): (5.4288, 0.1092, 99.93, 99.72, 700),
    (16, "rbf"): (5.8500, 0.1716, 97.75, 97.25, 700),
    (16, "sinusoid"): (6.2088, 0.0624, 99.93, 99.17, 700),
    (16, "hardlim"): (4.3524, 0.0624, 90.76, 87.98, 700),
}
# hidden neurons -> (test acc %, train time s)
REFERENCE_SWEEP = {
    50: (85.78, 0.1248),
    100: (91.19, 0.2496),
    150: (94.68, 0.4368),
    200: (97.43, 0.6240),
    250: (97.98, 0.8763),
    300: (98.44, 1.1856),
    350: (98.53, 1.6848),
    400: (98.99, 2.0124),
    450: (99.08, 2.2152),
    500: (99.08, 2.8080),
    550: (99.27, 3.6816),
    600: (99.27, 4.6020),
    700: (99.36, 6.2244),
    800: (99.27, 7.1136),
    900: (99.27, 9.9685),
    1000: (99.27, 13.0729),
}


class ExperimentSpecError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    classes: List[EventClass]
    train_counts: Dict[EventClass, int]
    test_counts: Dict[EventClass, int]
    activations: List[ActivationKind] = field(default_factory=lambda: [ActivationKind.SIGMOID])
    hidden_neurons: List[int] = field(default_factory=lambda: [700])
    chunk_size: int = DEFAULT_CHUNK_SIZE
    n_seeds: int = DEFAULT_N_SEEDS
    master_seed: int = 0
    preset: Optional[str] = None
    scale: float = 1.0
    test_on_train: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.classes:
            raise ExperimentSpecError("experiment needs at least one class")
        for cls in self.classes:
            if self.train_counts.get(cls, 0) <= 0:
                raise ExperimentSpecError(f"training count for {cls.name} must be positive")
            if not self.test_on_train and self.test_counts.get(cls, 0) <= 0:
                raise ExperimentSpecError(f"testing count for {cls.name} must be positive")
        if not self.activations:
            raise ExperimentSpecError("experiment needs at least one activation")
        if not self.hidden_neurons or min(self.hidden_neurons) < 1:
            raise ExperimentSpecError(f"hidden neuron counts must be positive: {self.hidden_neurons}")
        if self.chunk_size < 1 or self.n_seeds < 1:
            raise ExperimentSpecError("chunk_size and n_seeds must be >= 1")

    @property
    def n_train(self) -> int:
        return sum(self.train_counts.values())

    @property
    def n_test(self) -> int:
        return sum(self.test_counts.values())

    @classmethod
    def from_preset(cls, preset: str, scale: float = 1.0, **kwargs) -> "ExperimentSpec":
        dataset = DatasetSpec.from_preset(preset, scale=scale)
        kwargs.setdefault("hidden_neurons", [DEFAULT_HIDDEN[preset]])
        return cls(
            classes=dataset.classes,
            train_counts=dataset.train_counts,
            test_counts=dataset.test_counts,
            preset=preset,
            scale=scale,
            **kwargs,
        )

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentSpec":
        scale = float(data.get("scale", 1.0))
        class_set = data.get("preset") or data.get("classes", "16class")
        options = {
            "activations": [ActivationKind.parse(a) for a in data.get("activations", ["sigmoid"])],
            "chunk_size": int(data.get("chunk_size", DEFAULT_CHUNK_SIZE)),
            "n_seeds": int(data.get("n_seeds", DEFAULT_N_SEEDS)),
            "master_seed": int(data.get("master_seed", 0)),
            "test_on_train": bool(data.get("test_on_train", False)),
        }
        if "hidden_neurons" in data:
            hidden = data["hidden_neurons"]
            options["hidden_neurons"] = [int(h) for h in (hidden if isinstance(hidden, list) else [hidden])]

        if isinstance(class_set, int):
            class_set = f"{class_set}class"
        if isinstance(class_set, str):
            if class_set not in PRESETS:
                raise ExperimentSpecError(f"unknown class set: {class_set}")
            spec = cls.from_preset(class_set, scale=scale, **options)
            classes = spec.classes
        else:
            classes = [EventClass.parse(name) for name in class_set]
            spec = None

        if "train_counts" in data:
            train_counts = {EventClass.parse(k): int(v) for k, v in data["train_counts"].items()}
        elif "n_train" in data:
            train_counts = allocate_counts(int(data["n_train"]), classes)
        elif spec is not None:
            train_counts = spec.train_counts
        else:
            raise ExperimentSpecError("explicit class lists need train_counts or n_train")

        if "test_counts" in data:
            test_counts = {EventClass.parse(k): int(v) for k, v in data["test_counts"].items()}
        elif "n_test" in data:
            test_counts = allocate_counts(int(data["n_test"]), classes)
        elif spec is not None:
            test_counts = spec.test_counts
        else:
            test_counts = {}

        if spec is not None:
            return replace(spec, train_counts=train_counts, test_counts=test_counts)
        options.setdefault("hidden_neurons", [DEFAULT_HIDDEN["16class"]])
        return cls(classes=classes, train_counts=train_counts, test_counts=test_counts, scale=scale, **options)

    def to_dict(self) -> Dict:
        return {
            "classes": [c.name for c in self.classes],
            "preset": self.preset,
            "scale": self.scale,
            "train_counts": {c.name: n for c, n in self.train_counts.items()},
            "test_counts": {c.name: n for c, n in self.test_counts.items()},
            "activations": [a.value for a in self.activations],
            "hidden_neurons": list(self.hidden_neurons),
            "chunk_size": self.chunk_size,
            "n_seeds": self.n_seeds,
            "master_seed": self.master_seed,
            "test_on_train": self.test_on_train,
        }


def load_experiment_spec(filepath: Path) -> ExperimentSpec:
    data = load_json(Path(filepath))
    if data is None:
        raise ExperimentSpecError(f"experiment file not found: {filepath}")
    return ExperimentSpec.from_dict(data)


@dataclass
class EvalReport:
    run_id: str
    activation: str
    hidden_neurons: int
    seed: int
    model_seed: int
    classes: List[str]
    confusion: np.ndarray  # rows = true class
    per_class_accuracy: List[float]
    overall_accuracy: float
    train_accuracy: float
    train_time_s: float
    test_time_s: float
    allocation: Dict[str, Dict[str, int]]
    spec: Dict

    def to_dict(self) -> Dict:
        data = dict(self.__dict__)
        data["confusion"] = self.confusion.tolist()
        return data


@dataclass
class _PreparedData:
    X_train: np.ndarray
    y_train: List[EventClass]
    X_test: np.ndarray
    y_test: List[EventClass]


def _prepare_data(spec: ExperimentSpec, replicate: int) -> _PreparedData:
    """Generate, decompose and featurize one replicate's train/test sets; training rows come back shuffled."""
    data_seed = derive_seed(spec.master_seed, "data", replicate)
    dataset = generate_dataset(
        DatasetSpec(
            train_counts=spec.train_counts,
            test_counts={} if spec.test_on_train else spec.test_counts,
            master_seed=data_seed,
            preset=spec.preset,
        )
    )
    overlap = {s.seed for s in dataset.train} & {s.seed for s in dataset.test}
    if overlap:
        raise ExperimentSpecError(f"{len(overlap)} signal seed(s) shared between training and testing")

    X_train, y_train = to_matrix(extract_many(dataset.train))
    if spec.test_on_train:
        X_test, y_test = X_train, list(y_train)
    else:
        X_test, y_test = to_matrix(extract_many(dataset.test))

    order = np.random.default_rng(derive_seed(spec.master_seed, "order", replicate)).permutation(len(X_train))
    return _PreparedData(
        X_train=X_train[order],
        y_train=[y_train[i] for i in order],
        X_test=X_test,
        y_test=y_test,
    )


@dataclass
class Evaluation:
    confusion: np.ndarray
    per_class_accuracy: List[float]
    overall_accuracy: float
    test_time_s: float


def evaluate(model: oselm.OselmModel, features: np.ndarray, labels: List[EventClass]) -> Evaluation:
    """Timed prediction over a labeled set, scored as a confusion matrix (rows = true class)"""
    index = {cls: i for i, cls in enumerate(model.classes)}
    unknown = {c.name for c in labels if c not in index}
    if unknown:
        raise ExperimentSpecError(f"labels {sorted(unknown)} are not classes of the model")

    started = time.perf_counter()
    _, predicted = oselm.predict_batch(model, features)
    test_time = time.perf_counter() - started

    y_true = np.array([index[c] for c in labels])
    confusion = confusion_matrix(y_true, predicted, labels=list(range(model.n_classes)))
    row_sums = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(row_sums > 0, np.diag(confusion) / row_sums, np.nan)
    overall = float(np.trace(confusion) / confusion.sum()) if confusion.sum() else 0.0
    return Evaluation(
        confusion=confusion,
        per_class_accuracy=[float(a) for a in per_class],
        overall_accuracy=overall,
        test_time_s=test_time,
    )


def _run_cell(
    spec: ExperimentSpec, data: _PreparedData, activation: ActivationKind, L: int, replicate: int
) -> EvalReport:
    model_seed = derive_seed(spec.master_seed, "model", replicate)

    started = time.perf_counter()
    model = oselm.fit(data.X_train, data.y_train, spec.classes, L, activation, model_seed, spec.chunk_size)
    train_time = time.perf_counter() - started

    result = evaluate(model, data.X_test, data.y_test)
    train_result = evaluate(model, data.X_train, data.y_train)
    row_sums = result.confusion.sum(axis=1)

    run_id = f"{spec.preset or 'custom'}_{activation.value}_L{L}_seed{replicate}"
    logger.info(
        f"{run_id}: test accuracy {result.overall_accuracy * 100:.2f}% "
        f"(train {train_time:.3f}s, test {result.test_time_s:.4f}s)"
    )
    return EvalReport(
        run_id=run_id,
        activation=activation.value,
        hidden_neurons=L,
        seed=replicate,
        model_seed=model_seed,
        classes=[c.name for c in spec.classes],
        confusion=result.confusion,
        per_class_accuracy=result.per_class_accuracy,
        overall_accuracy=result.overall_accuracy,
        train_accuracy=train_result.overall_accuracy,
        train_time_s=train_time,
        test_time_s=result.test_time_s,
        allocation={
            c.name: {"train": spec.train_counts.get(c, 0), "test": int(row_sums[i])}
            for i, c in enumerate(spec.classes)
        },
        spec=spec.to_dict(),
    )


def run_experiment(spec: ExperimentSpec) -> List[EvalReport]:
    """One report per (replicate seed, activation, L). Features are computed once per replicate."""
    spec.validate()
    reports = []
    for replicate in range(spec.n_seeds):
        logger.info(f"Replicate {replicate + 1}/{spec.n_seeds}: {spec.n_train} train / {spec.n_test} test signals")
        data = _prepare_data(spec, replicate)
        for activation in spec.activations:
            for L in spec.hidden_neurons:
                reports.append(_run_cell(spec, data, activation, L, replicate))
    return reports


def summarize(reports: List[EvalReport], by: List[str]) -> pd.DataFrame:
    """Mean accuracies (%) and timings over seeds, grouped by report fields"""
    frame = pd.DataFrame(
        [
            {
                "activation": r.activation,
                "hidden_neurons": r.hidden_neurons,
                "train_time_s": r.train_time_s,
                "test_time_s": r.test_time_s,
                "train_accuracy_pct": r.train_accuracy * 100,
                "test_accuracy_pct": r.overall_accuracy * 100,
            }
            for r in reports
        ]
    )
    grouped = frame.groupby(by, sort=False)
    table = grouped[["train_time_s", "test_time_s", "train_accuracy_pct", "test_accuracy_pct"]].mean()
    table["test_accuracy_std_pct"] = grouped["test_accuracy_pct"].std(ddof=0)
    table["n_seeds"] = grouped.size()
    return table.reset_index()


def neuron_sweep(spec: ExperimentSpec, L_values: List[int]) -> Tuple[pd.DataFrame, List[EvalReport]]:
    if list(L_values) != sorted(L_values):
        raise ExperimentSpecError(f"L values must be sorted ascending: {L_values}")
    reports = run_experiment(replace(spec, hidden_neurons=list(L_values)))
    table = summarize(reports, ["hidden_neurons"])
    columns = [
        "hidden_neurons",
        "test_accuracy_pct",
        "test_accuracy_std_pct",
        "train_accuracy_pct",
        "train_time_s",
        "n_seeds",
    ]
    return table[columns], reports


def compare_activations(spec: ExperimentSpec) -> Tuple[pd.DataFrame, List[EvalReport]]:
    if len(spec.activations) < 2:
        logger.info("Comparing a single activation; the table is the plain experiment aggregate")
    reports = run_experiment(spec)
    return summarize(reports, ["activation", "hidden_neurons"]), reports


def confusion_frame(confusion: np.ndarray, class_names: List[str]) -> pd.DataFrame:
    frame = pd.DataFrame(confusion, columns=class_names)
    frame.insert(0, "true_class", class_names)
    return frame


def write_reports(reports: List[EvalReport], out_dir: Path, extra: Optional[Dict] = None):
    """report.json with every run plus one confusion_<run>.csv per run"""
    out_dir = Path(out_dir)
    save_json({"reports": [r.to_dict() for r in reports], **(extra or {})}, out_dir / "report.json")
    for report in reports:
        save_csv(confusion_frame(report.confusion, report.classes), out_dir / f"confusion_{report.run_id}.csv")
    logger.info(f"Wrote {len(reports)} report(s) to {out_dir}")


def table3() -> pd.DataFrame:
    rows = []
    for name, (n_classes, n_train, n_test) in PRESETS.items():
        dataset = DatasetSpec.from_preset(name)
        rows.append(
            {
                "classes": n_classes,
                "training_samples": sum(dataset.train_counts.values()),
                "testing_samples": sum(dataset.test_counts.values()),
                "reference_training_samples": n_train,
                "reference_testing_samples": n_test,
            }
        )
    return pd.DataFrame(rows)


def table4(n_seeds: int, master_seed: int, scale: float = 1.0) -> Tuple[pd.DataFrame, List[EvalReport]]:
    """Every activation on each of the three class sets at its default hidden-neuron count"""
    tables, reports = [], []
    for preset, (n_classes, _, _) in PRESETS.items():
        spec = ExperimentSpec.from_preset(
            preset, scale=scale, activations=list(ActivationKind), n_seeds=n_seeds, master_seed=master_seed
        )
        table, preset_reports = compare_activations(spec)
        table.insert(0, "classes", n_classes)
        reference = [REFERENCE_ACTIVATIONS[(n_classes, a)] for a in table["activation"]]
        for column, position in (
            ("reference_train_time_s", 0),
            ("reference_test_time_s", 1),
            ("reference_train_accuracy_pct", 2),
            ("reference_test_accuracy_pct", 3),
        ):
            table[column] = [row[position] for row in reference]
        tables.append(table)
        reports.extend(preset_reports)
    return pd.concat(tables, ignore_index=True), reports


def table6(n_seeds: int, master_seed: int, scale: float = 1.0) -> Tuple[pd.DataFrame, List[EvalReport]]:
    """Hidden-neuron sweep on the 16-class set with sigmoid nodes"""
    spec = ExperimentSpec.from_preset("16class", scale=scale, n_seeds=n_seeds, master_seed=master_seed)
    table, reports = neuron_sweep(spec, sorted(REFERENCE_SWEEP))
    table["reference_test_accuracy_pct"] = [REFERENCE_SWEEP[L][0] for L in table["hidden_neurons"]]
    table["reference_train_time_s"] = [REFERENCE_SWEEP[L][1] for L in table["hidden_neurons"]]
    return table, reports


def reproduce_table(table: int, n_seeds: int, master_seed: int, out_dir: Path, scale: float = 1.0) -> pd.DataFrame:
    """Run the routine behind reproduction table 3, 4 or 6 and write table<N>.csv (+ reports)"""
    out_dir = Path(out_dir)
    if table == 3:
        frame = table3()
        reports = []
    elif table == 4:
        frame, reports = table4(n_seeds, master_seed, scale)
    elif table == 6:
        frame, reports = table6(n_seeds, master_seed, scale)
    else:
        raise ExperimentSpecError(f"no reproduction for table {table} (expected 3, 4 or 6)")

    save_csv(frame, out_dir / f"table{table}.csv")
    if reports:
        write_reports(reports, out_dir, extra={"table": table, "n_seeds": n_seeds, "master_seed": master_seed})
    logger.info(f"Wrote {out_dir / f'table{table}.csv'} ({len(frame)} rows)")
    return frame
