"""Command-line front door: generate, decompose, extract, train, eval, sweep, compare, reproduce."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

import harness
import oselm
from config import get_log_level
from dwt import WaveletError, decompose
from features import FeatureError, extract_many, load_features, save_features, to_matrix
from harness import ExperimentSpec, ExperimentSpecError
from oselm import ActivationKind, OselmError
from siggen import (
    PRESETS,
    DatasetSpec,
    EventClass,
    SignalGenerationError,
    UnknownClass,
    UnknownPreset,
    derive_seed,
    generate_dataset,
    load_dataset,
    save_dataset,
    simulate,
)
from utils.file_utils import (
    get_dataset_file_path,
    get_features_file_path,
    get_model_file_path,
    get_reports_dir,
    save_csv,
    save_json,
)

logger = logging.getLogger(__name__)


class UsageError(Exception):
    """Bad flag values detected after parsing; exits with status 2"""


def _parse_classes(raw: str) -> List[EventClass]:
    try:
        return [EventClass.parse(name) for name in raw.split(",") if name.strip()]
    except UnknownClass as e:
        raise UsageError(str(e)) from e


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {raw!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _parse_ints(raw: str) -> List[int]:
    try:
        return [int(v) for v in raw.split(",") if v.strip()]
    except ValueError as e:
        raise UsageError(f"expected a comma-separated list of integers, got {raw!r}") from e


def _parse_activations(raw: str) -> List[ActivationKind]:
    try:
        return [ActivationKind.parse(name) for name in raw.split(",") if name.strip()]
    except OselmError as e:
        raise UsageError(str(e)) from e


def cmd_generate(args) -> int:
    if args.spec:
        spec = DatasetSpec.from_json(args.spec)
    elif args.preset:
        spec = DatasetSpec.from_preset(args.preset, master_seed=args.seed, scale=args.scale)
    else:
        classes = _parse_classes(args.classes)
        if not classes:
            raise UsageError("--classes needs at least one class name")
        spec = DatasetSpec(train_counts={c: args.per_class for c in classes}, master_seed=args.seed)

    dataset = generate_dataset(spec)
    out = Path(args.out) if args.out else get_dataset_file_path(spec.preset or f"dataset_{args.seed}")
    if dataset.test:
        save_dataset(dataset.train, out.with_name(f"{out.stem}_train.csv"))
        save_dataset(dataset.test, out.with_name(f"{out.stem}_test.csv"))
    else:
        save_dataset(dataset.train, out)
    print(f"Wrote {len(dataset.train)} training + {len(dataset.test)} testing rows")
    return 0


def cmd_decompose(args) -> int:
    if args.input:
        signals = load_dataset(args.input)
        if not 0 <= args.row < len(signals):
            raise UsageError(f"--row {args.row} out of range (dataset has {len(signals)} rows)")
        signal = signals[args.row]
    else:
        signal = simulate(_parse_classes(args.event_class)[0], args.seed)

    dump = decompose(signal, args.levels).to_dict()
    dump["label"] = signal.label.name
    dump["seed"] = signal.seed
    if args.out:
        save_json(dump, Path(args.out))
        print(f"Wrote {args.levels}-level decomposition of {signal.label.name} to {args.out}")
    else:
        print(json.dumps(dump))
    return 0


def cmd_extract(args) -> int:
    signals = load_dataset(args.input)
    vectors = extract_many(signals)
    out = Path(args.out) if args.out else get_features_file_path(Path(args.input).stem)
    save_features(vectors, out)
    print(f"Wrote {len(vectors)} feature rows to {out}")
    return 0


def cmd_train(args) -> int:
    X, labels = to_matrix(load_features(args.features))
    classes = _parse_classes(args.classes) if args.classes else sorted(set(labels), key=lambda c: c.index)
    activation = _parse_activations(args.activation)[0]
    # feature files are grouped by class; the initial chunk must see all of them
    order = np.random.default_rng(derive_seed(args.seed, "order")).permutation(len(X))
    X, labels = X[order], [labels[i] for i in order]
    model = oselm.fit(X, labels, classes, args.hidden, activation, args.seed, args.chunk_size)
    out = Path(args.out) if args.out else get_model_file_path(f"oselm_{activation.value}_L{args.hidden}")
    oselm.save_model(model, out, include_P=not args.no_p)
    print(f"Trained L={args.hidden} {activation.value} model on {len(X)} rows -> {out}")
    return 0


def cmd_eval(args) -> int:
    model = oselm.load_model(args.model)
    X, labels = to_matrix(load_features(args.features))
    result = harness.evaluate(model, X, labels)
    out_dir = Path(args.out) if args.out else get_reports_dir()
    class_names = [c.name for c in model.classes]
    save_json(
        {
            "model": str(args.model),
            "features": str(args.features),
            "classes": class_names,
            "confusion": result.confusion.tolist(),
            "per_class_accuracy": result.per_class_accuracy,
            "overall_accuracy": result.overall_accuracy,
            "test_time_s": result.test_time_s,
        },
        out_dir / "report.json",
    )
    save_csv(harness.confusion_frame(result.confusion, class_names), out_dir / "confusion_eval.csv")
    print(f"Overall accuracy: {result.overall_accuracy * 100:.2f}% on {len(X)} rows")
    return 0


def _experiment_spec(args) -> ExperimentSpec:
    if args.spec:
        spec = harness.load_experiment_spec(args.spec)
    else:
        spec = ExperimentSpec.from_preset(args.preset, scale=args.scale, master_seed=args.seed)
    overrides = {}
    if args.seeds is not None:
        overrides["n_seeds"] = args.seeds
    if args.chunk_size is not None:
        overrides["chunk_size"] = args.chunk_size
    if getattr(args, "activations", None):
        overrides["activations"] = _parse_activations(args.activations)
    if getattr(args, "hidden", None):
        overrides["hidden_neurons"] = _parse_ints(args.hidden)
    return replace(spec, **overrides) if overrides else spec


def cmd_sweep(args) -> int:
    spec = _experiment_spec(args)
    table, reports = harness.neuron_sweep(spec, spec.hidden_neurons)
    out_dir = Path(args.out) if args.out else get_reports_dir()
    save_csv(table, out_dir / "sweep.csv")
    harness.write_reports(reports, out_dir)
    print(table.to_string(index=False))
    return 0


def cmd_compare(args) -> int:
    spec = _experiment_spec(args)
    table, reports = harness.compare_activations(spec)
    out_dir = Path(args.out) if args.out else get_reports_dir()
    save_csv(table, out_dir / "compare.csv")
    harness.write_reports(reports, out_dir)
    print(table.to_string(index=False))
    return 0


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out) if args.out else get_reports_dir()
    table = harness.reproduce_table(args.table, args.seeds, args.seed, out_dir, args.scale)
    print(table.to_string(index=False))
    return 0


def _add_experiment_flags(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--spec", help="experiment JSON file")
    source.add_argument("--preset", default="16class", choices=sorted(PRESETS), help="class-set preset")
    parser.add_argument("--scale", type=_positive_float, default=1.0, help="multiply preset train/test totals")
    parser.add_argument("--seeds", type=_positive_int, help="replicates (random hidden layers + datasets)")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--chunk-size", type=_positive_int, help="sequential chunk size (1 = one-by-one)")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pq-oselm",
        description="Power-quality disturbance classification: wavelet features + OS-ELM",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a labeled waveform dataset (CSV + params JSON)")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--classes", default="S1", help="comma-separated class names, e.g. S1,S2")
    source.add_argument("--preset", choices=sorted(PRESETS), help="train/test sizing preset")
    source.add_argument("--spec", help="experiment JSON file")
    p.add_argument("--per-class", type=_positive_int, default=10, help="signals per class (with --classes)")
    p.add_argument("--scale", type=_positive_float, default=1.0, help="multiply preset totals")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", help="dataset CSV path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("decompose", help="dump the wavelet coefficients of one signal as JSON")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", help="dataset CSV")
    source.add_argument("--class", dest="event_class", help="simulate a signal of this class")
    p.add_argument("--row", type=int, default=0, help="row of --input to decompose")
    p.add_argument("--seed", type=int, default=0, help="signal seed (with --class)")
    p.add_argument("--levels", type=int, default=11)
    p.add_argument("--out", help="JSON path (stdout if omitted)")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("extract", help="compute the 66 wavelet features of every signal in a dataset")
    p.add_argument("--input", required=True, help="dataset CSV")
    p.add_argument("--out", help="feature CSV path")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train an OS-ELM model on a feature CSV")
    p.add_argument("--features", required=True, help="feature CSV")
    p.add_argument("--classes", help="class order (default: classes present, by index)")
    p.add_argument("--activation", default="sigmoid", help="sigmoid, rbf, sinusoid or hardlim")
    p.add_argument("--hidden", type=_positive_int, default=700, help="hidden neurons L")
    p.add_argument("--chunk-size", type=_positive_int, default=harness.DEFAULT_CHUNK_SIZE)
    p.add_argument("--seed", type=int, default=0, help="hidden-layer seed")
    p.add_argument("--no-p", action="store_true", help="leave P out of the saved model")
    p.add_argument("--out", help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a saved model on a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="hidden-neuron sweep")
    _add_experiment_flags(p)
    p.add_argument("--hidden", help="comma-separated L values, ascending")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="activation comparison across activations")
    _add_experiment_flags(p)
    p.add_argument("--activations", help="comma-separated activations")
    p.add_argument("--hidden", help="comma-separated L values")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("reproduce", help="rerun table 3 (sizing), 4 (activations) or 6 (neuron sweep)")
    p.add_argument("--table", type=int, required=True, choices=(3, 4, 6))
    p.add_argument("--seeds", type=_positive_int, default=harness.DEFAULT_N_SEEDS)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--scale", type=_positive_float, default=1.0, help="multiply preset totals")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=get_log_level(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        parser.error(str(e))
    except (UnknownClass, UnknownPreset, ExperimentSpecError) as e:
        logger.error(f"{args.command}: invalid input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (SignalGenerationError, WaveletError, FeatureError, OselmError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        logger.error(f"{args.command} could not write or read a file: {e}")
        logger.exception("Full error:")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}")
        logger.exception("Full error:")
        print(f"error: {e}", file=sys.stderr)
        return 1
