import os
import json
import tempfile
from pathlib import Path
from typing import Any, Iterable, Optional

import pandas as pd

from config import get_data_dir

# Sub-directories of the data root, one per pipeline artifact
SUBDIRS = ("datasets", "features", "models", "reports")


def get_dirs() -> dict:
    """Map artifact kind -> directory under the configured data root"""
    data_dir = get_data_dir()
    return {name: data_dir / name for name in SUBDIRS}


def _atomic_write(filepath: Path, write_fn, mode: str = "w"):
    """Write through a temp file in the target directory, then rename over the target."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=filepath.parent, prefix=f".{filepath.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, encoding="utf-8", newline="") as f:
            write_fn(f)
        os.replace(tmp_name, filepath)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def save_json(data: Any, filepath: Path):
    """Save data to a JSON file"""
    _atomic_write(filepath, lambda f: json.dump(data, f, indent=2, ensure_ascii=False))


def load_json(filepath: Path) -> Any:
    """Load data from a JSON file"""
    filepath = Path(filepath)
    if not filepath.exists():
        return None
    with open(filepath, "r", encoding="utf-8") as f:
        return json.load(f)


def save_csv(frame: pd.DataFrame, filepath: Path, comment_lines: Optional[Iterable[str]] = None):
    """Save a DataFrame as CSV, optionally preceded by '# ' comment lines"""

    def write(f):
        for line in comment_lines or ():
            f.write(f"# {line}\n")
        frame.to_csv(f, index=False, lineterminator="\n")

    _atomic_write(filepath, write)


def load_csv(filepath: Path) -> pd.DataFrame:
    """Load a CSV written by save_csv (comment lines are skipped)"""
    return pd.read_csv(filepath, comment="#")


def get_dataset_file_path(name: str) -> Path:
    """Get path where a generated dataset CSV should be stored"""
    return get_dirs()["datasets"] / f"{name}.csv"


def get_params_file_path(dataset_path: Path) -> Path:
    """Sidecar JSON holding the event parameters of a dataset CSV, keyed by seed"""
    dataset_path = Path(dataset_path)
    return dataset_path.with_name(f"{dataset_path.stem}.params.json")


def get_features_file_path(name: str) -> Path:
    """Get path where a feature CSV should be stored"""
    return get_dirs()["features"] / f"{name}.csv"


def get_model_file_path(name: str) -> Path:
    """Get path where a trained model should be stored"""
    return get_dirs()["models"] / f"{name}.json"


def get_reports_dir() -> Path:
    """Get directory where experiment reports are written"""
    return get_dirs()["reports"]
