"""Six statistics per detail level over the 11-level decomposition -> 66-value feature vector."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import xlogy

from config import get_threads
from dwt import DEFAULT_LEVELS, WaveletDecomposition, decompose
from siggen import EventClass, Signal
from utils.file_utils import load_csv, save_csv

logger = logging.getLogger(__name__)

STAT_NAMES = ("EDR", "STD", "MEAN", "KRT", "SKW", "ENTP")
N_LEVELS = DEFAULT_LEVELS
N_FEATURES = len(STAT_NAMES) * N_LEVELS
FEATURE_COLUMNS = [f"f{i}" for i in range(1, N_FEATURES + 1)]
CSV_COMMENT = "f(6(i-1)+j) = level i, stat j; stats: " + ",".join(STAT_NAMES)


class FeatureError(ValueError):
    pass


class DegenerateSequence(FeatureError):
    pass


class WrongLevelCount(FeatureError):
    pass


@dataclass
class FeatureVector:
    values: np.ndarray  # level-major, stat-minor
    label: EventClass

    def level(self, i: int) -> np.ndarray:
        """The six statistics of detail level i (1-based)"""
        start = len(STAT_NAMES) * (i - 1)
        return self.values[start : start + len(STAT_NAMES)]


def level_stats(coeffs: np.ndarray) -> Tuple[float, float, float, float, float, float]:
    """
    Energy, standard deviation, mean, kurtosis, skewness and entropy of one coefficient band.

    The standard deviation uses the N-1 denominator; the third and fourth central
    moments use the plain 1/N expectation, both as the feature table writes them.
    Kurtosis is non-excess. Zero-variance bands give kurtosis = skewness = 0.
    """
    cd = np.asarray(coeffs, dtype=float)
    if cd.ndim != 1 or len(cd) < 2:
        raise DegenerateSequence(f"need at least 2 coefficients, got {cd.size}")

    squared = cd**2
    energy = float(np.sum(squared))
    mean = float(np.mean(cd))
    std = float(np.std(cd, ddof=1))
    if std > 0.0:
        kurtosis = float(stats.moment(cd, 4) / std**4)
        skewness = float(stats.moment(cd, 3) / std**3)
    else:
        kurtosis = skewness = 0.0
    # xlogy(0, 0) == 0
    entropy = float(-np.sum(xlogy(squared, squared)))
    return energy, std, mean, kurtosis, skewness, entropy


def extract(decomp: WaveletDecomposition, label: EventClass) -> FeatureVector:
    if decomp.levels != N_LEVELS:
        raise WrongLevelCount(f"expected {N_LEVELS} detail levels, got {decomp.levels}")
    values = np.array([stat for cd in decomp.details for stat in level_stats(cd)])
    return FeatureVector(values=values, label=label)


def extract_signal(signal: Signal) -> FeatureVector:
    return extract(decompose(signal, N_LEVELS), signal.label)


def extract_many(signals: List[Signal]) -> List[FeatureVector]:
    """Decompose and featurize signals in parallel; output order follows input order."""
    with ThreadPoolExecutor(max_workers=get_threads()) as pool:
        vectors = list(pool.map(extract_signal, signals))
    logger.info(f"Extracted {len(vectors)} feature vectors")
    return vectors


def to_matrix(vectors: List[FeatureVector]) -> Tuple[np.ndarray, List[EventClass]]:
    """Stack vectors into an (N, 66) array plus the label list"""
    if not vectors:
        return np.empty((0, N_FEATURES)), []
    return np.vstack([v.values for v in vectors]), [v.label for v in vectors]


def save_features(vectors: List[FeatureVector], filepath: Path):
    matrix, labels = to_matrix(vectors)
    frame = pd.DataFrame(matrix, columns=FEATURE_COLUMNS)
    frame.insert(0, "label", [label.name for label in labels])
    save_csv(frame, filepath, comment_lines=[CSV_COMMENT])
    logger.info(f"Saved {len(vectors)} feature vectors to {filepath}")


def load_features(filepath: Path) -> List[FeatureVector]:
    frame = load_csv(filepath)
    missing = [c for c in ["label"] + FEATURE_COLUMNS if c not in frame.columns]
    if missing:
        raise FeatureError(f"{filepath}: missing columns {missing[:5]}")
    matrix = frame[FEATURE_COLUMNS].to_numpy(dtype=float)
    return [FeatureVector(values=row, label=EventClass.parse(label)) for row, label in zip(matrix, frame["label"])]
