"""Online Sequential Extreme Learning Machine: fixed random hidden layer + recursive least squares output weights."""

import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist
from scipy.special import expit

from siggen import EventClass
from utils.file_utils import load_json, save_json

logger = logging.getLogger(__name__)

# Gram matrices with a larger condition estimate get the ridge term
CONDITION_LIMIT = 1e12
RIDGE_SCALE = 1e-8


class OselmError(ValueError):
    pass


class InsufficientInitData(OselmError):
    pass


class NotInitialized(OselmError, RuntimeError):
    pass


class SingularGramWarning(UserWarning):
    """H0'H0 was numerically singular; the initial solve used a ridge term."""


class ActivationKind(Enum):
    SIGMOID = "sigmoid"
    RBF = "rbf"
    SINUSOID = "sinusoid"
    HARDLIM = "hardlim"

    @classmethod
    def parse(cls, name: str) -> "ActivationKind":
        key = name.strip().lower()
        if key == "sinusoidal":
            key = "sinusoid"
        for kind in cls:
            if kind.value == key:
                return kind
        raise OselmError(f"unknown activation: {name} (expected one of {', '.join(k.value for k in cls)})")


@dataclass(frozen=True)
class HiddenLayer:
    weights_a: np.ndarray  # (L, n): input weights, or RBF centers
    biases_b: np.ndarray  # (L,): additive biases, or RBF impact factors
    activation: ActivationKind

    @property
    def L(self) -> int:
        return self.weights_a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.weights_a.shape[1]

    @classmethod
    def random(cls, L: int, n_inputs: int, activation: ActivationKind, rng: np.random.Generator) -> "HiddenLayer":
        weights = rng.uniform(-1.0, 1.0, size=(L, n_inputs))
        if activation is ActivationKind.RBF:
            # (0, 1] impact factors, divided by n so squared distances stay O(1)
            biases = (1.0 - rng.uniform(0.0, 1.0, size=L)) / n_inputs
        else:
            biases = rng.uniform(-1.0, 1.0, size=L)
        return cls.frozen(weights, biases, activation)

    @classmethod
    def frozen(cls, weights: np.ndarray, biases: np.ndarray, activation: ActivationKind) -> "HiddenLayer":
        weights = np.array(weights, dtype=float)
        biases = np.array(biases, dtype=float)
        if weights.ndim != 2 or biases.shape != (weights.shape[0],):
            raise OselmError(f"hidden layer shapes do not match: weights {weights.shape}, biases {biases.shape}")
        if activation is ActivationKind.RBF and np.any(biases <= 0):
            raise OselmError("RBF impact factors must be positive")
        weights.setflags(write=False)
        biases.setflags(write=False)
        return cls(weights_a=weights, biases_b=biases, activation=activation)


def activate(hidden: HiddenLayer, x: np.ndarray) -> np.ndarray:
    """G(a_i, b_i, x) for one input (n,) -> (L,) or a batch (N, n) -> (N, L)."""
    x = np.asarray(x, dtype=float)
    batch = np.atleast_2d(x)
    kind = hidden.activation
    if kind is ActivationKind.RBF:
        out = np.exp(-hidden.biases_b * cdist(batch, hidden.weights_a, "sqeuclidean"))
    else:
        z = batch @ hidden.weights_a.T + hidden.biases_b
        if kind is ActivationKind.SIGMOID:
            out = expit(z)
        elif kind is ActivationKind.SINUSOID:
            out = np.sin(z)
        else:
            out = (z >= 0.0).astype(float)
    return out[0] if x.ndim == 1 else out


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        features = np.asarray(features, dtype=float)
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        flat = std == 0.0
        if np.any(flat):
            logger.warning(f"{int(flat.sum())} feature(s) have zero spread in the fitting chunk; leaving them unscaled")
            std = np.where(flat, 1.0, std)
        return cls(mean=mean, std=std)

    @classmethod
    def identity(cls, n: int) -> "Standardizer":
        return cls(mean=np.zeros(n), std=np.ones(n))

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) / self.std


@dataclass
class OselmModel:
    hidden: HiddenLayer
    beta: np.ndarray  # (L, m)
    P: Optional[np.ndarray]  # (L, L)
    classes: List[EventClass]
    standardizer: Standardizer
    chunks_seen: int = 0
    seed: int = 0
    ridge_lambda: float = 0.0

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def L(self) -> int:
        return self.hidden.L


def one_hot(indices: Sequence[int], n_classes: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=int)
    targets = np.zeros((len(indices), n_classes))
    targets[np.arange(len(indices)), indices] = 1.0
    return targets


def _symmetric(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def _check_finite(model: OselmModel):
    if not (np.all(np.isfinite(model.beta)) and np.all(np.isfinite(model.P))):
        raise OselmError(f"non-finite output weights after {model.chunks_seen} chunk(s)")


def _ridge_for(gram: np.ndarray) -> float:
    L = gram.shape[0]
    ridge = RIDGE_SCALE * float(np.trace(gram)) / L
    return ridge if ridge > 0.0 else RIDGE_SCALE


def init_phase(
    features: np.ndarray,
    targets: np.ndarray,
    L: int,
    activation: ActivationKind,
    rng_seed: int,
    classes: Optional[List[EventClass]] = None,
    standardizer: Optional[Standardizer] = None,
) -> OselmModel:
    """
    Initialization phase on the first chunk (N0 >= L rows).

    Draws the hidden layer from rng_seed, builds H0, then P0 = (H0'H0)^-1 and
    beta0 = P0 H0' T0. When H0'H0 is numerically singular a ridge term
    lambda = 1e-8 * trace / L is added and a SingularGramWarning is emitted.
    Raw features are standardized with `standardizer`, fitted on this chunk if omitted.
    """
    X = np.asarray(features, dtype=float)
    T = np.asarray(targets, dtype=float)
    if X.ndim != 2 or T.ndim != 2 or len(X) != len(T):
        raise OselmError(f"features {X.shape} and targets {T.shape} must be 2-D with matching rows")
    if len(X) < L:
        raise InsufficientInitData(f"initialization needs N0 >= L rows, got N0={len(X)} < L={L}")
    if classes is None:
        classes = [EventClass[f"S{i}"] for i in range(1, T.shape[1] + 1)]
    if len(classes) != T.shape[1]:
        raise OselmError(f"{len(classes)} classes for {T.shape[1]}-column targets")

    if standardizer is None:
        standardizer = Standardizer.fit(X)
    rng = np.random.default_rng(rng_seed)
    hidden = HiddenLayer.random(L, X.shape[1], activation, rng)
    H0 = activate(hidden, standardizer.transform(X))

    gram = H0.T @ H0
    ridge = 0.0
    if np.linalg.cond(gram) > CONDITION_LIMIT:
        ridge = _ridge_for(gram)
    try:
        factor = scipy.linalg.cho_factor(gram + ridge * np.eye(L))
    except np.linalg.LinAlgError:
        ridge = _ridge_for(gram)
        factor = scipy.linalg.cho_factor(gram + ridge * np.eye(L))
    if ridge > 0.0:
        logger.warning(f"Singular H0'H0 for L={L} ({activation.value}); using ridge lambda={ridge:.3e}")
        warnings.warn(f"ridge fallback engaged with lambda={ridge:.3e}", SingularGramWarning, stacklevel=2)

    P0 = _symmetric(scipy.linalg.cho_solve(factor, np.eye(L)))
    beta0 = scipy.linalg.cho_solve(factor, H0.T @ T)

    model = OselmModel(
        hidden=hidden,
        beta=beta0,
        P=P0,
        classes=list(classes),
        standardizer=standardizer,
        chunks_seen=0,
        seed=rng_seed,
        ridge_lambda=ridge,
    )
    _check_finite(model)
    return model


def sequential_update(model: OselmModel, features: np.ndarray, targets: np.ndarray) -> OselmModel:
    """
    Fold one chunk into the model (in place) and return it.

    P_{k+1} = P_k - P_k H' (I + H P_k H')^-1 H P_k
    beta_{k+1} = beta_k + P_{k+1} H' (T - H beta_k)
    A one-row chunk takes the Sherman-Morrison form.
    """
    if model is None or model.P is None or model.beta is None:
        raise NotInitialized("sequential_update called before init_phase")
    X = np.atleast_2d(np.asarray(features, dtype=float))
    T = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(X) == 0:
        raise OselmError("empty chunk")
    if len(X) != len(T) or T.shape[1] != model.n_classes:
        raise OselmError(f"chunk features {X.shape} / targets {T.shape} do not match the model")

    H = activate(model.hidden, model.standardizer.transform(X))
    P = model.P
    if len(H) == 1:
        h = H[0]
        Ph = P @ h
        P_next = P - np.outer(Ph, Ph) / (1.0 + h @ Ph)
    else:
        PHt = P @ H.T
        S = np.eye(len(H)) + H @ PHt
        P_next = P - PHt @ scipy.linalg.solve(S, PHt.T, assume_a="pos")
    P_next = _symmetric(P_next)

    model.beta = model.beta + P_next @ H.T @ (T - H @ model.beta)
    model.P = P_next
    model.chunks_seen += 1
    _check_finite(model)
    return model


def predict_batch(model: OselmModel, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Scores (N, m) and argmax class indices (ties -> lowest index) for raw feature rows"""
    H = activate(model.hidden, model.standardizer.transform(np.atleast_2d(features)))
    scores = H @ model.beta
    return scores, np.argmax(scores, axis=1)


def predict(model: OselmModel, x: np.ndarray) -> Tuple[np.ndarray, EventClass]:
    scores, indices = predict_batch(model, np.asarray(x, dtype=float)[None, :])
    return scores[0], model.classes[int(indices[0])]


def fit(
    features: np.ndarray,
    labels: Sequence[EventClass],
    classes: List[EventClass],
    L: int,
    activation: ActivationKind,
    rng_seed: int,
    chunk_size: int = 50,
) -> OselmModel:
    """Full OS-ELM schedule: init on the first max(L, chunk_size) rows, then chunk by chunk."""
    if chunk_size < 1:
        raise OselmError(f"chunk_size must be >= 1, got {chunk_size}")
    X = np.asarray(features, dtype=float)
    index = {cls: i for i, cls in enumerate(classes)}
    try:
        T = one_hot([index[label] for label in labels], len(classes))
    except KeyError as e:
        raise OselmError(f"label {e.args[0]} is not one of the model classes") from e

    n_init = max(L, chunk_size)
    if len(X) < n_init:
        raise InsufficientInitData(f"{len(X)} training rows, initialization needs {n_init}")

    model = init_phase(X[:n_init], T[:n_init], L, activation, rng_seed, classes=classes)
    for start in range(n_init, len(X), chunk_size):
        sequential_update(model, X[start : start + chunk_size], T[start : start + chunk_size])
    logger.debug(f"Trained L={L} {activation.value} on {len(X)} rows in {model.chunks_seen + 1} chunk(s)")
    return model


def save_model(model: OselmModel, filepath: Path, include_P: bool = True):
    data = {
        "activation": model.hidden.activation.value,
        "L": model.L,
        "n_inputs": model.hidden.n_inputs,
        "n_classes": model.n_classes,
        "classes": [c.name for c in model.classes],
        "weights_a": model.hidden.weights_a.tolist(),
        "biases_b": model.hidden.biases_b.tolist(),
        "beta": model.beta.tolist(),
        "standardizer": {"mean": model.standardizer.mean.tolist(), "std": model.standardizer.std.tolist()},
        "seed": model.seed,
        "chunks_seen": model.chunks_seen,
        "ridge_lambda": model.ridge_lambda,
    }
    if include_P:
        data["P"] = model.P.tolist()
    save_json(data, filepath)
    logger.info(f"Saved model (L={model.L}, {model.hidden.activation.value}) to {filepath}")


def load_model(filepath: Path) -> OselmModel:
    data = load_json(Path(filepath))
    if data is None:
        raise OselmError(f"model file not found: {filepath}")
    hidden = HiddenLayer.frozen(data["weights_a"], data["biases_b"], ActivationKind.parse(data["activation"]))
    return OselmModel(
        hidden=hidden,
        beta=np.asarray(data["beta"], dtype=float),
        P=np.asarray(data["P"], dtype=float) if "P" in data else None,
        classes=[EventClass.parse(c) for c in data["classes"]],
        standardizer=Standardizer(
            mean=np.asarray(data["standardizer"]["mean"], dtype=float),
            std=np.asarray(data["standardizer"]["std"], dtype=float),
        ),
        chunks_seen=int(data.get("chunks_seen", 0)),
        seed=int(data.get("seed", 0)),
        ridge_lambda=float(data.get("ridge_lambda", 0.0)),
    )
