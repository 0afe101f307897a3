"""Seeded synthetic power-quality disturbance waveforms (16 event classes plus normal)."""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, asdict
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import get_threads
from utils.file_utils import save_csv, save_json, load_json, get_params_file_path

logger = logging.getLogger(__name__)


class SignalGenerationError(ValueError):
    pass


class ParamOutOfRange(SignalGenerationError):
    pass


class UnknownPreset(SignalGenerationError):
    pass


class UnknownClass(SignalGenerationError):
    pass


class EventClass(Enum):
    S0 = "Normal"
    S1 = "Sag"
    S2 = "Swell"
    S3 = "Momentary interruption"
    S4 = "Oscillatory transient"
    S5 = "Harmonics"
    S6 = "Notch"
    S7 = "Spike"
    S8 = "Flicker"
    S9 = "Sag with swell"
    S10 = "Sag with interruption"
    S11 = "Swell with interruption"
    S12 = "Sag with transient"
    S13 = "Swell with transient"
    S14 = "Sag with harmonics"
    S15 = "Swell with harmonics"
    S16 = "Harmonics with transient"

    @property
    def index(self) -> int:
        return int(self.name[1:])

    @property
    def is_mixed(self) -> bool:
        return self.index >= 9

    @classmethod
    def parse(cls, name: str) -> "EventClass":
        key = name.strip().upper()
        if key not in cls.__members__:
            raise UnknownClass(f"unknown class: {name}")
        return cls[key]

    @classmethod
    def first(cls, n: int) -> List["EventClass"]:
        """S1..Sn, the class sets the presets evaluate"""
        return [cls[f"S{i}"] for i in range(1, n + 1)]


@dataclass(frozen=True)
class SignalSpec:
    sampling_rate_hz: float = 12800.0
    n_samples: int = 2560
    fundamental_hz: float = 50.0
    amplitude_B: float = 1.0

    @property
    def period(self) -> float:
        return 1.0 / self.fundamental_hz

    @property
    def omega0(self) -> float:
        return 2.0 * np.pi * self.fundamental_hz

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate_hz

    def time_axis(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sampling_rate_hz


@dataclass(frozen=True)
class EventParams:
    """Per-class parameter record; fields a class does not use stay None."""

    alpha: Optional[float] = None
    alpha_1: Optional[float] = None  # sag depth in mixed events
    alpha_2: Optional[float] = None  # swell height in mixed events
    alpha_3: Optional[float] = None  # interruption depth in mixed events
    alpha_0: Optional[float] = None  # transient amplitude
    t_a: Optional[float] = None
    t_b: Optional[float] = None
    t_c: Optional[float] = None
    t_d: Optional[float] = None
    f_n: Optional[float] = None
    tau_osc: Optional[float] = None  # milliseconds
    harmonic_1: Optional[float] = None
    harmonic_3: Optional[float] = None
    harmonic_5: Optional[float] = None
    harmonic_7: Optional[float] = None
    harmonic_9: Optional[float] = None
    flicker_hz: Optional[float] = None
    depth_z: Optional[float] = None
    repeat_m: Optional[int] = None

    def to_dict(self) -> Dict[str, float]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: Dict) -> "EventParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParamOutOfRange(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**data)


@dataclass
class Signal:
    samples: np.ndarray
    spec: SignalSpec
    label: EventClass
    params: EventParams
    seed: int = 0


# Parameter intervals per class. Windows are in cycles of the fundamental.
SAG_DEPTH = (0.16, 0.95)
SWELL_HEIGHT = (0.05, 0.8)
INTERRUPTION_DEPTH = (0.87, 1.0)
HARMONIC_AMPLITUDE = (0.0, 0.3)
HARMONIC_ORDERS = (3, 5, 7, 9)
TRANSIENT_FREQ_HZ = (10.0, 100.0)
TRANSIENT_TAU_MS = (25.0, 100.0)
TRANSIENT_AMPLITUDE = 5.0
FLICKER_DEPTH = (0.1, 0.2)
FLICKER_FREQ_HZ = (2.0, 20.0)
PULSE_DEPTH = (0.1, 0.4)
PULSE_REPEAT = (2, 9)
PULSE_WIDTH = (0.01, 0.05)
PULSE_SPAN = 0.05
PULSE_SPACING_S = 0.002
EVENT_WINDOW = (2.0, 8.0)
SECOND_WINDOW = (4.0, 9.0)
TRANSIENT_WINDOW = (0.15, 10.0)

# Same-value tolerance on window widths recovered from t_b - t_a
WIDTH_TOL = 1e-12


@dataclass(frozen=True)
class _ClassRule:
    scalars: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    windows: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    # (parameter, +1 swell / -1 sag, window) factors multiplying the fundamental
    envelope: Tuple[Tuple[str, int, str], ...] = ()
    fundamental: bool = True
    flicker: bool = False
    harmonics: bool = False
    transient: bool = False
    pulse_sign: int = 0


_RULES: Dict[EventClass, _ClassRule] = {
    EventClass.S0: _ClassRule(),
    EventClass.S1: _ClassRule(
        scalars={"alpha": SAG_DEPTH}, windows={"ab": EVENT_WINDOW}, envelope=(("alpha", -1, "ab"),)
    ),
    EventClass.S2: _ClassRule(
        scalars={"alpha": SWELL_HEIGHT}, windows={"ab": EVENT_WINDOW}, envelope=(("alpha", 1, "ab"),)
    ),
    EventClass.S3: _ClassRule(
        scalars={"alpha": INTERRUPTION_DEPTH}, windows={"ab": EVENT_WINDOW}, envelope=(("alpha", -1, "ab"),)
    ),
    EventClass.S4: _ClassRule(windows={"ab": TRANSIENT_WINDOW}, transient=True),
    EventClass.S5: _ClassRule(fundamental=False, harmonics=True),
    EventClass.S6: _ClassRule(scalars={"depth_z": PULSE_DEPTH}, pulse_sign=-1),
    EventClass.S7: _ClassRule(scalars={"depth_z": PULSE_DEPTH}, pulse_sign=1),
    EventClass.S8: _ClassRule(scalars={"alpha": FLICKER_DEPTH, "flicker_hz": FLICKER_FREQ_HZ}, flicker=True),
    EventClass.S9: _ClassRule(
        scalars={"alpha_1": SAG_DEPTH, "alpha_2": SWELL_HEIGHT},
        windows={"ab": EVENT_WINDOW, "cd": SECOND_WINDOW},
        envelope=(("alpha_1", -1, "ab"), ("alpha_2", 1, "cd")),
    ),
    EventClass.S10: _ClassRule(
        scalars={"alpha_1": SAG_DEPTH, "alpha_3": INTERRUPTION_DEPTH},
        windows={"ab": EVENT_WINDOW, "cd": SECOND_WINDOW},
        envelope=(("alpha_1", -1, "ab"), ("alpha_3", -1, "cd")),
    ),
    EventClass.S11: _ClassRule(
        scalars={"alpha_2": SWELL_HEIGHT, "alpha_3": INTERRUPTION_DEPTH},
        windows={"ab": EVENT_WINDOW, "cd": SECOND_WINDOW},
        envelope=(("alpha_2", 1, "ab"), ("alpha_3", -1, "cd")),
    ),
    EventClass.S12: _ClassRule(
        scalars={"alpha": SAG_DEPTH}, windows={"ab": EVENT_WINDOW}, envelope=(("alpha", -1, "ab"),), transient=True
    ),
    EventClass.S13: _ClassRule(
        scalars={"alpha": SWELL_HEIGHT}, windows={"ab": EVENT_WINDOW}, envelope=(("alpha", 1, "ab"),), transient=True
    ),
    EventClass.S14: _ClassRule(
        scalars={"alpha": SAG_DEPTH}, windows={"ab": EVENT_WINDOW}, envelope=(("alpha", -1, "ab"),), harmonics=True
    ),
    EventClass.S15: _ClassRule(
        scalars={"alpha": SWELL_HEIGHT}, windows={"ab": EVENT_WINDOW}, envelope=(("alpha", 1, "ab"),), harmonics=True
    ),
    EventClass.S16: _ClassRule(windows={"ab": TRANSIENT_WINDOW}, fundamental=False, harmonics=True, transient=True),
}

_WINDOW_FIELDS = {"ab": ("t_a", "t_b"), "cd": ("t_c", "t_d")}


def derive_seed(master_seed: int, *parts) -> int:
    """Stable non-negative 63-bit seed from a master seed and any labels (split, class, index...)"""
    key = ":".join(str(p) for p in (master_seed, *parts))
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def _open_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    """Uniform draw from the open interval (lo, hi)"""
    while True:
        value = float(rng.uniform(lo, hi))
        if value > lo:
            return value


def sample_params(event_class: EventClass, rng_seed: int, spec: SignalSpec = SignalSpec()) -> EventParams:
    """Draw every model parameter of a class uniformly from its open interval."""
    rule = _RULES[event_class]
    rng = np.random.default_rng(rng_seed)
    T = spec.period
    values = {}

    for name, (lo, hi) in rule.scalars.items():
        values[name] = _open_uniform(rng, lo, hi)

    if rule.transient:
        values["f_n"] = _open_uniform(rng, *TRANSIENT_FREQ_HZ)
        values["tau_osc"] = _open_uniform(rng, *TRANSIENT_TAU_MS)
        values["alpha_0"] = TRANSIENT_AMPLITUDE

    if rule.harmonics:
        values["harmonic_1"] = 1.0
        for order in HARMONIC_ORDERS:
            values[f"harmonic_{order}"] = _open_uniform(rng, *HARMONIC_AMPLITUDE)

    for pair, (lo, hi) in rule.windows.items():
        start_name, end_name = _WINDOW_FIELDS[pair]
        width = _open_uniform(rng, lo * T, hi * T)
        start = _open_uniform(rng, 0.0, spec.duration - width)
        values[start_name] = start
        values[end_name] = start + width

    if rule.pulse_sign:
        width = _open_uniform(rng, PULSE_WIDTH[0] * T, PULSE_WIDTH[1] * T)
        start = _open_uniform(rng, 0.0, PULSE_SPAN * T - width)
        values["t_a"] = start
        values["t_b"] = start + width
        values["repeat_m"] = int(rng.integers(PULSE_REPEAT[0], PULSE_REPEAT[1] + 1))

    return EventParams(**values)


def _required_fields(rule: _ClassRule) -> List[str]:
    names = list(rule.scalars)
    if rule.transient:
        names += ["f_n", "tau_osc", "alpha_0"]
    if rule.harmonics:
        names += ["harmonic_1"] + [f"harmonic_{order}" for order in HARMONIC_ORDERS]
    for pair in rule.windows:
        names += list(_WINDOW_FIELDS[pair])
    if rule.pulse_sign:
        names += ["t_a", "t_b", "repeat_m"]
    return names


def _check_range(event_class: EventClass, name: str, value: float, lo: float, hi: float):
    if not lo - WIDTH_TOL <= value <= hi + WIDTH_TOL:
        raise ParamOutOfRange(f"{event_class.name}: {name}={value} outside [{lo}, {hi}]")


def validate_params(event_class: EventClass, params: EventParams, spec: SignalSpec = SignalSpec()):
    """Raise ParamOutOfRange unless params lie in the (closed) intervals for the class."""
    rule = _RULES[event_class]
    T = spec.period

    for name in _required_fields(rule):
        value = getattr(params, name)
        if value is None:
            raise ParamOutOfRange(f"{event_class.name}: missing parameter {name}")
        if not np.isfinite(value):
            raise ParamOutOfRange(f"{event_class.name}: {name} is not finite")

    for name, (lo, hi) in rule.scalars.items():
        _check_range(event_class, name, getattr(params, name), lo, hi)

    if rule.transient:
        _check_range(event_class, "f_n", params.f_n, *TRANSIENT_FREQ_HZ)
        _check_range(event_class, "tau_osc", params.tau_osc, *TRANSIENT_TAU_MS)
        if params.alpha_0 != TRANSIENT_AMPLITUDE:
            raise ParamOutOfRange(f"{event_class.name}: alpha_0 must be {TRANSIENT_AMPLITUDE}")

    if rule.harmonics:
        if params.harmonic_1 != 1.0:
            raise ParamOutOfRange(f"{event_class.name}: harmonic_1 must be 1")
        for order in HARMONIC_ORDERS:
            _check_range(event_class, f"harmonic_{order}", getattr(params, f"harmonic_{order}"), *HARMONIC_AMPLITUDE)

    for pair, (lo, hi) in rule.windows.items():
        start_name, end_name = _WINDOW_FIELDS[pair]
        start, end = getattr(params, start_name), getattr(params, end_name)
        if not 0.0 <= start < end <= spec.duration:
            raise ParamOutOfRange(
                f"{event_class.name}: window [{start_name}, {end_name}] = [{start}, {end}] not inside [0, {spec.duration}]"
            )
        _check_range(event_class, f"{end_name}-{start_name}", end - start, lo * T, hi * T)

    if rule.pulse_sign:
        if not 0.0 <= params.t_a < params.t_b <= PULSE_SPAN * T:
            raise ParamOutOfRange(f"{event_class.name}: pulse window must lie in [0, {PULSE_SPAN}T]")
        _check_range(event_class, "t_b-t_a", params.t_b - params.t_a, PULSE_WIDTH[0] * T, PULSE_WIDTH[1] * T)
        if int(params.repeat_m) != params.repeat_m:
            raise ParamOutOfRange(f"{event_class.name}: repeat_m must be an integer")
        _check_range(event_class, "repeat_m", params.repeat_m, *PULSE_REPEAT)


def unit_step(x: np.ndarray) -> np.ndarray:
    """u(x) with u(0) = 1"""
    return np.heaviside(x, 1.0)


def _window(t: np.ndarray, start: float, end: float) -> np.ndarray:
    return unit_step(t - start) - unit_step(t - end)


def _pulse_train(t: np.ndarray, params: EventParams) -> np.ndarray:
    """m rectangular pulses, one every 0.002*m seconds from t_a"""
    period = PULSE_SPACING_S * params.repeat_m
    train = np.zeros_like(t)
    for j in range(params.repeat_m):
        train += _window(t, params.t_a + j * period, params.t_b + j * period)
    return train


def _waveform(event_class: EventClass, p: EventParams, spec: SignalSpec) -> np.ndarray:
    rule = _RULES[event_class]
    t = spec.time_axis()
    B, w0 = spec.amplitude_B, spec.omega0
    fundamental = B * np.sin(w0 * t)
    windows = {
        pair: _window(t, getattr(p, start), getattr(p, end))
        for pair, (start, end) in _WINDOW_FIELDS.items()
        if pair in rule.windows
    }

    y = np.zeros_like(t)
    if rule.fundamental:
        envelope = np.ones_like(t)
        for name, sign, pair in rule.envelope:
            envelope = envelope * (1.0 + sign * getattr(p, name) * windows[pair])
        if rule.flicker:
            envelope = envelope * (1.0 + p.alpha * np.sin(2.0 * np.pi * p.flicker_hz * t))
        y = y + envelope * fundamental

    if rule.harmonics:
        y = y + B * sum(getattr(p, f"harmonic_{order}") * np.sin(order * w0 * t) for order in (1,) + HARMONIC_ORDERS)

    if rule.transient:
        decay = np.exp(-np.clip(t - p.t_a, 0.0, None) / (p.tau_osc * 1e-3))
        y = y + p.alpha_0 * decay * windows["ab"] * np.sin(2.0 * np.pi * p.f_n * t)

    if rule.pulse_sign:
        pulses = _pulse_train(t, p)
        y = y + rule.pulse_sign * p.depth_z * B * np.sign(fundamental) * pulses

    return y


def generate(
    event_class: EventClass, params: EventParams, spec: SignalSpec = SignalSpec(), seed: int = 0
) -> Signal:
    """Evaluate the waveform model of a class at t = k / sampling_rate_hz."""
    validate_params(event_class, params, spec)
    samples = _waveform(event_class, params, spec)
    return Signal(samples=samples, spec=spec, label=event_class, params=params, seed=seed)


def simulate(event_class: EventClass, seed: int, spec: SignalSpec = SignalSpec()) -> Signal:
    """Sample parameters from the seed, then generate"""
    return generate(event_class, sample_params(event_class, seed, spec), spec, seed)


# name -> (number of classes S1..Sn, training total, testing total)
PRESETS: Dict[str, Tuple[int, int, int]] = {
    "11class": (11, 3254, 815),
    "13class": (13, 3510, 879),
    "16class": (16, 4353, 1090),
}


def allocate_counts(total: int, classes: List[EventClass]) -> Dict[EventClass, int]:
    """Split a total as evenly as possible; the remainder goes to the lowest class indices."""
    base, remainder = divmod(total, len(classes))
    ordered = sorted(classes, key=lambda c: c.index)
    return {cls: base + (1 if i < remainder else 0) for i, cls in enumerate(ordered)}


@dataclass
class DatasetSpec:
    train_counts: Dict[EventClass, int]
    test_counts: Dict[EventClass, int] = field(default_factory=dict)
    master_seed: int = 0
    preset: Optional[str] = None
    signal: SignalSpec = SignalSpec()

    @property
    def classes(self) -> List[EventClass]:
        return sorted(set(self.train_counts) | set(self.test_counts), key=lambda c: c.index)

    @classmethod
    def from_preset(cls, name: str, master_seed: int = 0, scale: float = 1.0) -> "DatasetSpec":
        if name not in PRESETS:
            raise UnknownPreset(f"unknown preset: {name} (expected one of {', '.join(PRESETS)})")
        n_classes, n_train, n_test = PRESETS[name]
        classes = EventClass.first(n_classes)
        return cls(
            train_counts=allocate_counts(max(len(classes), round(n_train * scale)), classes),
            test_counts=allocate_counts(max(len(classes), round(n_test * scale)), classes),
            master_seed=master_seed,
            preset=name,
        )

    @classmethod
    def from_dict(cls, data: Dict) -> "DatasetSpec":
        """Build from an experiment JSON object: either a preset or explicit per-class counts."""
        master_seed = int(data.get("master_seed", 0))
        if data.get("preset"):
            return cls.from_preset(data["preset"], master_seed, float(data.get("scale", 1.0)))
        train = {EventClass.parse(k): int(v) for k, v in data.get("train_counts", {}).items()}
        test = {EventClass.parse(k): int(v) for k, v in data.get("test_counts", {}).items()}
        if not train:
            raise SignalGenerationError("dataset spec needs a preset or train_counts")
        return cls(train_counts=train, test_counts=test, master_seed=master_seed)

    @classmethod
    def from_json(cls, path: Path) -> "DatasetSpec":
        data = load_json(Path(path))
        if data is None:
            raise SignalGenerationError(f"experiment file not found: {path}")
        return cls.from_dict(data)


@dataclass
class LabeledDataset:
    train: List[Signal]
    test: List[Signal] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train) + len(self.test)


def _generate_split(spec: DatasetSpec, split: str, counts: Dict[EventClass, int]) -> List[Signal]:
    jobs = [
        (cls, derive_seed(spec.master_seed, split, cls.name, i))
        for cls in sorted(counts, key=lambda c: c.index)
        for i in range(counts[cls])
    ]
    with ThreadPoolExecutor(max_workers=get_threads()) as pool:
        return list(pool.map(lambda job: simulate(job[0], job[1], spec.signal), jobs))


def generate_dataset(spec: DatasetSpec) -> LabeledDataset:
    """Generate every requested signal, each from its own seed derived from (master seed, split, class, index)."""
    for counts in (spec.train_counts, spec.test_counts):
        for cls, count in counts.items():
            if count < 0:
                raise SignalGenerationError(f"negative count for {cls.name}: {count}")
    train = _generate_split(spec, "train", spec.train_counts)
    test = _generate_split(spec, "test", spec.test_counts)
    logger.info(
        f"Generated {len(train)} training + {len(test)} testing signals "
        f"over {len(spec.classes)} classes (master seed {spec.master_seed})"
    )
    return LabeledDataset(train=train, test=test)


def save_dataset(signals: List[Signal], filepath: Path):
    """One CSV row per signal (label, seed, samples) plus a params sidecar JSON keyed by seed"""
    filepath = Path(filepath)
    n_samples = signals[0].spec.n_samples if signals else 0
    frame = pd.DataFrame(
        np.vstack([s.samples for s in signals]) if signals else np.empty((0, n_samples)),
        columns=[f"s{k}" for k in range(n_samples)],
    )
    frame.insert(0, "seed", [s.seed for s in signals])
    frame.insert(0, "label", [s.label.name for s in signals])
    save_csv(frame, filepath)

    sidecar = {str(s.seed): {"label": s.label.name, "params": s.params.to_dict()} for s in signals}
    save_json(sidecar, get_params_file_path(filepath))
    logger.info(f"Saved {len(signals)} signals to {filepath}")


def load_dataset(filepath: Path, spec: SignalSpec = SignalSpec()) -> List[Signal]:
    filepath = Path(filepath)
    frame = pd.read_csv(filepath, dtype={"label": str, "seed": np.int64})
    sidecar = load_json(get_params_file_path(filepath)) or {}
    sample_cols = [c for c in frame.columns if c.startswith("s") and c[1:].isdigit()]
    samples = frame[sample_cols].to_numpy(dtype=float)

    signals = []
    for row, (label, seed) in enumerate(zip(frame["label"], frame["seed"])):
        params = sidecar.get(str(seed), {}).get("params", {})
        signals.append(
            Signal(
                samples=samples[row],
                spec=spec,
                label=EventClass.parse(label),
                params=EventParams.from_dict(params),
                seed=int(seed),
            )
        )
    logger.info(f"Loaded {len(signals)} signals from {filepath}")
    return signals
