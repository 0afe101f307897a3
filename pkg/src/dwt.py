"""Daubechies-4 multiresolution analysis (11-level filter bank) built on PyWavelets."""

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Union

import numpy as np
import pywt

from siggen import Signal

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = 11
BOUNDARY_MODE = "symmetric"


class WaveletError(ValueError):
    pass


class TooManyLevels(WaveletError):
    pass


class MalformedDecomposition(WaveletError):
    pass


@dataclass(frozen=True)
class FilterPair:
    lowpass_h: np.ndarray
    highpass_g: np.ndarray

    @property
    def length(self) -> int:
        return len(self.lowpass_h)

    def to_pywt(self) -> pywt.Wavelet:
        """Orthogonal bank: synthesis filters are the time reverses of the analysis filters"""
        dec_lo, dec_hi = list(self.lowpass_h), list(self.highpass_g)
        return pywt.Wavelet("db4_qmf", filter_bank=(dec_lo, dec_hi, dec_lo[::-1], dec_hi[::-1]))


@dataclass
class WaveletDecomposition:
    details: List[np.ndarray]  # CD1 (finest) .. CDn
    approx: np.ndarray  # CAn
    original_length: int
    boundary_mode: str = BOUNDARY_MODE

    @property
    def levels(self) -> int:
        return len(self.details)

    def to_dict(self) -> Dict:
        """JSON-friendly dump {"D1": [...], ..., "An": [...]}"""
        dump = {f"D{i}": d.tolist() for i, d in enumerate(self.details, start=1)}
        dump[f"A{self.levels}"] = self.approx.tolist()
        dump["original_length"] = self.original_length
        return dump


@lru_cache(maxsize=1)
def db4_filters() -> FilterPair:
    """8-tap db4 analysis filters: published lowpass taps, highpass g_k = (-1)^k h_{N-1-k}."""
    h = np.asarray(pywt.Wavelet("db4").dec_lo, dtype=float)
    n = len(h)
    g = np.array([(-1) ** k * h[n - 1 - k] for k in range(n)])
    h.setflags(write=False)
    g.setflags(write=False)
    return FilterPair(lowpass_h=h, highpass_g=g)


@lru_cache(maxsize=1)
def _db4_wavelet() -> pywt.Wavelet:
    return db4_filters().to_pywt()


def coefficient_lengths(original_length: int, levels: int, filter_length: int = 8) -> List[int]:
    """Per-level coefficient counts under symmetric extension: floor((len + filter_length - 1) / 2)"""
    lengths = []
    current = original_length
    for _ in range(levels):
        current = pywt.dwt_coeff_len(current, filter_length, BOUNDARY_MODE)
        lengths.append(current)
    return lengths


def _as_samples(signal: Union[Signal, np.ndarray]) -> np.ndarray:
    samples = signal.samples if isinstance(signal, Signal) else signal
    return np.asarray(samples, dtype=float)


def decompose(signal: Union[Signal, np.ndarray], levels: int = DEFAULT_LEVELS) -> WaveletDecomposition:
    y = _as_samples(signal)
    filters = db4_filters()
    if levels < 1:
        raise TooManyLevels(f"levels must be >= 1, got {levels}")
    if y.ndim != 1 or len(y) < filters.length:
        raise TooManyLevels(f"signal of length {len(y)} is shorter than the {filters.length}-tap filter")

    # every approximation handed down (including the last) must still span the filter
    for level, length in enumerate(coefficient_lengths(len(y), levels, filters.length), start=1):
        if length < filters.length:
            raise TooManyLevels(
                f"level {level} leaves {length} coefficients, fewer than the {filters.length} filter taps"
            )

    # pywt warns once levels exceed its boundary-free maximum; deep levels are intended here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec(y, _db4_wavelet(), mode=BOUNDARY_MODE, level=levels)

    return WaveletDecomposition(
        details=[np.asarray(d) for d in coeffs[:0:-1]],
        approx=np.asarray(coeffs[0]),
        original_length=len(y),
    )


def _check_lengths(decomp: WaveletDecomposition):
    if decomp.levels < 1:
        raise MalformedDecomposition("decomposition has no detail levels")
    expected = coefficient_lengths(decomp.original_length, decomp.levels)
    actual = [len(d) for d in decomp.details]
    if actual != expected or len(decomp.approx) != expected[-1]:
        raise MalformedDecomposition(
            f"coefficient lengths {actual} + approx {len(decomp.approx)} do not match "
            f"{expected} for original length {decomp.original_length}"
        )


def reconstruct(decomp: WaveletDecomposition) -> np.ndarray:
    """Inverse MRA cropped to the original length"""
    _check_lengths(decomp)
    coeffs = [decomp.approx] + decomp.details[::-1]
    y = pywt.waverec(coeffs, _db4_wavelet(), mode=decomp.boundary_mode)
    return y[: decomp.original_length]


def band_edges(level: int, sampling_rate_hz: float) -> tuple:
    """Nominal (low, high) frequency band of detail level i: f_s/2^(i+1) .. f_s/2^i"""
    return sampling_rate_hz / 2 ** (level + 1), sampling_rate_hz / 2**level


def band_energies(decomp: WaveletDecomposition) -> np.ndarray:
    """Sum of squared detail coefficients per level (index 0 = CD1)"""
    return np.array([float(np.sum(d**2)) for d in decomp.details])
