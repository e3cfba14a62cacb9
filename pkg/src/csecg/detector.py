"""Pan-Tompkins R-peak detection at an arbitrary sampling rate.

Every stage is specified in physical units (Hz, seconds) and realised at
the rate of the signal being analysed, so the same detector runs on
360 Hz originals and on compressed measurements at 180, 90 or 45 Hz.

Stages: FIR bandpass -> five-point derivative -> squaring -> trailing
moving-window integration -> adaptive dual-threshold peak classification
with T-wave rejection and RR searchback -> refinement of each accepted
envelope peak to the largest absolute bandpassed sample nearby.

The bandpass and derivative are linear phase and are applied
delay-compensated; their combined group delay is reported in
:attr:`DetectionResult.total_delay`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, firwin

from ._backend import kernels
from .errors import DetectorConfigError, InsufficientDataError
from .sensing import SensingConfig

_DERIVATIVE_KERNEL = np.array([1.0, 2.0, 0.0, -2.0, -1.0]) / 8.0  # convolution order


@dataclass(frozen=True)
class DetectorConfig:
    sampling_rate: float
    bandpass_low: float = 5.0
    bandpass_high: float = 15.0
    bandpass_length: float = 0.4  # seconds of FIR taps
    integration_window: float = 0.150
    refractory: float = 0.200
    t_wave_window: float = 0.360
    learning_period: float = 2.0
    searchback: bool = True
    searchback_factor: float = 1.66
    signal_coef: float = 0.125
    noise_coef: float = 0.125
    threshold_fraction: float = 0.25
    searchback_coef: float = 0.25

    def __post_init__(self):
        nyq = self.sampling_rate / 2
        if not 0 < self.bandpass_low < self.bandpass_high < nyq:
            raise DetectorConfigError(
                f"need 0 < low < high < Nyquist, got {self.bandpass_low}, {self.bandpass_high}, {nyq}"
            )
        if self.window_samples < 1:
            raise DetectorConfigError("integration window shorter than one sample")

    @property
    def window_samples(self) -> int:
        return int(round(self.integration_window * self.sampling_rate))

    @property
    def num_taps(self) -> int:
        n = int(round(self.bandpass_length * self.sampling_rate))
        return n if n % 2 else n + 1

    def seconds(self, value: float) -> int:
        return int(round(value * self.sampling_rate))


@dataclass(frozen=True)
class DetectionResult:
    peak_indices: np.ndarray
    sampling_rate: float
    total_delay: int
    source: dict = field(default_factory=dict)

    def to_json(self, sensing: SensingConfig | None = None) -> str:
        doc = {
            "peak_indices": self.peak_indices.tolist(),
            "sampling_rate": self.sampling_rate,
            "total_delay": self.total_delay,
            "source": self.source,
        }
        if sensing is not None:
            doc["original_indices"] = map_to_original_timescale(self, sensing).tolist()
        return json.dumps(doc, sort_keys=True)


def bandpass_taps(config: DetectorConfig) -> np.ndarray:
    taps = firwin(
        config.num_taps,
        [config.bandpass_low, config.bandpass_high],
        pass_zero=False,
        fs=config.sampling_rate,
    )
    # windowing leaves a small DC gain; remove it so baseline offsets vanish exactly
    return taps - taps.mean()


def _aligned_fir(x, taps):
    half = (taps.size - 1) // 2
    if x.size <= half:
        raise InsufficientDataError(f"signal of {x.size} samples is shorter than the filter warm-up ({half + 1})")
    # odd reflection about the end points keeps offsets and ramps continuous
    padded = np.pad(x, half, mode="reflect", reflect_type="odd")
    return np.convolve(padded, taps, mode="valid")


def bandpass(signal, config: DetectorConfig) -> np.ndarray:
    """Delay-compensated linear-phase bandpass; group delay is ``(num_taps - 1) / 2``."""
    return _aligned_fir(np.asarray(signal, dtype=np.float64), bandpass_taps(config))


def derivative(signal, config: DetectorConfig) -> np.ndarray:
    """Five-point Pan-Tompkins derivative, scaled to units per second."""
    x = np.asarray(signal, dtype=np.float64)
    if x.size < _DERIVATIVE_KERNEL.size:
        raise InsufficientDataError("derivative needs at least 5 samples")
    return _aligned_fir(x, _DERIVATIVE_KERNEL) * config.sampling_rate


def square_and_integrate(signal, config: DetectorConfig) -> np.ndarray:
    """Trailing moving average of the squared input over the integration window.

    Samples before the start of the signal count as zero.
    """
    w = config.window_samples
    sq = np.square(np.asarray(signal, dtype=np.float64))
    return np.convolve(sq, np.full(w, 1.0 / w))[: sq.size]


def detect_r_peaks(signal, config: DetectorConfig, source: dict | None = None) -> DetectionResult:
    x = np.asarray(signal, dtype=np.float64)
    fs = config.sampling_rate
    learn = config.seconds(config.learning_period)
    if x.size < learn:
        raise InsufficientDataError(
            f"need at least {config.learning_period} s ({learn} samples) of signal, got {x.size}"
        )
    delay = (config.num_taps - 1) // 2 + (_DERIVATIVE_KERNEL.size - 1) // 2
    empty = DetectionResult(np.zeros(0, dtype=np.int64), fs, delay, dict(source or {}))

    bp = bandpass(x, config)
    der = derivative(bp, config)
    env = square_and_integrate(der, config)

    spki = env[:learn].max() / 3.0
    npki = env[:learn].mean() / 2.0
    if not spki > 0:
        return empty
    cand, _ = find_peaks(env)
    if cand.size == 0:
        return empty

    w = config.window_samples
    refractory = config.seconds(config.refractory)
    accepted = kernels.pick_qrs(
        np.ascontiguousarray(env),
        np.ascontiguousarray(np.abs(der)),
        cand.astype(np.int64),
        refractory,
        config.seconds(config.t_wave_window),
        w,
        float(spki),
        float(npki),
        config.signal_coef,
        config.noise_coef,
        config.threshold_fraction,
        bool(config.searchback),
        config.searchback_factor,
        config.searchback_coef,
    )
    peaks = _refine(accepted, np.abs(bp), w, refractory)
    return DetectionResult(peaks, fs, delay, dict(source or {}))


def _refine(env_peaks, magnitude, w, refractory):
    n = magnitude.size
    out: list[int] = []
    for p in env_peaks:
        lo, hi = max(0, p - w), min(n, p + w + 1)
        r = lo + int(np.argmax(magnitude[lo:hi]))
        # two envelope peaks can refine onto the same complex; keep the larger
        while out and r - out[-1] < refractory:
            if magnitude[r] > magnitude[out[-1]]:
                out.pop()
            else:
                r = -1
                break
        if r >= 0:
            out.append(r)
    return np.asarray(out, dtype=np.int64)


def map_to_original_timescale(result: DetectionResult, config: SensingConfig) -> np.ndarray:
    """Map compressed-domain indices to the centre of their block at the original rate."""
    d = config.d
    return np.asarray(result.peak_indices, dtype=np.int64) * d + d // 2
