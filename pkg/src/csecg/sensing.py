"""Deterministic binary block diagonal (DBBD) sensing.

A DBBD operator with ``m`` rows over ``n`` samples has ``d = n // m``
consecutive ones per row, each row starting where the previous one ended.
Applying it is the same as a length-``d`` moving-sum filter evaluated at
stride ``d``, which is how :func:`compress_channel` computes it.  The
explicit matrix from :func:`build_dbbd_matrix` exists for checking.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._backend import kernels
from .errors import DimensionError, IncompatibleRatioError


@dataclass(frozen=True)
class SensingConfig:
    n: int
    m: int
    normalize: bool = True

    def __post_init__(self):
        if self.m < 1 or self.n < self.m or self.n % self.m:
            raise IncompatibleRatioError(f"need m >= 1, n >= m and m | n (got n={self.n}, m={self.m})")

    @property
    def d(self) -> int:
        return self.n // self.m

    @property
    def cr(self) -> float:
        return 1.0 - self.m / self.n

    @property
    def cr_fraction(self) -> Fraction:
        return 1 - Fraction(self.m, self.n)


@dataclass(frozen=True)
class CompressedSignal:
    data: np.ndarray
    config: SensingConfig
    effective_rate: float | None = None
    channel_id: int = 0


@dataclass(frozen=True)
class MultiChannelCompressed:
    channels: tuple[CompressedSignal, ...]

    @property
    def t(self) -> int:
        return len(self.channels)

    @property
    def config(self) -> SensingConfig:
        return self.channels[0].config

    def as_matrix(self) -> np.ndarray:
        """Measurements as an ``m x t`` array, one column per channel."""
        return np.column_stack([c.data for c in self.channels])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"ch{c.channel_id}" for c in self.channels])
        for row in self.as_matrix():
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "config": {**asdict(self.config), "d": self.config.d, "cr": self.config.cr},
            "effective_rate": self.channels[0].effective_rate,
            "channels": {str(c.channel_id): c.data.tolist() for c in self.channels},
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MultiChannelCompressed":
        doc = json.loads(text)
        c = doc["config"]
        cfg = SensingConfig(c["n"], c["m"], c["normalize"])
        chans = tuple(
            CompressedSignal(np.asarray(v), cfg, doc["effective_rate"], int(k))
            for k, v in sorted(doc["channels"].items(), key=lambda kv: int(kv[0]))
        )
        return cls(chans)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6f}"


def config_from_cr(n: int, cr: float | Fraction, normalize: bool = True) -> SensingConfig:
    """Sensing configuration for compression ratio ``cr = 1 - m/n``.

    >>> config_from_cr(256, 0.875).d
    8
    """
    keep = 1 - Fraction(str(cr)) if isinstance(cr, float) else 1 - Fraction(cr)
    if not 0 < keep <= 1:
        raise IncompatibleRatioError(f"compression ratio must be in [0, 1), got {cr}")
    m = n * keep
    if m.denominator != 1 or m < 1 or n % int(m):
        raise IncompatibleRatioError(f"cr={cr} does not give an integer decimation of n={n}")
    return SensingConfig(n, int(m), normalize)


def build_dbbd_matrix(config: SensingConfig) -> np.ndarray:
    d = config.d
    rows = np.arange(config.m)[:, None]
    cols = np.arange(config.n)[None, :]
    return ((cols >= rows * d) & (cols < (rows + 1) * d)).astype(np.int64)


def compress_channel(
    x, config: SensingConfig, sampling_rate: float | None = None, channel_id: int = 0
) -> CompressedSignal:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != config.n:
        raise DimensionError(f"expected a 1-D signal of length {config.n}, got shape {x.shape}")
    if np.issubdtype(x.dtype, np.integer) and not config.normalize:
        y = kernels.block_sum(x.astype(np.int64), config.d)
    else:
        y = kernels.block_sum(x.astype(np.float64), config.d)
        if config.normalize:
            y = y / config.d
    rate = None if sampling_rate is None else sampling_rate * config.m / config.n
    return CompressedSignal(y, config, rate, channel_id)


def compress_multichannel(
    channels: Sequence, config: SensingConfig, sampling_rate: float | None = None
) -> MultiChannelCompressed:
    """Compress each channel with the same operator.

    ``channels`` is a sequence of 1-D signals (or an ``n x t`` array's
    columns passed as a list).
    """
    lengths = {len(c) for c in channels}
    if len(lengths) > 1:
        raise DimensionError(f"ragged channel lengths: {sorted(lengths)}")
    return MultiChannelCompressed(
        tuple(compress_channel(c, config, sampling_rate, k) for k, c in enumerate(channels))
    )
