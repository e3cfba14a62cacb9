"""Readers for MIT-BIH / WFDB records.

Three files make up a record: a text header (``.hea``), packed 12-bit
signal data in format 212 (``.dat``) and a binary beat annotation stream
in MIT format (``.atr``).  Parsing is strict; anything the readers do not
understand raises instead of being skipped.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels
from .errors import (
    AnnotationParseError,
    CalibrationError,
    DecodeError,
    HeaderParseError,
    SampleRangeError,
    UnsupportedFormatError,
)

#: WFDB beat annotation codes (NORMAL .. UNKNOWN, BBB, NAPC, PFUS).
DEFAULT_BEAT_CODES = frozenset(list(range(1, 14)) + [25, 34, 38])

_SKIP, _NUM, _SUB, _CHN, _AUX = 59, 60, 61, 62, 63
_MAX_CODE = 49


@dataclass(frozen=True)
class SignalSpec:
    file_name: str
    storage_format: int
    adc_gain: float
    adc_baseline: int
    adc_resolution: int
    adc_zero: int
    initial_value: int
    units: str = "mV"
    checksum: int | None = None
    description: str = ""


@dataclass(frozen=True)
class RecordHeader:
    record_name: str
    num_signals: int
    sampling_rate: float
    num_samples: int
    signals: tuple[SignalSpec, ...]


@dataclass(frozen=True)
class Annotation:
    sample_index: int
    type_code: int
    subtype: int = 0
    channel: int = 0
    num: int = 0
    aux: bytes | None = None


@dataclass(frozen=True)
class EcgRecord:
    header: RecordHeader
    channels: tuple[np.ndarray, ...]
    beat_annotations: tuple[Annotation, ...] = ()

    @property
    def sampling_rate(self) -> float:
        return self.header.sampling_rate

    @property
    def beat_samples(self) -> np.ndarray:
        return np.array([a.sample_index for a in self.beat_annotations], dtype=np.int64)

    def physical(self, channel: int) -> np.ndarray:
        """Channel ``channel`` (0-based) in physical units."""
        spec = self.header.signals[channel]
        return adc_to_physical(self.channels[channel], spec.adc_gain, spec.adc_baseline)

    def to_json(self) -> str:
        doc = {
            "header": dataclasses.asdict(self.header),
            "channels": [c.tolist() for c in self.channels],
            "beat_annotations": [
                [a.sample_index, a.type_code, a.subtype, a.channel, a.num] for a in self.beat_annotations
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "EcgRecord":
        doc = json.loads(text)
        h = doc["header"]
        header = RecordHeader(
            record_name=h["record_name"],
            num_signals=h["num_signals"],
            sampling_rate=h["sampling_rate"],
            num_samples=h["num_samples"],
            signals=tuple(SignalSpec(**s) for s in h["signals"]),
        )
        channels = tuple(np.asarray(c, dtype=np.int16) for c in doc["channels"])
        anns = tuple(Annotation(*row) for row in doc["beat_annotations"])
        return cls(header, channels, anns)


def _number(token, kind, line_number):
    try:
        return kind(token)
    except ValueError:
        raise HeaderParseError(f"invalid {kind.__name__} {token!r}", line_number) from None


def parse_header(text: bytes | str) -> RecordHeader:
    """Parse a single-segment WFDB header.

    Only format 212 signals are accepted.
    """
    if isinstance(text, bytes):
        text = text.decode("ascii", errors="replace")
    lines = [
        (i, ln.strip())
        for i, ln in enumerate(text.splitlines(), start=1)
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not lines:
        raise HeaderParseError("no record line found")

    lineno, record_line = lines[0]
    fields = record_line.split()
    if len(fields) < 2:
        raise HeaderParseError("record line needs at least a name and a signal count", lineno)
    name = fields[0]
    if "/" in name:
        raise HeaderParseError("multi-segment records are not supported", lineno)
    nsig = _number(fields[1], int, lineno)
    if nsig < 1:
        raise HeaderParseError("number of signals must be >= 1", lineno)
    if len(fields) < 4:
        raise HeaderParseError("record line must give sampling rate and sample count", lineno)
    fs_token = fields[2].split("/")[0].split("(")[0]
    fs = _number(fs_token, float, lineno)
    if not fs > 0:
        raise HeaderParseError("sampling rate must be > 0", lineno)
    nsamp = _number(fields[3], int, lineno)
    if nsamp <= 0:
        raise HeaderParseError("number of samples must be > 0", lineno)

    signal_lines = lines[1:1 + nsig]
    if len(signal_lines) < nsig:
        raise HeaderParseError(f"expected {nsig} signal lines, found {len(signal_lines)}", lineno)
    signals = tuple(_parse_signal_line(text, ln) for ln, text in signal_lines)
    return RecordHeader(name, nsig, fs, nsamp, signals)


def _parse_signal_line(text, lineno):
    parts = text.split(maxsplit=8)
    if len(parts) < 2:
        raise HeaderParseError("signal line needs a file name and a format", lineno)
    file_name = parts[0]
    fmt_token = parts[1]
    # strip samples-per-frame, skew and byte offset suffixes
    for sep in "x:+":
        fmt_token = fmt_token.split(sep)[0]
    fmt = _number(fmt_token, int, lineno)
    if fmt != 212:
        raise UnsupportedFormatError(f"storage format {fmt} is not supported (only 212)", lineno)

    gain, baseline, units = 200.0, None, "mV"
    if len(parts) > 2:
        g = parts[2]
        if "/" in g:
            g, units = g.split("/", 1)
        if "(" in g:
            g, b = g.split("(", 1)
            baseline = _number(b.rstrip(")"), int, lineno)
        gain = _number(g, float, lineno)
        if gain == 0:
            gain = 200.0  # WFDB: zero gain means uncalibrated, default 200
    resolution = _number(parts[3], int, lineno) if len(parts) > 3 else 12
    adc_zero = _number(parts[4], int, lineno) if len(parts) > 4 else 0
    init = _number(parts[5], int, lineno) if len(parts) > 5 else adc_zero
    checksum = _number(parts[6], int, lineno) if len(parts) > 6 else None
    description = parts[8] if len(parts) > 8 else ""
    return SignalSpec(
        file_name=file_name,
        storage_format=fmt,
        adc_gain=gain,
        adc_baseline=adc_zero if baseline is None else baseline,
        adc_resolution=resolution,
        adc_zero=adc_zero,
        initial_value=init,
        units=units,
        checksum=checksum,
        description=description,
    )


def decode_212(data: bytes, num_signals: int, num_samples: int) -> list[np.ndarray]:
    """Decode format-212 bytes into one int16 array per channel.

    Samples are interleaved frame by frame (channel 0, channel 1, ... for
    each time instant) and packed two per three bytes.
    """
    total = num_signals * num_samples
    expected = math.ceil(3 * total / 2)
    if len(data) < expected:
        raise DecodeError(expected, len(data))
    if total == 0:
        return [np.zeros(0, dtype=np.int16) for _ in range(num_signals)]
    buf = np.frombuffer(data, dtype=np.uint8, count=min(len(data), 3 * ((total + 1) // 2)))
    flat = kernels.decode_212(buf, total)
    frames = flat.reshape(num_samples, num_signals)
    return [np.ascontiguousarray(frames[:, k]) for k in range(num_signals)]


def encode_212(channels: Sequence[Sequence[int]]) -> bytes:
    """Pack channels into format-212 bytes; the inverse of :func:`decode_212`."""
    arrs = [np.asarray(c, dtype=np.int64) for c in channels]
    if not arrs:
        return b""
    if len({a.size for a in arrs}) != 1:
        raise SampleRangeError("all channels must have the same length")
    flat = np.stack(arrs, axis=1).reshape(-1)
    if flat.size and (flat.min() < -2048 or flat.max() > 2047):
        raise SampleRangeError("samples must lie in [-2048, 2047] for format 212")
    if flat.size % 2:
        flat = np.append(flat, 0)
    u = (flat & 0xFFF).reshape(-1, 2)
    out = np.empty((u.shape[0], 3), dtype=np.uint8)
    out[:, 0] = u[:, 0] & 0xFF
    out[:, 1] = ((u[:, 0] >> 8) & 0x0F) | ((u[:, 1] >> 4) & 0xF0)
    out[:, 2] = u[:, 1] & 0xFF
    return out.tobytes()


def read_annotations(data: bytes) -> list[Annotation]:
    """Parse an MIT-format annotation stream.

    Each 16-bit little-endian word holds a 6-bit code and a 10-bit time
    increment.  SKIP words precede the annotation they delay; SUB, CHN,
    NUM and AUX words modify the annotation before them.  As in the WFDB
    library, ``chan`` and ``num`` persist from one annotation to the next.
    """
    anns: list[dict] = []
    n = len(data)
    pos = 0
    time = 0
    chan = 0
    num = 0
    while True:
        if pos + 2 > n:
            raise AnnotationParseError(f"missing terminator (stream ended at byte {pos})")
        word = data[pos] | (data[pos + 1] << 8)
        pos += 2
        code = word >> 10
        value = word & 0x3FF
        if code == 0 and value == 0:
            break
        if code == _SKIP:
            if pos + 4 > n:
                raise AnnotationParseError(f"truncated SKIP interval at byte {pos}")
            hi = data[pos] | (data[pos + 1] << 8)
            lo = data[pos + 2] | (data[pos + 3] << 8)
            pos += 4
            interval = (hi << 16) | lo
            if interval >= 1 << 31:
                interval -= 1 << 32
            time += interval
        elif code in (_NUM, _SUB, _CHN, _AUX):
            if not anns:
                raise AnnotationParseError(f"modifier code {code} before any annotation at byte {pos - 2}")
            cur = anns[-1]
            if code == _NUM:
                num = value - 1024 if value >= 512 else value
                cur["num"] = num
            elif code == _SUB:
                cur["subtype"] = value
            elif code == _CHN:
                chan = value
                cur["channel"] = chan
            else:
                end = pos + value
                if end > n:
                    raise AnnotationParseError(
                        f"truncated AUX payload: need {value} bytes at byte {pos}, have {n - pos}"
                    )
                cur["aux"] = bytes(data[pos:end])
                pos = end + (value & 1)
        elif code <= _MAX_CODE:
            time += value
            anns.append({"sample_index": time, "type_code": code, "subtype": 0,
                         "channel": chan, "num": num, "aux": None})
        else:
            raise AnnotationParseError(f"unknown annotation code {code} at byte {pos - 2}")
    out = [Annotation(**a) for a in anns]
    out.sort(key=lambda a: a.sample_index)
    return out


def load_record(
    header_bytes: bytes | str,
    signal_bytes: bytes,
    annotation_bytes: bytes | None = None,
    beat_code_set: Iterable[int] = DEFAULT_BEAT_CODES,
    limit: int | None = None,
) -> EcgRecord:
    header = parse_header(header_bytes)
    nsamp = header.num_samples
    if limit is not None:
        if limit < 0 or limit > nsamp:
            raise ValueError(f"limit must be in [0, {nsamp}], got {limit}")
        nsamp = limit
    channels = decode_212(signal_bytes, header.num_signals, nsamp)
    beats: tuple[Annotation, ...] = ()
    if annotation_bytes is not None:
        codes = frozenset(beat_code_set)
        beats = tuple(
            a for a in read_annotations(annotation_bytes) if a.type_code in codes and a.sample_index < nsamp
        )
    header = dataclasses.replace(header, num_samples=nsamp)
    return EcgRecord(header, tuple(channels), beats)


def read_record(
    directory: str | Path,
    record_name: str,
    beat_code_set: Iterable[int] = DEFAULT_BEAT_CODES,
    limit: int | None = None,
    annotator: str = "atr",
) -> EcgRecord:
    """Load ``<record_name>.hea``/``.dat``/``.<annotator>`` from ``directory``."""
    directory = Path(directory)
    header_bytes = (directory / f"{record_name}.hea").read_bytes()
    header = parse_header(header_bytes)
    files = {s.file_name for s in header.signals}
    if len(files) != 1:
        raise HeaderParseError("signals spread over several data files are not supported")
    signal_bytes = (directory / files.pop()).read_bytes()
    ann_path = directory / f"{record_name}.{annotator}"
    annotation_bytes = ann_path.read_bytes() if ann_path.exists() else None
    return load_record(header_bytes, signal_bytes, annotation_bytes, beat_code_set, limit)


def adc_to_physical(samples, gain: float, baseline: float) -> np.ndarray:
    if gain == 0:
        raise CalibrationError("ADC gain must be non-zero")
    return (np.asarray(samples, dtype=np.float64) - baseline) / gain
