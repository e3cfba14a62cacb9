"""End-to-end experiments: load -> compress -> similarity -> detect -> evaluate.

Work is split into tasks keyed by ``(record, channel, cr)``; ``cr == 0`` is
the uncompressed baseline.  Tasks run on a thread pool but every report is
sorted before it is written, so output files do not depend on scheduling.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from ._backend import BACKEND
from .detector import DetectorConfig, detect_r_peaks, map_to_original_timescale
from .errors import ConfigError, CsecgError, IncompatibleRatioError
from .evaluation import (
    METRICS,
    aggregate,
    aggregates_to_csv,
    compute_metrics,
    match_peaks,
    metrics_to_csv,
)
from .ingest import (
    DEFAULT_BEAT_CODES,
    Annotation,
    EcgRecord,
    RecordHeader,
    SignalSpec,
    read_record,
)
from .sensing import compress_channel, config_from_cr
from .similarity import reports_to_csv, structural_similarity

log = logging.getLogger(__name__)

# Representative MIT-BIH records covering normal rhythm, bundle branch
# blocks, paced beats and frequent ectopy; not a published selection.
DEFAULT_RECORDS = (
    "100", "101", "103", "105", "106", "108", "109", "111", "114",
    "118", "119", "124", "200", "203", "207", "208", "214", "232",
)

EXIT_OK, EXIT_PARTIAL, EXIT_ABORT = 0, 1, 2


@dataclass
class ExperimentConfig:
    data_dir: str = "."
    record_ids: list = field(default_factory=lambda: list(DEFAULT_RECORDS))
    channels: list = field(default_factory=lambda: [1, 2])
    sample_limit: int = 10240
    num_segments: int = 40
    crs: list = field(default_factory=lambda: [0.5, 0.75, 0.875])
    tolerance: float = 0.150
    normalize: bool = True
    beat_codes: list = field(default_factory=lambda: sorted(DEFAULT_BEAT_CODES))
    output_format: str = "csv"
    out_dir: str = "results"
    seed: int = 0
    workers: int = 4

    def validate(self) -> None:
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {self.output_format!r}")
        if self.sample_limit <= 0 or self.num_segments <= 0:
            raise ConfigError("sample limit and segment count must be positive")
        if self.sample_limit % self.num_segments:
            raise ConfigError(f"{self.sample_limit} samples do not split into {self.num_segments} segments")
        if any(c < 1 for c in self.channels):
            raise ConfigError("channels are numbered from 1")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be non-negative")
        for cr in self.crs:
            try:
                cfg = config_from_cr(self.sample_limit, cr)
            except IncompatibleRatioError as exc:
                raise ConfigError(str(exc)) from None
            if self.sample_limit % (self.num_segments * cfg.d):
                raise ConfigError(f"cr={cr}: compressed length {cfg.m} does not split into {self.num_segments}")

    def snapshot(self) -> dict:
        return dataclasses.asdict(self)


_KEYS = {
    "data_dir": ("data_dir", str),
    "records": ("record_ids", lambda v: _split(v)),
    "channels": ("channels", lambda v: [int(x) for x in _split(v)]),
    "samples": ("sample_limit", int),
    "segments": ("num_segments", int),
    "crs": ("crs", lambda v: [float(x) for x in _split(v)]),
    "cr": ("crs", lambda v: [float(x) for x in _split(v)]),
    "tolerance_ms": ("tolerance", lambda v: float(v) / 1000.0),
    "normalize": ("normalize", lambda v: _bool(v)),
    "beat_codes": ("beat_codes", lambda v: [int(x) for x in _split(v)]),
    "format": ("output_format", str),
    "out": ("out_dir", str),
    "seed": ("seed", int),
    "workers": ("workers", int),
}


def _split(v):
    return [x.strip() for x in str(v).split(",") if x.strip()]


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into ExperimentConfig keyword arguments."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        try:
            out[attr] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


def load_config(path=None, **overrides) -> ExperimentConfig:
    kwargs = parse_config_text(Path(path).read_text()) if path else {}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kwargs)


def generate_synthetic_record(
    beats_per_min: float = 60.0,
    duration_s: float = 30.0,
    fs: float = 360.0,
    seed: int = 0,
    num_channels: int = 2,
    pulse_width: float = 0.080,
    noise: float = 0.02,
    name: str = "synth",
) -> EcgRecord:
    """Pulse-train ECG surrogate with known beat locations.

    Beats sit at ``(k + 0.5) * 60 / beats_per_min`` seconds.  Each beat is a
    Gaussian pulse spanning ``pulse_width`` (±3 sigma) followed by a small,
    broad T wave.  Channel 2 is an inverted, scaled copy with its own noise.
    Samples are stored in ADC units (gain 200/mV, baseline 1024).
    """
    n = int(round(duration_s * fs))
    period = 60.0 / beats_per_min
    beat_times = np.arange(0.5 * period, duration_s, period) if n else np.zeros(0)
    beats = np.round(beat_times * fs).astype(np.int64)
    beats = beats[beats < n]

    t = np.arange(n) / fs
    qrs_sigma = pulse_width / 6.0
    clean = np.zeros(n)
    for bt in beats / fs:
        clean += np.exp(-0.5 * ((t - bt) / qrs_sigma) ** 2)
        clean += 0.25 * np.exp(-0.5 * ((t - bt - 0.25) / 0.04) ** 2)

    rng = np.random.default_rng(seed)
    gain, baseline = 200.0, 1024
    lead_scale = [1.0, -0.6, 0.8, -0.4]
    channels, specs = [], []
    for k in range(num_channels):
        mv = lead_scale[k % len(lead_scale)] * clean + noise * rng.standard_normal(n)
        adc = np.clip(np.round(mv * gain) + baseline, -2048, 2047).astype(np.int16)
        channels.append(adc)
        specs.append(SignalSpec(f"{name}.dat", 212, gain, baseline, 11, baseline,
                                int(adc[0]) if n else baseline, "mV", None, f"synthetic lead {k + 1}"))
    header = RecordHeader(name, num_channels, float(fs), n, tuple(specs))
    anns = tuple(Annotation(int(b), 1) for b in beats)
    return EcgRecord(header, tuple(channels), anns)


def load_any_record(data_dir, record_id, beat_codes, limit) -> EcgRecord:
    """Read a WFDB record, or a JSON fixture written by ``csecg synth``."""
    directory = Path(data_dir)
    if (directory / f"{record_id}.hea").exists():
        return read_record(directory, record_id, beat_codes, limit)
    fixture = directory / f"{record_id}.json"
    if fixture.exists():
        rec = EcgRecord.from_json(fixture.read_text())
        if limit > rec.header.num_samples:
            raise ConfigError(f"record {record_id} has {rec.header.num_samples} samples, need {limit}")
        codes = set(beat_codes)
        return EcgRecord(
            dataclasses.replace(rec.header, num_samples=limit),
            tuple(c[:limit] for c in rec.channels),
            tuple(a for a in rec.beat_annotations if a.type_code in codes and a.sample_index < limit),
        )
    raise FileNotFoundError(f"no record {record_id!r} (.hea or .json) in {directory}")


@dataclass
class TaskOutcome:
    record: str
    channel: int
    cr: float
    status: str = "ok"
    error: str = ""
    seconds: float = 0.0
    similarity: object = None
    detection: object = None
    original_indices: object = None
    metrics: object = None


@dataclass
class RunManifest:
    config: dict
    version: str
    backend: str
    tasks: list
    elapsed_seconds: float = 0.0
    outputs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    aborted: str = ""

    @property
    def exit_code(self) -> int:
        if self.aborted:
            return EXIT_ABORT
        return EXIT_OK if all(t["status"] == "ok" for t in self.tasks) else EXIT_PARTIAL

    def to_json(self) -> str:
        doc = dataclasses.asdict(self)
        doc["exit_code"] = self.exit_code
        return json.dumps(doc, indent=2, sort_keys=True)


def _run_record(config: ExperimentConfig, record_id: str, stages) -> list[TaskOutcome]:
    crs = [0.0] + [float(c) for c in config.crs]
    outcomes = [TaskOutcome(record_id, ch, cr) for ch in config.channels for cr in crs]
    start = time.perf_counter()
    try:
        rec = load_any_record(config.data_dir, record_id, config.beat_codes, config.sample_limit)
    except (OSError, CsecgError, ValueError) as exc:
        for o in outcomes:
            o.status, o.error = "failed", f"load: {exc}"
        log.warning("record %s failed to load: %s", record_id, exc)
        return outcomes
    load_time = time.perf_counter() - start
    truth = rec.beat_samples
    fs = rec.sampling_rate
    tol = int(round(config.tolerance * fs))

    for o in outcomes:
        t0 = time.perf_counter()
        try:
            _run_task(o, rec, config, stages, truth, fs, tol)
        except (CsecgError, ValueError) as exc:
            o.status, o.error = "failed", f"{type(exc).__name__}: {exc}"
        o.seconds = time.perf_counter() - t0 + load_time / len(outcomes)
    return outcomes


def _run_task(o, rec, config, stages, truth, fs, tol):
    if o.channel > rec.header.num_signals:
        raise ConfigError(f"record has {rec.header.num_signals} channels, asked for {o.channel}")
    x = rec.physical(o.channel - 1)
    if o.cr == 0.0:
        signal, rate, sensing = x, fs, None
    else:
        sensing = config_from_cr(x.size, o.cr, config.normalize)
        comp = compress_channel(x, sensing, fs, o.channel)
        signal, rate = comp.data, comp.effective_rate
        if "similarity" in stages:
            o.similarity = structural_similarity(
                x, comp, config.num_segments, record=o.record, channel=o.channel, keep_pairs=True
            )
    if not stages & {"detect", "evaluate"}:
        return
    det = detect_r_peaks(signal, DetectorConfig(rate), {"record": o.record, "channel": o.channel, "cr": o.cr})
    o.detection = det
    o.original_indices = det.peak_indices if sensing is None else map_to_original_timescale(det, sensing)
    if "evaluate" in stages:
        m = match_peaks(o.original_indices, truth, tol, config.tolerance)
        o.metrics = compute_metrics(m, o.record, o.channel, o.cr)


def _detections_rows(outcomes):
    rows = []
    for o in outcomes:
        if o.detection is None:
            continue
        for native, orig in zip(o.detection.peak_indices.tolist(), o.original_indices.tolist()):
            rows.append([o.record, str(o.channel), f"{o.cr:.6f}", str(native), str(orig),
                         str(o.detection.total_delay)])
    return rows


def _template_rows(sims):
    rows = []
    for s in sims:
        for k, cc in enumerate(s.per_template_direct or []):
            rows.append([s.record, str(s.channel), f"{s.cr:.6f}", str(k), f"{cc:.6f}"])
    return rows


def _write(path: Path, text: str, written: list):
    path.write_text(text)
    written.append(str(path))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def run_experiment(config: ExperimentConfig, stages: Iterable[str] = ("similarity", "detect", "evaluate"),
                   write_manifest: bool = True) -> RunManifest:
    """Run every configured task and write reports into ``config.out_dir``.

    Configuration problems abort before any work (``exit_code == 2``);
    per-record failures are recorded in the manifest and the run goes on.
    """
    stages = set(stages)
    start = time.perf_counter()
    out = Path(config.out_dir)
    try:
        config.validate()
    except ConfigError as exc:
        manifest = RunManifest(config.snapshot(), __version__, BACKEND, [], aborted=str(exc))
        if write_manifest:
            out.mkdir(parents=True, exist_ok=True)
            (out / "manifest.json").write_text(manifest.to_json())
        return manifest

    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        per_record = list(pool.map(lambda r: _run_record(config, r, stages), config.record_ids))
    outcomes = sorted((o for rec in per_record for o in rec), key=lambda o: (o.record, o.channel, o.cr))

    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    warnings: list[str] = []
    sims = [o.similarity for o in outcomes if o.similarity is not None]
    mets = [o.metrics for o in outcomes if o.metrics is not None]
    fmt = config.output_format

    if "similarity" in stages and sims:
        per_template = _template_rows(sims)
        header = ["record", "channel", "cr", "template", "direct_cc"]
        if fmt == "csv":
            _write(out / "similarity.csv", reports_to_csv(sims), written)
            _write(out / "similarity_templates.csv", _csv_text(header, per_template), written)
        else:
            _write(out / "similarity.json", _json_list([dataclasses.replace(
                s, per_pair_original=None, per_pair_compressed=None, per_template_direct=None) for s in sims]),
                written)
            _write(out / "similarity_templates.json",
                   json.dumps([dict(zip(header, r)) for r in per_template], indent=1), written)
        warnings += [f"{s.record}/ch{s.channel}/cr={s.cr:g}: {s.excluded_pairs} degenerate pairs excluded"
                     for s in sims if s.excluded_pairs]
    if "detect" in stages:
        rows = _detections_rows(outcomes)
        header = ["record", "channel", "cr", "native_index", "original_index", "total_delay"]
        if fmt == "csv":
            _write(out / "detections.csv", _csv_text(header, rows), written)
        else:
            _write(out / "detections.json", json.dumps([dict(zip(header, r)) for r in rows], indent=1), written)
    if "evaluate" in stages and mets:
        aggs = aggregate(mets, ("channel", "cr"))
        if fmt == "csv":
            _write(out / "metrics.csv", metrics_to_csv(mets), written)
            _write(out / "aggregates.csv", aggregates_to_csv(aggs), written)
        else:
            _write(out / "metrics.json", _json_list(sorted(mets, key=lambda r: (r.record, r.channel, r.cr))), written)
            _write(out / "aggregates.json", json.dumps([dataclasses.asdict(a) for a in aggs], indent=1,
                                                       sort_keys=True), written)
        warnings += [f"{m.record}/ch{m.channel}/cr={m.cr:g}: positive predictivity undefined (no detections)"
                     for m in mets if m.ppv is None]
    if sims or mets:
        written += emit_plot_data(sims, mets, out)

    manifest = RunManifest(
        config=config.snapshot(),
        version=__version__,
        backend=BACKEND,
        tasks=[{"record": o.record, "channel": o.channel, "cr": o.cr, "status": o.status,
                "error": o.error, "seconds": round(o.seconds, 6)} for o in outcomes],
        elapsed_seconds=round(time.perf_counter() - start, 6),
        outputs=written,
        warnings=warnings,
    )
    if write_manifest:
        (out / "manifest.json").write_text(manifest.to_json())
    return manifest


def _json_list(items):
    return "[\n" + ",\n".join(i.to_json() for i in items) + "\n]\n"


def emit_plot_data(similarity_reports, metric_reports, out_dir) -> list[str]:
    """Write chart-ready CSVs.

    ``plot_similarity.csv`` has one row per (record, channel, cr).
    ``plot_<metric>.csv`` has one row per cr and one column per channel,
    holding the mean over records.
    """
    if not similarity_reports and not metric_reports:
        raise ValueError("no reports to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    if similarity_reports:
        rows = [[s.record, str(s.channel), f"{s.cr:.6f}", f"{s.mean_cc_original:.6f}",
                 f"{s.mean_cc_compressed:.6f}",
                 "undefined" if s.direct_mode_mean_cc is None else f"{s.direct_mode_mean_cc:.6f}"]
                for s in sorted(similarity_reports, key=lambda s: (s.record, s.channel, s.cr))]
        _write(out / "plot_similarity.csv",
               _csv_text(["record", "channel", "cr", "mean_cc_original", "mean_cc_compressed", "direct_mode_mean_cc"],
                         rows), written)
    if metric_reports:
        aggs = aggregate(metric_reports, ("channel", "cr"))
        channels = sorted({a.key["channel"] for a in aggs})
        crs = sorted({a.key["cr"] for a in aggs})
        table = {(a.key["channel"], a.key["cr"]): a.means for a in aggs}
        for metric in METRICS:
            rows = []
            for cr in crs:
                row = [f"{cr:.6f}"]
                for ch in channels:
                    v = table.get((ch, cr), {}).get(metric)
                    row.append("undefined" if v is None else f"{v:.6f}")
                rows.append(row)
            _write(out / f"plot_{metric}.csv", _csv_text(["cr"] + [f"ch{c}" for c in channels], rows), written)
    return written
