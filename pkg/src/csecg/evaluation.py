"""Beat matching and detection metrics (Se, P+, F, DER)."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AggregationError, MatchingError, NoReferenceBeatsError

METRIC_CSV_FIELDS = ("record", "channel", "cr", "tp", "fp", "fn", "tb", "se", "ppv", "f", "der")
AGGREGATE_CSV_FIELDS = ("channel", "cr", "n", "se", "ppv", "f", "der", "undefined")
METRICS = ("se", "ppv", "f", "der")
UNDEFINED = "undefined"


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    matched_pairs: list = field(default_factory=list)  # (detected, truth)
    tolerance: float | None = None  # seconds, informational
    tolerance_samples: int = 0

    @property
    def tb(self) -> int:
        return self.tp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    se: float | None
    ppv: float | None
    f: float | None
    der: float | None
    tp: int
    fp: int
    fn: int
    tb: int
    record: str = ""
    channel: int = 0
    cr: float = 0.0

    def csv_row(self) -> list[str]:
        return [self.record, str(self.channel), f"{self.cr:.6f}",
                str(self.tp), str(self.fp), str(self.fn), str(self.tb),
                *(_fmt(getattr(self, k)) for k in METRICS)]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class AggregateRow:
    key: dict
    n: int
    means: dict  # metric -> mean or None when every report had it undefined
    undefined: dict  # metric -> number of reports left out


def _fmt(v):
    return UNDEFINED if v is None else f"{v:.6f}"


def _check_sorted(a, name):
    if a.size > 1 and np.any(np.diff(a) < 0):
        raise MatchingError(f"{name} indices must be sorted ascending")


def match_peaks(detected, truth, tolerance_samples: int, tolerance: float | None = None) -> MatchResult:
    """One-to-one matching of detections to reference beats within ``±tolerance_samples``.

    Among matchings with the most pairs, the one with the smallest total
    distance is chosen, and ties go to the earlier detection.  When every
    reference beat has a single candidate this is plain nearest-neighbour
    matching.
    """
    det = np.asarray(detected, dtype=np.int64)
    ref = np.asarray(truth, dtype=np.int64)
    _check_sorted(det, "detected")
    _check_sorted(ref, "truth")
    pairs = []
    for ds, ts in _clusters(det, ref, tolerance_samples):
        pairs.extend(_match_cluster(ds, ts, tolerance_samples))
    pairs.sort(key=lambda p: p[1])
    tp = len(pairs)
    return MatchResult(tp, det.size - tp, ref.size - tp, pairs, tolerance, tolerance_samples)


def _clusters(det, ref, tol):
    """Split into groups that no within-tolerance pair can straddle."""
    events = sorted([(int(v), 0) for v in det] + [(int(v), 1) for v in ref])
    group = ([], [])
    prev = None
    for v, kind in events:
        if prev is not None and v - prev > tol:
            if group[0] and group[1]:
                yield group
            group = ([], [])
        group[kind].append(v)
        prev = v
    if group[0] and group[1]:
        yield group


def _match_cluster(ds, ts, tol):
    a, b = len(ts), len(ds)
    # best[i][j]: (-matches, total distance, sum of detection positions) over ts[i:], ds[j:]
    best = [[(0, 0, 0)] * (b + 1) for _ in range(a + 1)]
    move = [[0] * (b + 1) for _ in range(a + 1)]
    for i in range(a - 1, -1, -1):
        for j in range(b - 1, -1, -1):
            options = [(best[i + 1][j], 1), (best[i][j + 1], 2)]
            dist = abs(ts[i] - ds[j])
            if dist <= tol:
                m, s, pos = best[i + 1][j + 1]
                options.append(((m - 1, s + dist, pos + j), 3))
            best[i][j], move[i][j] = min(options, key=lambda o: (o[0], -o[1]))
    pairs = []
    i = j = 0
    while i < a and j < b:
        mv = move[i][j]
        if mv == 3:
            pairs.append((ds[j], ts[i]))
            i += 1
            j += 1
        elif mv == 1:
            i += 1
        else:
            j += 1
    return pairs


def compute_metrics(m: MatchResult, record: str = "", channel: int = 0, cr: float = 0.0) -> MetricsReport:
    """Se, P+, F and DER in percent.

    P+ is ``None`` (undefined) when there are no detections at all.
    """
    tb = m.tp + m.fn
    if tb == 0:
        raise NoReferenceBeatsError("no reference beats: sensitivity and DER are undefined")
    se = 100.0 * m.tp / tb
    ppv = 100.0 * m.tp / (m.tp + m.fp) if m.tp + m.fp else None
    f = 100.0 * 2 * m.tp / (2 * m.tp + m.fn + m.fp)
    der = 100.0 * (m.fp + m.fn) / tb
    return MetricsReport(se, ppv, f, der, m.tp, m.fp, m.fn, tb, record, channel, cr)


def aggregate(reports: Iterable[MetricsReport], group_by: Sequence[str] = ("cr",)) -> list[AggregateRow]:
    """Unweighted per-group means of each metric; undefined values are skipped and counted."""
    groups: dict[tuple, list[MetricsReport]] = {}
    for r in reports:
        groups.setdefault(tuple(getattr(r, k) for k in group_by), []).append(r)
    if not groups:
        raise AggregationError("nothing to aggregate")
    rows = []
    for key in sorted(groups):
        members = groups[key]
        means, undefined = {}, {}
        for metric in METRICS:
            vals = [getattr(r, metric) for r in members if getattr(r, metric) is not None]
            undefined[metric] = len(members) - len(vals)
            means[metric] = float(np.mean(vals)) if vals else None
        rows.append(AggregateRow(dict(zip(group_by, key)), len(members), means, undefined))
    return rows


def metrics_to_csv(reports: Iterable[MetricsReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_CSV_FIELDS)
    for r in sorted(reports, key=lambda r: (r.record, r.channel, r.cr)):
        w.writerow(r.csv_row())
    return buf.getvalue()


def aggregates_to_csv(rows: Iterable[AggregateRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_CSV_FIELDS)
    for row in rows:
        w.writerow([
            str(row.key.get("channel", "")),
            f"{row.key['cr']:.6f}" if "cr" in row.key else "",
            str(row.n),
            *(_fmt(row.means[k]) for k in METRICS),
            str(sum(row.undefined.values())),
        ])
    return buf.getvalue()
