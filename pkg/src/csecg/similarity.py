"""Template-based structural similarity.

A signal is cut into ``K`` equal, consecutive, non-overlapping segments
("templates").  The Pearson correlation of every unordered template pair
is computed and averaged.  Doing this once on the original signal and once
on its compressed version shows how much beat morphology survives
compression.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateSegmentError, EmptyStatisticsError, SegmentationError
from .sensing import CompressedSignal

SIMILARITY_CSV_FIELDS = (
    "record", "channel", "cr", "mean_cc_original", "mean_cc_compressed",
    "delta", "direct_mode_mean_cc", "excluded_pairs",
)


@dataclass(frozen=True)
class TemplateSet:
    templates: np.ndarray  # shape (K, segment_len)
    domain: str = "original"
    source: dict = field(default_factory=dict)

    @property
    def segment_len(self) -> int:
        return self.templates.shape[1]

    def __len__(self):
        return self.templates.shape[0]


@dataclass(frozen=True)
class PairStats:
    mean: float
    pairs: list  # (i, j, cc) for every included pair, i < j
    excluded: int


@dataclass(frozen=True)
class SimilarityReport:
    mean_cc_original: float
    mean_cc_compressed: float
    delta: float
    direct_mode_mean_cc: float | None = None
    excluded_pairs: int = 0
    record: str = ""
    channel: int = 0
    cr: float = 0.0
    per_pair_original: list | None = None
    per_pair_compressed: list | None = None
    per_template_direct: list | None = None

    def csv_row(self) -> list[str]:
        direct = "undefined" if self.direct_mode_mean_cc is None else f"{self.direct_mode_mean_cc:.6f}"
        return [
            self.record, str(self.channel), f"{self.cr:.6f}",
            f"{self.mean_cc_original:.6f}", f"{self.mean_cc_compressed:.6f}",
            f"{self.delta:.6f}", direct, str(self.excluded_pairs),
        ]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SIMILARITY_CSV_FIELDS)
    for r in sorted(reports, key=lambda r: (r.record, r.channel, r.cr)):
        w.writerow(r.csv_row())
    return buf.getvalue()


def segment_into_templates(signal, num_segments: int, domain: str = "original", source=None) -> TemplateSet:
    x = np.asarray(signal, dtype=np.float64)
    if num_segments < 1 or x.size % num_segments:
        raise SegmentationError(f"length {x.size} is not divisible into {num_segments} segments")
    return TemplateSet(x.reshape(num_segments, -1).copy(), domain, dict(source or {}))


def _is_flat(a) -> bool:
    return bool(np.all(a == a[0]))


def pearson_cc(a, b) -> float:
    """Pearson correlation ``cov(a, b) / (std(a) * std(b))``, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("segments must be 1-D, of equal length >= 2")
    if _is_flat(a) or _is_flat(b):
        raise DegenerateSegmentError("zero-variance segment")
    da = a - a.mean()
    db = b - b.mean()
    r = np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db))
    return float(min(1.0, max(-1.0, r)))


def pairwise_cc_stats(ts: TemplateSet) -> PairStats:
    """Mean Pearson correlation over all unordered template pairs.

    Pairs involving a zero-variance template are left out and counted in
    ``excluded``.
    """
    t = ts.templates
    k = t.shape[0]
    if k < 2:
        raise EmptyStatisticsError("need at least two templates")
    flat = np.all(t == t[:, :1], axis=1)
    z = t - t.mean(axis=1, keepdims=True)
    ss = np.einsum("ij,ij->i", z, z)
    iu, ju = np.triu_indices(k, 1)
    ok = ~(flat[iu] | flat[ju])
    excluded = int((~ok).sum())
    if not ok.any():
        raise EmptyStatisticsError("every template pair is degenerate")
    iu, ju = iu[ok], ju[ok]
    # same reduction for cross and self products, so identical templates give exactly 1
    vals = np.einsum("pj,pj->p", z[iu], z[ju]) / np.sqrt(ss[iu] * ss[ju])
    np.clip(vals, -1.0, 1.0, out=vals)
    pairs = list(zip(iu.tolist(), ju.tolist(), vals.tolist()))
    return PairStats(float(vals.mean()), pairs, excluded)


def structural_similarity(
    original,
    compressed: CompressedSignal,
    num_segments: int,
    direct: bool = True,
    record: str = "",
    channel: int = 0,
    keep_pairs: bool = False,
) -> SimilarityReport:
    """Compare template similarity before and after compression.

    The headline numbers correlate templates within each domain.  With
    ``direct`` on, template ``k`` of the compressed signal is also
    correlated with template ``k`` of the original taken at every ``d``-th
    sample.
    """
    x = np.asarray(original, dtype=np.float64)
    if _is_flat(x):
        raise DegenerateSegmentError("original signal is constant")
    d = compressed.config.d
    orig = segment_into_templates(x, num_segments, "original")
    comp = segment_into_templates(compressed.data, num_segments, "compressed")
    so = pairwise_cc_stats(orig)
    sc = pairwise_cc_stats(comp)

    direct_mean = None
    per_template = None
    excluded = so.excluded + sc.excluded
    if direct:
        per_template = []
        for k in range(num_segments):
            sub = orig.templates[k][::d]
            if sub.size != comp.segment_len:
                raise SegmentationError("original template length is not a multiple of the decimation")
            try:
                per_template.append(pearson_cc(comp.templates[k], sub))
            except DegenerateSegmentError:
                excluded += 1
        direct_mean = float(np.mean(per_template)) if per_template else None

    return SimilarityReport(
        mean_cc_original=so.mean,
        mean_cc_compressed=sc.mean,
        delta=sc.mean - so.mean,
        direct_mode_mean_cc=direct_mean,
        excluded_pairs=excluded,
        record=record,
        channel=channel,
        cr=compressed.config.cr,
        per_pair_original=so.pairs if keep_pairs else None,
        per_pair_compressed=sc.pairs if keep_pairs else None,
        per_template_direct=per_template if keep_pairs else None,
    )
