"""Compressed-domain analysis of multi-channel ECG.

Records are compressed with a deterministic binary block diagonal operator
and analysed without reconstruction: template similarity and Pan-Tompkins
R-peak detection run directly on the measurements.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .detector import DetectionResult, DetectorConfig, detect_r_peaks, map_to_original_timescale
from .evaluation import MatchResult, MetricsReport, aggregate, compute_metrics, match_peaks
from .ingest import (
    Annotation,
    EcgRecord,
    RecordHeader,
    adc_to_physical,
    decode_212,
    encode_212,
    load_record,
    parse_header,
    read_annotations,
    read_record,
)
from .sensing import (
    CompressedSignal,
    MultiChannelCompressed,
    SensingConfig,
    build_dbbd_matrix,
    compress_channel,
    compress_multichannel,
    config_from_cr,
)
from .similarity import (
    SimilarityReport,
    TemplateSet,
    pairwise_cc_stats,
    pearson_cc,
    segment_into_templates,
    structural_similarity,
)

__all__ = [
    "__version__",
    "Annotation",
    "EcgRecord",
    "RecordHeader",
    "adc_to_physical",
    "decode_212",
    "encode_212",
    "load_record",
    "parse_header",
    "read_annotations",
    "read_record",
    "CompressedSignal",
    "MultiChannelCompressed",
    "SensingConfig",
    "build_dbbd_matrix",
    "compress_channel",
    "compress_multichannel",
    "config_from_cr",
    "SimilarityReport",
    "TemplateSet",
    "pairwise_cc_stats",
    "pearson_cc",
    "segment_into_templates",
    "structural_similarity",
    "BACKEND",
    "DetectionResult",
    "DetectorConfig",
    "detect_r_peaks",
    "map_to_original_timescale",
    "MatchResult",
    "MetricsReport",
    "aggregate",
    "compute_metrics",
    "match_peaks",
]
