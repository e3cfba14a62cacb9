"""Exception hierarchy shared by every stage of the toolkit."""


class CsecgError(Exception):
    """Base class for all errors raised by csecg."""


class HeaderParseError(CsecgError):
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class UnsupportedFormatError(HeaderParseError):
    pass


class DecodeError(CsecgError):
    def __init__(self, expected, available):
        self.expected = expected
        self.available = available
        super().__init__(f"truncated signal data: expected {expected} bytes, got {available}")


class SampleRangeError(CsecgError, ValueError):
    pass


class AnnotationParseError(CsecgError):
    pass


class CalibrationError(CsecgError, ValueError):
    pass


class IncompatibleRatioError(CsecgError, ValueError):
    pass


class DimensionError(CsecgError, ValueError):
    pass


class SegmentationError(CsecgError, ValueError):
    pass


class DegenerateSegmentError(CsecgError, ValueError):
    pass


class EmptyStatisticsError(CsecgError):
    pass


class DetectorConfigError(CsecgError, ValueError):
    pass


class InsufficientDataError(CsecgError, ValueError):
    pass


class MatchingError(CsecgError, ValueError):
    pass


class NoReferenceBeatsError(CsecgError):
    pass


class AggregationError(CsecgError):
    pass


class ConfigError(CsecgError, ValueError):
    pass
