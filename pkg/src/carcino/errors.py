"""Exception hierarchy shared by all carcino modules.

The CLI maps these onto stable exit codes: raster/file problems are I/O
errors (exit 4), an empty frame set after ROI filtering is its own
condition (exit 3), and everything else is input validation (exit 2).
"""


class CarcinoError(Exception):
    """Base class for all errors raised by this package."""


# --- raster container / mask files -------------------------------------

class MaskFormatError(CarcinoError):
    """A raster file violates the MSK1 container format."""


class BadMagicError(MaskFormatError):
    pass


class UnknownDtypeError(MaskFormatError):
    pass


class TruncatedPayloadError(MaskFormatError):
    pass


class ConfidenceOutOfRangeError(MaskFormatError):
    """A confidence payload value lies outside [0, 1] or is not finite."""


class LabelOutOfRangeError(MaskFormatError):
    """A label payload value lies outside the allowed code range."""


class RasterInvariantError(CarcinoError):
    """An in-memory raster cannot be written because it violates the
    container invariants (dtype, shape, or value range). Nothing is
    written when this is raised."""


# --- manifests ----------------------------------------------------------

class ManifestError(CarcinoError):
    """A video manifest is structurally or semantically invalid."""


class ManifestSyntaxError(ManifestError):
    pass


class MissingFieldError(ManifestError):
    pass


class GroundTruthInconsistentError(ManifestError):
    """Stored score, station flags and surgery indication disagree."""


# --- pipeline -----------------------------------------------------------

class PipelineError(CarcinoError):
    pass


class NegativeIntervalError(PipelineError):
    pass


class OverlappingSegmentsError(PipelineError):
    pass


class InvalidSegmentError(PipelineError):
    pass


class ChannelCountMismatchError(PipelineError):
    pass


class DimensionMismatchError(PipelineError):
    pass


class NoAssessableFramesError(PipelineError):
    """No frame survived the ROI filter; the video cannot be scored.

    Deliberately distinct from a score of 0, which is a clinical claim."""


# --- metrics ------------------------------------------------------------

class MetricError(CarcinoError):
    pass


class LengthMismatchError(MetricError):
    pass


class EmptyCohortError(MetricError):
    pass


class UndefinedClassError(MetricError):
    """Balanced accuracy is undefined because one class has no members."""


class AllUndefinedError(MetricError):
    """Every run value passed to a summary was undefined."""


class MissingGroundTruthError(CarcinoError):
    pass


# --- cohorts ------------------------------------------------------------

class TooFewVideosError(CarcinoError):
    pass


# --- synthetic cohorts --------------------------------------------------

class InvalidSpecError(CarcinoError):
    pass
