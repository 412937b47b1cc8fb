"""Exception types raised by pcsample.

Everything derives from :class:`PcSampleError` so callers can catch the
package's failures with a single except clause while still being able to
distinguish individual conditions.
"""


class PcSampleError(Exception):
    """Base class for all pcsample errors."""


# --------------------------------------------------------------------------- #
# cloud / label ingestion
# --------------------------------------------------------------------------- #

class TruncatedRecordError(PcSampleError):
    """Binary payload length is not a whole number of point records."""


class NonFinitePointError(PcSampleError):
    """A point has a NaN or infinite coordinate.

    Carries the offending point index as ``.index``.
    """

    def __init__(self, index: int, message: str | None = None):
        self.index = int(index)
        super().__init__(message or f"non-finite coordinate at point index {index}")


class LabelParseError(PcSampleError):
    """Label text could not be parsed; message names the record index."""


class InvalidBoxError(PcSampleError):
    """A bounding box has a non-positive extent."""


class InvalidConfigError(PcSampleError):
    """A configuration value is outside its documented domain."""


# --------------------------------------------------------------------------- #
# classification
# --------------------------------------------------------------------------- #

class EmptyCloudError(PcSampleError):
    """Operation requires at least one point."""


class EmptyTrainingSetError(PcSampleError):
    """Training requires at least one (cloud, labels) pair."""


class RegionOutOfRangeError(PcSampleError):
    """A region index lies outside the configured grid."""


class SchemaMismatchError(PcSampleError):
    """A persisted artifact has an unknown or incompatible schema version."""


# --------------------------------------------------------------------------- #
# sampling
# --------------------------------------------------------------------------- #

class InfeasibleTotalError(PcSampleError):
    """Requested quota total exceeds the number of available items."""


class ClassificationMismatchError(PcSampleError):
    """A per-point classification does not match the cloud it is applied to."""


# --------------------------------------------------------------------------- #
# evaluation
# --------------------------------------------------------------------------- #

class NoObjectPointsError(PcSampleError):
    """Ground truth contains no object points; retention is undefined."""


class NoBoxesError(PcSampleError):
    """Ground truth contains no boxes; instance recall is undefined."""


class EmptyInputError(PcSampleError):
    """A report was requested for an empty row set."""


# --------------------------------------------------------------------------- #
# command line
# --------------------------------------------------------------------------- #

class ConfigError(PcSampleError):
    """Invalid command-line configuration; message names the offending flag."""
