"""Error categories raised across the package.

Every exception carries a ``category`` string that the command-line interface reports verbatim.
"""


class TomographyError(Exception):
    category = "error"


class InvalidDimensionError(TomographyError, ValueError):
    category = "invalid-dimension"


class OutOfRangeError(TomographyError, IndexError):
    category = "out-of-range"


class DegenerateStateError(TomographyError, ValueError):
    category = "degenerate-state"


class HermiticityViolationError(TomographyError, ValueError):
    category = "hermiticity-violation"


class InvalidProbabilityError(TomographyError, ValueError):
    category = "invalid-probability"


class ShapeError(TomographyError, ValueError):
    category = "shape-error"


class NumericFailureError(TomographyError, FloatingPointError):
    category = "numeric-failure"


class DimensionMismatchError(TomographyError, ValueError):
    category = "dimension-mismatch"


class DatasetError(TomographyError, ValueError):
    category = "dataset-error"


class TapeReuseError(TomographyError, RuntimeError):
    category = "tape-reuse"


class StoreError(TomographyError):
    category = "store-error"


class VersionMismatchError(StoreError):
    category = "version-mismatch"


class ChecksumError(StoreError):
    category = "checksum-failure"


class MalformedPayloadError(StoreError):
    category = "malformed-payload"


class BadFlagError(TomographyError, ValueError):
    category = "bad-flag"
