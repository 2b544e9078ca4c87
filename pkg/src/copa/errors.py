"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, :class:`DataError`
exits 2, :class:`DivergenceError` exits 3 and :class:`VerificationError`
exits 4.
"""


class CopaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(CopaError):
    """Invalid or inconsistent input data (files, labels, shapes, norms)."""


class FormatError(DataError):
    """Malformed embedding file: bad magic, version or truncated payload."""


class DimensionMismatchError(DataError):
    """A row carries a different number of values than the declared dim."""


class LabelRangeError(DataError):
    """A label lies outside [0, n_classes)."""


class NonFiniteError(DataError):
    """A NaN or infinity appeared where a finite value is required."""


class MissingClassError(DataError):
    """Some class index in [0, n_classes) has no samples."""


class DivergenceError(CopaError):
    """An optimization step produced a non-finite loss or gradient."""


class VerificationError(CopaError):
    """A numerical bound that should always hold was violated."""
