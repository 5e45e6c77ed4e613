"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, `DataError`
exits 2, `NumericError` exits 3.
"""


class WctextError(Exception):
    """Base class for all errors raised by this package."""


class DataError(WctextError):
    """Bad input data: malformed files, empty corpora, unknown ids."""


class CorpusError(DataError):
    """Problems while loading or transforming a corpus."""


class GraphFormatError(DataError):
    """Problems while reading a serialized graph file."""


class VersionMismatchError(GraphFormatError):
    """Graph file declares an unsupported format version."""


class ChecksumError(GraphFormatError):
    """Graph file content does not match its recorded checksum."""


class TruncatedFileError(GraphFormatError):
    """Graph file ends before its checksum trailer."""


class NumericError(WctextError):
    """Numeric failure: non-finite values, diverging training runs."""


class ShapeError(NumericError):
    """Operands with incompatible shapes reached a tensor primitive."""
