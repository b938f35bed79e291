"""Exception hierarchy.

Every error raised by modkit derives from :class:`ModkitError`.  The three
intermediate classes map onto CLI exit codes:

* :class:`InputError` (exit 2): malformed input, unknown names, bad schema.
* :class:`DegenerateDataError` (exit 3): data that is well formed but cannot
  support the requested computation (empty strata, single-class targets...).
* :class:`InvariantViolation` (exit 4): an internal consistency check failed.
"""


class ModkitError(Exception):
    exit_code = 1


class InputError(ModkitError, ValueError):
    exit_code = 2


class DegenerateDataError(ModkitError, ValueError):
    exit_code = 3


class InvariantViolation(ModkitError, AssertionError):
    exit_code = 4


# -- input errors -----------------------------------------------------------

class UnknownFactor(InputError, KeyError):
    pass


class UnknownCategory(InputError, KeyError):
    pass


class UnknownFeature(InputError, KeyError):
    pass


class UnknownAxis(InputError, KeyError):
    pass


class OverlappingAxes(InputError):
    pass


class EmptyAxisSet(InputError):
    pass


class SubsetSearchTooLarge(InputError):
    pass


class CellCapExceeded(InputError):
    pass


class LengthMismatch(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class BadSubsetSize(InputError):
    pass


class InvalidSpec(InputError):
    pass


class SchemaMismatch(InputError):
    pass


class HeaderMissing(InputError):
    pass


class SerializationError(InputError):
    pass


class CellError(InputError):
    """Base for errors tied to a (row, column) cell of an input table."""

    def __init__(self, row, col, message=None):
        self.row = row
        self.col = col
        super().__init__(message or f"row {row}, column {col!r}")


class ParseError(CellError):
    def __init__(self, row, col, token):
        self.token = token
        super().__init__(row, col, f"cannot parse {token!r} at row {row}, column {col!r}")


class NegativeFeature(CellError):
    def __init__(self, row, col, value=None):
        self.value = value
        super().__init__(row, col, f"negative feature value {value!r} at row {row}, column {col!r}")


class MissingValue(CellError):
    def __init__(self, row, col):
        super().__init__(row, col, f"missing value at row {row}, column {col!r}")


# -- degenerate data --------------------------------------------------------

class DegenerateSplit(DegenerateDataError):
    pass


class EmptyStratum(DegenerateDataError):
    pass


class SingleClassStratum(DegenerateDataError):
    pass


class ZeroRowSum(DegenerateDataError):
    def __init__(self, sample_index):
        self.sample_index = sample_index
        super().__init__(f"selected features sum to zero in sample {sample_index}")


class SingleSample(DegenerateDataError):
    pass


class NoFeatures(DegenerateDataError):
    pass


class EmptyNode(DegenerateDataError):
    pass


class EmptyLabels(DegenerateDataError):
    pass


class Empty(DegenerateDataError):
    pass
