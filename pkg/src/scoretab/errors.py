"""Exception types shared across the package.

Two families matter for the command-line surface: ``InputError`` covers
configuration and data problems (exit code 2), ``NumericError`` covers
failures of the numerics at runtime (exit code 3).
"""


class ScoretabError(Exception):
    """Base class for all package errors."""


class InputError(ScoretabError):
    """Bad configuration, schema, or data supplied by the caller."""


class NumericError(ScoretabError):
    """Numerical failure during training, sampling, or integration."""


# --- table codec ---

class MissingColumn(InputError):
    def __init__(self, column):
        super().__init__(f"column {column!r} missing from CSV header")
        self.column = column


class UnknownCategory(InputError):
    def __init__(self, column, value, row=None):
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"value {value!r} not in vocabulary of column {column!r}{where}")
        self.column = column
        self.value = value


class NonFiniteNumeric(InputError):
    def __init__(self, row, column, raw=None):
        super().__init__(f"non-finite numerical cell in column {column!r}, row {row}: {raw!r}")
        self.row = row
        self.column = column


class EmptyTable(InputError):
    pass


class WidthMismatch(InputError):
    def __init__(self, expected, got):
        super().__init__(f"matrix width {got} does not match encoded width {expected}")
        self.expected = expected
        self.got = got


# --- score network ---

class ShapeMismatch(ScoretabError):
    pass


# --- self-paced weighting ---

class EmptyLosses(InputError):
    pass


# --- training / integration ---

class NonFiniteLoss(NumericError):
    pass


class OdeStepFailure(NumericError):
    pass


class InvalidPredictorForSde(InputError):
    pass


# --- evaluation ---

class TooFewRealRows(InputError):
    pass


class NonBinaryTarget(InputError):
    pass
