"""Exception hierarchy.

Every error carries a stable ``code`` string so that callers (and the CLI)
can dispatch on it without string matching on messages.
"""


class SingleCrossingError(Exception):
    code = "ERROR"


class UnboundedLabel(SingleCrossingError, ValueError):
    code = "UNBOUNDED_LABEL"

    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


class NotDiagonal(SingleCrossingError, ValueError):
    code = "NOT_DIAGONAL"


class OutOfRange(SingleCrossingError, ValueError):
    code = "OUT_OF_RANGE"


class FamilyMismatch(SingleCrossingError, ValueError):
    code = "FAMILY_MISMATCH"


class OutOfSupport(SingleCrossingError, ValueError):
    code = "OUT_OF_SUPPORT"


class ReversedInterval(SingleCrossingError, ValueError):
    code = "REVERSED_INTERVAL"


class DivideAtTop(SingleCrossingError, ZeroDivisionError):
    code = "DIVIDE_AT_TOP"


class ZeroDensity(SingleCrossingError, ZeroDivisionError):
    code = "ZERO_DENSITY"


class ThresholdNotIndifferent(SingleCrossingError, ValueError):
    code = "THRESHOLD_NOT_INDIFFERENT"

    def __init__(self, message, position=None, gap=None):
        super().__init__(message)
        self.position = position
        self.gap = gap


class ThresholdsDecreasing(SingleCrossingError, ValueError):
    code = "THRESHOLDS_DECREASING"


class SupportMismatch(SingleCrossingError, ValueError):
    code = "SUPPORT_MISMATCH"


class ChainUnsolvable(SingleCrossingError, ValueError):
    code = "CHAIN_UNSOLVABLE"


class GridTooLarge(SingleCrossingError, ValueError):
    code = "GRID_TOO_LARGE"


class FamilyUnsupported(SingleCrossingError, ValueError):
    code = "FAMILY_UNSUPPORTED"


class DegenerateCell(SingleCrossingError, ValueError):
    code = "DEGENERATE_CELL"


class NonmonotoneHazard(SingleCrossingError, ValueError):
    code = "NONMONOTONE_HAZARD"


class SolverStalled(SingleCrossingError, RuntimeError):
    code = "SOLVER_STALLED"


class VerificationFailed(SingleCrossingError, RuntimeError):
    code = "VERIFICATION_FAILED"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigInvalid(SingleCrossingError, ValueError):
    code = "CONFIG_INVALID"


class UnknownExample(SingleCrossingError, KeyError):
    code = "UNKNOWN_EXAMPLE"

    def __str__(self):
        return str(self.args[0]) if self.args else self.code
