"""Exception hierarchy shared across the package."""


class AutoHybridError(Exception):
    """Base class for all package errors."""


class SpaceError(AutoHybridError, ValueError):
    """Malformed configuration space."""


class NonEnumerable(SpaceError):
    """A reachable parameter has a continuous domain."""


class UnresolvedParent(SpaceError):
    """A conditional parameter references an unassigned parent."""


class InvalidConfig(AutoHybridError, ValueError):
    """A configuration does not validate against its space."""


class FitFailure(AutoHybridError, RuntimeError):
    """A model could not be fitted (non-convergence, singular system)."""


class DimensionMismatch(AutoHybridError, ValueError):
    pass


class SchemaMismatch(AutoHybridError, ValueError):
    pass


class LengthMismatch(AutoHybridError, ValueError):
    pass


class EmptyInput(AutoHybridError, ValueError):
    pass


class NonPositiveNormalizer(AutoHybridError, ValueError):
    pass


class TooFewRows(AutoHybridError, ValueError):
    pass


class TooFewValues(AutoHybridError, ValueError):
    pass


class AllFitsFailed(AutoHybridError, RuntimeError):
    """A fold ended up with no usable predictor or no usable decider."""


class EmptyRanking(AutoHybridError, RuntimeError):
    """No (interpolator, extrapolator, decider) triple is usable in every fold."""


class MisalignedSeries(AutoHybridError, ValueError):
    pass


class DegeneratePrediction(AutoHybridError, ValueError):
    pass


class UnknownPlant(AutoHybridError, KeyError):
    pass


class DataError(AutoHybridError, ValueError):
    """Base for dataset ingestion problems."""


class MissingTarget(DataError):
    pass


class EmptyFile(DataError):
    pass


class NonNumericCell(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"non-numeric cell {value!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class ConfigError(AutoHybridError, ValueError):
    """Malformed experiment configuration."""
