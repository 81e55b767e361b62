"""Exception hierarchy shared by all modules."""


class PvnneError(Exception):
    """Base class for every error raised by this package."""


# --- data ingestion -------------------------------------------------------

class SchemaError(PvnneError, ValueError):
    pass


class IntegrityError(PvnneError, ValueError):
    pass


class EmptyInputError(PvnneError, ValueError):
    pass


class IrrecoverableFieldError(PvnneError, ValueError):
    pass


class ResolutionError(PvnneError, ValueError):
    pass


class GapError(PvnneError, ValueError):
    """A day needed for patterns or forecasting is missing or incomplete."""

    def __init__(self, message, day=None):
        super().__init__(message)
        self.day = day


# --- numerics -------------------------------------------------------------

class WaveletLengthError(PvnneError, ValueError):
    pass


class NumericError(PvnneError, ArithmeticError):
    pass


class ShapeError(PvnneError, ValueError):
    pass


class SpecError(PvnneError, ValueError):
    pass


class DivergenceError(PvnneError, ArithmeticError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ObjectiveError(PvnneError, ArithmeticError):
    def __init__(self, message, particle=None, iteration=None):
        super().__init__(message)
        self.particle = particle
        self.iteration = iteration


# --- solar geometry / synthesis ------------------------------------------

class DayRangeError(PvnneError, ValueError):
    pass


class LatitudeError(PvnneError, ValueError):
    pass


class GeometryError(PvnneError, ValueError):
    pass


class GenerationError(PvnneError, RuntimeError):
    pass


# --- ensemble / evaluation ------------------------------------------------

class ConfigError(PvnneError, ValueError):
    pass


class TrimError(PvnneError, ValueError):
    pass


class EnsembleTrainingError(PvnneError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NormalizationError(PvnneError, ValueError):
    pass


class DegenerateVarianceError(PvnneError, ValueError):
    pass
