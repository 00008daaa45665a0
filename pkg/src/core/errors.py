from typing import Optional


class SRLabError(Exception):
    """Base class for every error raised by the lab"""


class DimensionError(SRLabError):
    """Operands live in Hilbert spaces of incompatible dimension"""


class NormalizationError(SRLabError):
    """A state or a set of weights is not normalized"""


class InvalidOperatorError(SRLabError):
    """A matrix violates the invariants of its operator type"""


class NoRepresentationError(SRLabError):
    """A property whose window contains a0 has no projector"""


class EmptyEnsembleError(SRLabError):
    """An ensemble of zero physical objects was requested"""


class NoDetectionsError(SRLabError):
    """A conditional statistic was asked for with no detected objects"""


class BranchingError(SRLabError):
    """A measurement branching violates its invariants"""


class ImpossibleOutcomeError(SRLabError):
    """The projection postulate was applied to a zero-probability outcome"""


class ModelError(SRLabError):
    """A detection model cannot answer for the given setting"""


class ConfigError(SRLabError):
    """An experiment descriptor or settings file is invalid"""


class FormatError(SRLabError):
    """A report cannot be written in the requested format"""


class ExperimentError(SRLabError):
    """A module error raised while running a given experiment config"""

    def __init__(self, config_path: Optional[str], cause: SRLabError):
        self.config_path = config_path
        self.cause = cause
        where = config_path or "<inline config>"
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
