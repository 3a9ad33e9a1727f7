class ForestRulesError(Exception):
    """Base class for all exceptions raised by the forest rules package."""

    pass


class DatasetError(ForestRulesError):
    """Raised when tabular data cannot be loaded or violates dataset invariants."""


class ArityMismatchError(ForestRulesError, ValueError):
    """Raised when an instance does not have one value per training column."""

    def __init__(self, expected: int, actual: int):
        super().__init__(f"Instance has {actual} values, expected {expected}")
        self.expected = expected
        self.actual = actual


class TrainingError(ForestRulesError):
    """Raised when tree or forest training parameters are out of range."""


class RuleError(ForestRulesError):
    """Raised when a rule body is contradictory or refers to unknown classes."""


class SelectionError(ForestRulesError):
    """Raised when a rule selection request cannot be satisfied."""


class ArtifactFormatError(ForestRulesError):
    """Raised when a JSON artifact has an unknown kind or format version."""


class ConfigurationError(ForestRulesError):
    """Raised when the run configuration is invalid."""

    def __init__(self, message="Configuration is invalid. Check flags and settings file."):
        super().__init__(message)
