"""Exception types shared across the package."""


class CctError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CctError):
    """Bad run configuration (missing paths, unknown keys, invalid values)."""


class DataError(CctError):
    """Malformed input data (bad JSON lines, schema violations)."""


class TrainingAbort(CctError):
    """Training stopped because a loss became non-finite."""

    def __init__(self, message: str, record_id=None):
        super().__init__(message)
        self.record_id = record_id


class SandboxConfigError(ConfigError):
    """Sandbox command template missing or unusable."""


class DetokenizeError(ValueError):
    """Token list handed to detokenize violates span ordering."""


class InvalidPairError(ValueError):
    """Two sequences expected to differ are identical."""


class DegeneratePairError(InvalidPairError):
    """A mutant pair whose two sides encode to the same id sequence."""


class ContextOverflowError(ValueError):
    """A token sequence exceeds the model's context length."""
