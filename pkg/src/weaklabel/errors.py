"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for every error the engine raises on purpose."""


class FormatError(EngineError):
    """A file does not follow the expected binary or line layout."""


class CorruptionError(EngineError):
    """A structurally valid file whose payload disagrees with its header."""


class DataError(EngineError):
    """Payload values violate a data contract (non-finite, zero norm, duplicate ids)."""


class DimensionError(EngineError):
    """Vector or sequence length mismatch."""


class ConfigError(EngineError):
    """Invalid configuration or parameter combination."""


class EmptyStoreError(EngineError):
    """The operation needs a nonempty embedding store."""


class MembershipError(EngineError):
    """A referenced document is not part of the expected ground set."""


class TrainingError(EngineError):
    """Classifier training cannot proceed on the given data."""


class DistributionError(EngineError):
    """Malformed probability distribution."""


class DiagnosticError(EngineError):
    """A requested diagnostic is unavailable (for example: no gold labels)."""


class InfeasiblePointError(EngineError):
    """A grid point produced an unusable training set and must be skipped."""


class RunError(EngineError):
    """Pipeline-level failure; the message names the failing stage."""
