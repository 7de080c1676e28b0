"""Exception taxonomy shared across the package.

CLI exit codes: ConfigError -> 1, DataError/InputError -> 2,
NumericError/TrainingError -> 3.
"""


class LatentChatError(Exception):
    pass


class ShapeError(LatentChatError):
    """Operand dimensions do not agree."""


class ConfigError(LatentChatError):
    """Invalid configuration value or unknown key."""


class DataError(LatentChatError):
    """Malformed corpus or batch contents."""


class InputError(LatentChatError):
    """Invalid runtime input (empty prompt, empty bag, ...)."""


class NumericError(LatentChatError):
    """Non-finite values where finite ones are required."""


class TrainingError(LatentChatError):
    """Optimisation failure (non-finite gradient or loss)."""


class CheckpointError(LatentChatError):
    """Checkpoint file malformed or incompatible with the config."""
