class ConfigError(ValueError):
    """Invalid or unknown configuration."""


class EpisodeStateError(RuntimeError):
    """Operation not allowed in the environment's current episode state."""


class ProtocolError(RuntimeError):
    """Malformed or out-of-vocabulary message from a remote teacher."""

    def __init__(self, message: str, raw: str | bytes | None = None):
        super().__init__(message)
        self.raw = raw


class TeacherTimeout(ProtocolError):
    """Remote teacher did not answer within the configured timeout."""
