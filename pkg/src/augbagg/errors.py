class FormatError(ValueError):
    """Malformed input file (bad header, non-numeric cell, missing value)."""


class PolicyError(ValueError):
    """Input is well-formed but disallowed by the chosen policy."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
