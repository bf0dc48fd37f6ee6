"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a model is defined."""


class ConfigError(ValueError):
    """A run configuration file is malformed or fails validation.

    ``key_path`` is the dotted location of the offending entry and ``line`` its
    1-based line number in the source file, when known.
    """

    def __init__(self, message, key_path=None, line=None):
        self.key_path = key_path
        self.line = line
        where = []
        if key_path:
            where.append(f"key '{key_path}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
