"""Exception types shared across the package."""


class FeatDistillError(Exception):
    """Base class for all package errors."""


class InvalidArgument(FeatDistillError, ValueError):
    pass


class NotFound(FeatDistillError, LookupError):
    pass


class FormatError(FeatDistillError, ValueError):
    """A binary artifact (embedding file, checkpoint) is corrupt or truncated."""


class ManifestParseError(InvalidArgument):
    def __init__(self, path, lineno, reason):
        self.path = str(path)
        self.lineno = lineno
        self.reason = reason
        super().__init__(f"{path}:{lineno}: {reason}")


class ConfigError(FeatDistillError, ValueError):
    pass
