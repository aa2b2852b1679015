"""Exception hierarchy shared by all crackbench modules."""


class CrackBenchError(Exception):
    """Base class for every error raised by this package."""


class DataError(CrackBenchError):
    """Bad input data: unreadable files, wrong dimensions, non-binary masks."""


class ConfigError(CrackBenchError):
    """Invalid configuration or command-line arguments."""


class NoContrastError(DataError):
    """A patch (or histogram) has a single intensity level."""

    def __init__(self, msg="no contrast"):
        super().__init__(msg)


class DimensionMismatchError(DataError):
    pass


class ManifestError(DataError):
    pass


class SamplerError(CrackBenchError):
    """External sampler transport failure or malformed response."""


class ConvergenceError(CrackBenchError):
    """An iterative solver exhausted its iteration budget."""
