"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes, so new failure modes should reuse one of
the classes below instead of raising bare ValueError from deep inside a run.
"""


class RelcapError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(RelcapError):
    """Bad or contradictory configuration (unknown model name, overlapping splits)."""


class DataError(RelcapError):
    """Malformed or missing input data (schema drift, duplicate keys, bad CSV)."""


class LeakageError(RelcapError):
    """A fitted component was asked to touch data outside its training split."""


class EvaluationError(RelcapError):
    """An evaluation quantity is undefined for the given inputs."""


class NumericError(RelcapError):
    """Training diverged or produced non-finite values."""
