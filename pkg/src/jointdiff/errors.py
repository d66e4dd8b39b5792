"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes (config 2, data 3, numeric 4).
"""


class JointDiffError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(JointDiffError):
    """Invalid or inconsistent run configuration."""


class DataError(JointDiffError):
    """Malformed dataset, schema, or sample file."""


class NumericError(JointDiffError):
    """Non-finite state encountered during training or sampling."""
