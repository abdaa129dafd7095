"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific one that applies rather than a bare Exception.
"""


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or out of range."""


class NumericalAbort(RuntimeError):
    """A numerical quantity that must stay finite stopped being finite."""


class InfeasibleError(RuntimeError):
    """The requested episode or assignment admits no valid solution."""
