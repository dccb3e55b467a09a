"""Exception and warning types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class NumericalBreakdownError(RuntimeError):
    """A numerical guard tripped (non-physical density matrix, failed solve)."""


class NoTransferError(RuntimeError):
    """No stored-work maximum found: flat or negligible energy transfer."""


class CutoffWarning(UserWarning):
    """Mode cutoff likely too small for the targeted excitation."""
