"""Exception hierarchy shared by the numerical modules and the CLI."""


class ConfigError(ValueError):
    """Invalid user-supplied configuration (maps to CLI exit status 1)."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericalError(RuntimeError):
    """A numerical invariant was violated (maps to CLI exit status 2)."""

    def __init__(self, message: str, *, invariant: str = "", time: float | None = None):
        detail = message
        if invariant:
            detail = f"[{invariant}] {detail}"
        if time is not None:
            detail = f"{detail} (t={time:.6g})"
        super().__init__(detail)
        self.invariant = invariant
        self.time = time


class CutoffError(NumericalError):
    """Truncated Fock space too small for the requested state."""
