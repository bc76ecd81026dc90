"""Exception types raised by the solver."""


class SizingError(ValueError):
    """Geometry is too small for the requested discretization."""


class ParameterError(ValueError):
    """A physical or numerical parameter is outside its valid range."""


class OutOfBoundsError(IndexError):
    """A particle lies outside the hashing grid."""

    def __init__(self, particle: int, position):
        self.particle = particle
        super().__init__(f"particle {particle} at {tuple(position)} is outside the grid")


class ContractError(ValueError):
    """An input violates an operation's precondition."""


class GuardError(ValueError):
    """Input size exceeds a safety guard."""


class SimulationError(RuntimeError):
    """The integrated state became non-finite."""

    def __init__(self, message: str, step: int | None = None, particle: int | None = None,
                 snapshot=None):
        self.step = step
        self.particle = particle
        self.snapshot = snapshot
        super().__init__(message)


class SnapshotParseError(ValueError):
    """A snapshot file is malformed."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(ValueError):
    """A scenario configuration file is malformed."""
