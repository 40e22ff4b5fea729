"""Exception hierarchy shared across the package."""


class PerturbWalkError(Exception):
    pass


class ConfigError(PerturbWalkError, ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class PreconditionError(PerturbWalkError, ValueError):
    pass


class SaturationError(PerturbWalkError, OverflowError):
    """A sampled jump is too large to be represented as a lattice increment.

    ``loglog_radius`` keeps log(log(R)) of the real-valued radius, which is
    finite even when R itself overflows a double.
    """

    def __init__(self, loglog_radius: float):
        self.loglog_radius = loglog_radius
        super().__init__(f"jump radius exp(exp({loglog_radius:.6g})) exceeds the lattice range")


class LatticeOverflowError(PerturbWalkError, OverflowError):
    pass


class MomentUnavailable(PerturbWalkError, ValueError):
    pass


class TailUnavailable(PerturbWalkError, ValueError):
    pass


class InconclusiveError(PerturbWalkError, RuntimeError):
    pass


class NoReturnError(PerturbWalkError, RuntimeError):
    pass


class MemoryGuardError(PerturbWalkError, MemoryError):
    pass


class DomainError(PerturbWalkError, ValueError):
    pass
