"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, geometry, or scenario parameters."""


class ConstructionError(ValueError):
    """A weight profile cannot be built for the requested geometry."""


class PreconditionError(ValueError):
    """An input violates a documented precondition (e.g. boundary values)."""


class SolverError(RuntimeError):
    """The time-stepping linear system is singular or ill-conditioned."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ReconstructionError(ValueError):
    """Coefficient reconstruction failed a guard (e.g. the division floor)."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class DomainError(ValueError):
    """A point lies outside the closed space-time window."""
