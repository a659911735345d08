"""Exception hierarchy shared across the package."""


class DiffwalkerError(Exception):
    """Base class for all diffwalker errors."""


class ValidationError(DiffwalkerError, ValueError):
    """An input violates a documented precondition."""


class SingularSystemError(DiffwalkerError):
    """The seeded linear system is singular (some vertex unreachable from any seed)."""

    def __init__(self, vertex: int):
        self.vertex = int(vertex)
        super().__init__(
            f"singular system: vertex {self.vertex} lies in a connected component "
            "without any seed"
        )


class SolverConvergenceError(DiffwalkerError):
    """An iterative solve (or a post-solve health check) missed its tolerance."""

    def __init__(self, message: str, residuals=None):
        self.residuals = residuals
        super().__init__(message)
