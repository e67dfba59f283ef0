"""Exception types shared across the package."""


class MeshFormatError(ValueError):
    """Raised when a mesh or observation file cannot be parsed."""


class MeshValidationError(ValueError):
    """Raised when mesh geometry or topology violates the contract."""


class BindingError(ValueError):
    """Raised when observations cannot be attached to a mesh."""


class SolverError(RuntimeError):
    """Raised on factorization or linear-solve failures."""


class ConvergenceError(SolverError):
    """Raised when an iterative method fails to reach its tolerance."""


class ModelError(ValueError):
    """Raised on invalid model configuration or degenerate statistics."""
