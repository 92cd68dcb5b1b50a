"""Exception hierarchy shared by every module."""


class CorrugateError(Exception):
    """Base class for all library errors."""


class DomainError(CorrugateError, ValueError):
    """An argument lies outside the domain of an operation."""


class ShapeError(CorrugateError, ValueError):
    """Array or map dimensions are incompatible."""


class ContractError(CorrugateError):
    """A documented precondition between inputs does not hold."""


class DegenerateError(CorrugateError):
    """A frame, basis or determinant collapsed."""


class ConeError(CorrugateError):
    """A metric increase cannot be written with the available linear forms."""


class ConvergenceError(CorrugateError):
    """An iterative search exhausted its budget."""


class ConfigError(CorrugateError, ValueError):
    """Invalid run configuration."""
