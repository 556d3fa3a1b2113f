"""Exception types raised by gatesynth."""


class InvalidInputError(ValueError):
    """An argument violates the documented preconditions."""


class DegenerateBranchError(ArithmeticError):
    """The matrix logarithm has eigenvalue gaps at the 2*pi branch tie."""


class DegenerateModelError(ArithmeticError):
    """The linear model carries no information (e.g. an all-zero Jacobian)."""


class NoFiniteConditioningError(RuntimeError):
    """Every sampled pulse norm produced infinite ill-conditioning."""


class ConfigError(ValueError):
    """Malformed experiment configuration."""
