"""Exception hierarchy shared by all modules."""


class SubcirError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SubcirError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConvergenceError(SubcirError, ArithmeticError):
    """A series or quadrature failed to reach its tolerance within budget."""


class BelowResolutionError(SubcirError, ValueError):
    """A horizon is shorter than the model's expansion floor ``t_min``."""


class ConfigError(SubcirError, ValueError):
    """A run configuration failed validation.

    ``problems`` lists every violation found, each as ``(json_pointer, message)``.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(f"{ptr or '/'}: {msg}" for ptr, msg in self.problems)
        super().__init__(f"invalid configuration: {lines}")
