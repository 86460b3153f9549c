"""Exception hierarchy shared by all modules."""


class CartanOrbitsError(Exception):
    """Base class for every error raised by this package."""


class InvalidForm(CartanOrbitsError, ValueError):
    pass


class DegenerateBasis(CartanOrbitsError, ValueError):
    pass


class DegenerateForm(CartanOrbitsError, ValueError):
    pass


class InvalidPoint(CartanOrbitsError, ValueError):
    pass


class DimensionError(CartanOrbitsError, ValueError):
    pass


class NumericalError(CartanOrbitsError, ArithmeticError):
    pass


class InvalidDirection(CartanOrbitsError, ValueError):
    pass


class ScenarioMismatch(CartanOrbitsError, ValueError):
    pass


class DegenerateMetric(CartanOrbitsError, ValueError):
    pass


class DomainError(CartanOrbitsError, ValueError):
    pass


class NoConvergence(CartanOrbitsError, RuntimeError):
    pass


class MarginViolation(CartanOrbitsError, ValueError):
    pass


class ConfigError(CartanOrbitsError, ValueError):
    """Scenario configuration failed validation."""
