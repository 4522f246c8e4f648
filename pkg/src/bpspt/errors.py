"""Exception hierarchy shared by all sampler components."""


class BpsError(Exception):
    """Base class for sampler errors."""


class DomainError(BpsError, ValueError):
    """An argument lies outside the domain of an operation."""


class ModelEvaluationError(BpsError, FloatingPointError):
    """A target model returned a non-finite potential or gradient."""


class ReflectionError(BpsError, ValueError):
    """Reflection requested against a zero gradient."""


class DominanceError(BpsError, AssertionError):
    """An envelope failed to dominate the rate it was built for."""


class DivergenceError(BpsError, FloatingPointError):
    """The simulated state became non-finite."""


class KernelError(BpsError, ValueError):
    """A discrete transition kernel produced invalid weights."""


class ConfigError(BpsError, ValueError):
    """Invalid configuration.

    ``violations`` lists every problem found, not just the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DataError(BpsError, ValueError):
    """Malformed trace or assignment data."""
