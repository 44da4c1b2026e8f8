"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or out-of-range hyperparameters.

    ``errors`` holds every problem found, not just the first one.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ContractViolation(ValueError):
    """A caller broke an operation's precondition (e.g. dimension mismatch)."""


class HonestMajorityViolated(RuntimeError):
    """The fallback median could not be found: fewer than K/2 reports agree."""


class NonFiniteIterate(FloatingPointError):
    """An inner update produced NaN/Inf."""
