class ContractError(ValueError):
    """An operation was called with inputs violating its preconditions."""


class ConfigError(ValueError):
    """A configuration is inconsistent or cannot be satisfied."""


class DivergenceError(ArithmeticError):
    """The learner produced non-finite or runaway weights."""
