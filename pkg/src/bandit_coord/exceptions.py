class PreconditionError(ValueError):
    """An operation was called with arguments outside its domain."""


class ContractError(ValueError):
    """A set function produced a value outside its declared range."""


class EnumerationBudgetError(ValueError):
    """Exhaustive enumeration would exceed the configured budget."""

    def __init__(self, required, budget):
        super().__init__(
            f"exhaustive enumeration needs {required} evaluations, budget is {budget}"
        )
        self.required = required
        self.budget = budget


class BanditFeedbackViolation(RuntimeError):
    """A set was queried that is not a subset of the executed joint action."""


class StateCorruptionError(FloatingPointError):
    """Learner weights became non-finite or non-positive."""
