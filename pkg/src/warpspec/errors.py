"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class UnsupportedError(ValueError):
    """The operation is not defined for this variant or parameter range."""


class NumericalError(RuntimeError):
    """An iterative procedure failed to converge or produced invalid output."""


class InvariantViolation(AssertionError):
    """A structural inequality that must hold by construction was violated."""

    def __init__(self, name, detail=""):
        self.name = name
        super().__init__(f"invariant violated: {name}" + (f" ({detail})" if detail else ""))
