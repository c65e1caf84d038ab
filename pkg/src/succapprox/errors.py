"""Exception hierarchy shared by all modules."""


class DomainError(ValueError):
    """A point lies outside the domain beyond the allowed tolerance."""


class ContractViolation(ValueError):
    """A documented precondition on Lipschitz constants does not hold."""


class PreconditionError(ValueError):
    """A structural precondition of a construction is not met."""


class ConvergenceError(ArithmeticError):
    """An iterative procedure did not reach its tolerance.

    ``partial_bound`` carries the best certified value available when the
    procedure gave up (``None`` when nothing useful is known).
    """

    def __init__(self, message, partial_bound=None):
        super().__init__(message)
        self.partial_bound = partial_bound


class TieError(RuntimeError):
    """A metric projection was not unique and the branch rule forbids ties."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class ConsistencyError(RuntimeError):
    """An outcome that the underlying theory rules out was observed."""


class ConstructionError(RuntimeError):
    """A constructed object failed its own post-construction verification."""
