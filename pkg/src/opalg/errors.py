"""Exception types shared across the package."""


class OpalgError(Exception):
    """Base class for all package errors."""


class InfeasibleError(OpalgError):
    """A requested computation is outside the configured numeric budget.

    Raised instead of returning a possibly-wrong answer (e.g. Jiang-Su
    matrix numerics at stage >= 2, or a precision unreachable within the
    subdivision budget).
    """


class CertificationError(OpalgError):
    """A certificate check failed (a candidate was rejected, or an
    internal soundness assertion could not be established)."""


class BudgetExhaustedError(OpalgError):
    """An enumeration search ran out of budget before succeeding."""

    def __init__(self, message, best_margins=None):
        super().__init__(message)
        self.best_margins = best_margins
