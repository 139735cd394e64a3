"""Exception hierarchy shared across the toolkit."""


class CbfSynError(Exception):
    """Base class for all toolkit errors."""


class SpecInvalid(CbfSynError):
    """Problem specification violates a structural invariant."""


class RankConditionViolated(CbfSynError):
    """Ac is not in the range of B, so no offset d can cancel the drift at c."""


class DegreeOverflow(CbfSynError):
    """A polynomial contains a monomial not expressible in the given Gram basis."""


class NotPSD(CbfSynError):
    """A matrix expected to be positive semidefinite is indefinite beyond tolerance."""


class BudgetExhausted(CbfSynError):
    """The input-norm budget is already consumed by the constant offset d."""


class EmptyVertexList(CbfSynError):
    """Vertex containment requested with no vertices."""


class IllConditioned(CbfSynError):
    """Omega is too ill-conditioned to recover the gain K reliably."""


class OrientationUnsupported(CbfSynError):
    """The requested supremum is not defined for this barrier orientation."""


class Infeasible(CbfSynError):
    """The synthesis program is infeasible; the solver certificate is attached."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class UnboundedControl(CbfSynError):
    """The closed-form safety-filter control blows up (g(x)=0 with f(x)<0)."""


class SolverFailure(CbfSynError):
    """The conic backend failed numerically; diagnostics attached."""


class ParseError(CbfSynError):
    """Problem or result file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
