"""cbfsyn: co-design of quadratic barrier certificates and affine controllers
for continuous-time linear systems via semidefinite programming."""

from .errors import (
    BudgetExhausted,
    CbfSynError,
    DegreeOverflow,
    EmptyVertexList,
    IllConditioned,
    NotPSD,
    ParseError,
    RankConditionViolated,
    SolverFailure,
    SpecInvalid,
    UnboundedControl,
)
from .model import (
    GLOBAL,
    HALFSPACES,
    L2,
    LINF,
    LOCAL,
    NO_BOUND,
    POLYTOPE,
    UNION,
    CenterData,
    InitialSetSpec,
    InputBoundSpec,
    LinearSystem,
    Polynomial,
    ProblemSpec,
    SafeSetSpec,
    SolverOptions,
    StatePartition,
    ValidationReport,
    chebyshev_center,
    eval_poly,
    prepare_center,
    validate_spec,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted",
    "CbfSynError",
    "CenterData",
    "DegreeOverflow",
    "EmptyVertexList",
    "GLOBAL",
    "HALFSPACES",
    "IllConditioned",
    "InitialSetSpec",
    "InputBoundSpec",
    "L2",
    "LINF",
    "LOCAL",
    "LinearSystem",
    "NO_BOUND",
    "NotPSD",
    "POLYTOPE",
    "ParseError",
    "Polynomial",
    "ProblemSpec",
    "RankConditionViolated",
    "SafeSetSpec",
    "SolverFailure",
    "SolverOptions",
    "SpecInvalid",
    "StatePartition",
    "UNION",
    "UnboundedControl",
    "ValidationReport",
    "chebyshev_center",
    "eval_poly",
    "prepare_center",
    "validate_spec",
]
