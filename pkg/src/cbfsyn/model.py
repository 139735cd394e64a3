"""Domain types: systems, partitions, polynomials, and problem specifications.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import RankConditionViolated, SpecInvalid

GLOBAL = "global"
LOCAL = "local"


def _as_matrix(M, name):
    M = np.array(M, dtype=float)
    if M.ndim != 2:
        raise SpecInvalid(f"{name} must be a 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise SpecInvalid(f"{name} has non-finite entries")
    return M


class Polynomial:
    """Sparse multivariate polynomial keyed by nonnegative exponent tuples.

    Zero coefficients are never stored.  Terms are reported in graded-lex
    order (total degree first, then lexicographic on the exponent tuple),
    which makes all derived output deterministic.
    """

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars, coeffs=None):
        if nvars < 1:
            raise SpecInvalid("polynomial needs at least one variable")
        self.nvars = int(nvars)
        clean = {}
        for exps, c in (coeffs or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars:
                raise SpecInvalid(
                    f"exponent tuple {exps} does not match {self.nvars} variables"
                )
            if any(e < 0 for e in exps):
                raise SpecInvalid(f"negative exponent in {exps}")
            c = float(c)
            if c != 0.0:
                clean[exps] = clean.get(exps, 0.0) + c
        self.coeffs = {e: c for e, c in clean.items() if c != 0.0}

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def constant(nvars, value):
        return Polynomial(nvars, {(0,) * nvars: value})

    @staticmethod
    def variable(nvars, index):
        e = [0] * nvars
        e[index] = 1
        return Polynomial(nvars, {tuple(e): 1.0})

    @staticmethod
    def monomial(exps, coeff=1.0):
        return Polynomial(len(exps), {tuple(exps): coeff})

    @staticmethod
    def quadratic_form(Q, center=None):
        """(x-c)^T Q (x-c) as an explicit polynomial."""
        Q = np.asarray(Q, dtype=float)
        n = Q.shape[0]
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        out = Polynomial(n, {})
        for i in range(n):
            for j in range(n):
                if Q[i, j] == 0.0:
                    continue
                xi = Polynomial.variable(n, i) - Polynomial.constant(n, c[i])
                xj = Polynomial.variable(n, j) - Polynomial.constant(n, c[j])
                out = out + xi * xj * Q[i, j]
        return out

    # -- algebra --------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(
                self.nvars, {e: c * other for e, c in self.coeffs.items()}
            )
        out = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    # -- queries --------------------------------------------------------------

    def degree(self):
        if not self.coeffs:
            return 0
        return max(sum(e) for e in self.coeffs)

    def terms(self):
        """Terms in graded-lex order."""
        return sorted(self.coeffs.items(), key=lambda t: (sum(t[0]), t[0]))

    def used_variables(self):
        used = set()
        for e in self.coeffs:
            used.update(i for i, p in enumerate(e) if p > 0)
        return used

    def gradient(self):
        grads = []
        for k in range(self.nvars):
            g = {}
            for e, c in self.coeffs.items():
                if e[k] == 0:
                    continue
                ne = list(e)
                ne[k] -= 1
                ne = tuple(ne)
                g[ne] = g.get(ne, 0.0) + c * e[k]
            grads.append(Polynomial(self.nvars, g))
        return grads

    def __call__(self, x):
        return eval_poly(self, x)

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.nvars == other.nvars
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.nvars, tuple(self.terms())))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for e, c in self.terms():
            mono = " ".join(
                f"x{i + 1}" + (f"^{p}" if p > 1 else "")
                for i, p in enumerate(e)
                if p > 0
            )
            parts.append(f"{c:.17g}" + (f" * {mono}" if mono else ""))
        return " + ".join(parts)


def eval_poly(p, x):
    """Exact monomial-sum evaluation of ``p`` at point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.nvars,):
        raise SpecInvalid(f"point has dimension {x.shape}, expected ({p.nvars},)")
    total = 0.0
    for e, c in p.coeffs.items():
        term = c
        for xi, pi in zip(x, e):
            if pi:
                term *= xi**pi
        total += term
    return total


@dataclass(frozen=True)
class LinearSystem:
    """Continuous-time dynamics xdot = A x + B u."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise SpecInvalid("A must be square")
        if B.shape[0] != A.shape[0]:
            raise SpecInvalid("B must have as many rows as A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def is_stabilizable(self, tol=1e-9):
        """PBH test on eigenvalues with nonnegative real part."""
        n = self.n
        for lam in np.linalg.eigvals(self.A):
            if lam.real < -tol:
                continue
            M = np.hstack([self.A - lam * np.eye(n), self.B])
            if np.linalg.matrix_rank(M, tol=1e-9 * max(1.0, abs(lam))) < n:
                return False
        return True


@dataclass(frozen=True)
class StatePartition:
    """Split of the state into constrained (x_bar) and free (x_under) blocks."""

    n_bar: int
    n_under: int

    def __post_init__(self):
        if self.n_bar < 1:
            raise SpecInvalid("the constrained block needs at least one state")
        if self.n_under < 0:
            raise SpecInvalid("partition dimensions must be nonnegative")

    @property
    def n(self):
        return self.n_bar + self.n_under


UNION = "union"
HALFSPACES = "halfspaces"


@dataclass(frozen=True)
class SafeSetSpec:
    """Safe region description.

    ``union`` mode (global design): S is the union of {s_i(x_bar) >= 0},
    each s_i a polynomial over the x_bar coordinates only.

    ``halfspaces`` mode (local design): S is the intersection of
    {a_i^T (x - c) + 1 >= 0}; the rows of ``halfspaces`` are the a_i,
    already normalized relative to the center c.

    ``vertices`` optionally lists the vertices of the unsafe-region
    projection when it is a polytope, enabling the linear containment
    constraints in place of the SOS certificate.
    """

    kind: str
    polynomials: tuple = ()
    halfspaces: np.ndarray | None = None
    vertices: tuple = ()

    def __post_init__(self):
        if self.kind not in (UNION, HALFSPACES):
            raise SpecInvalid(f"unknown safe-set kind {self.kind!r}")
        if self.vertices:
            object.__setattr__(
                self,
                "vertices",
                tuple(np.asarray(v, dtype=float).reshape(-1) for v in self.vertices),
            )
        if self.kind == UNION:
            if not self.polynomials and not self.vertices:
                raise SpecInvalid(
                    "union safe set needs at least one polynomial or a vertex list"
                )
            object.__setattr__(self, "polynomials", tuple(self.polynomials))
        else:
            H = _as_matrix(self.halfspaces, "halfspaces")
            object.__setattr__(self, "halfspaces", H)


@dataclass(frozen=True)
class InitialSetSpec:
    """Initial region: intersection of {w_i(x) >= 0}, assumed bounded."""

    polynomials: tuple

    def __post_init__(self):
        if not self.polynomials:
            raise SpecInvalid("initial set needs at least one polynomial")
        object.__setattr__(self, "polynomials", tuple(self.polynomials))


NO_BOUND = "none"
L2 = "l2"
LINF = "linf"
POLYTOPE = "polytope"


@dataclass(frozen=True)
class InputBoundSpec:
    """Control-authority limit attached to the synthesis program."""

    variant: str = NO_BOUND
    zeta: float | None = None
    H: np.ndarray | None = None
    h: np.ndarray | None = None
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.variant not in (NO_BOUND, L2, LINF, POLYTOPE):
            raise SpecInvalid(f"unknown input bound variant {self.variant!r}")
        if self.epsilon <= 0:
            raise SpecInvalid("input bound margin epsilon must be positive")
        if self.variant in (L2, LINF):
            if self.zeta is None or self.zeta <= 0:
                raise SpecInvalid("zeta must be a positive real")
        if self.variant == POLYTOPE:
            H = _as_matrix(self.H, "H")
            h = np.asarray(self.h, dtype=float).reshape(-1)
            if h.shape[0] != H.shape[0]:
                raise SpecInvalid("H and h row counts differ")
            if np.any(np.all(H == 0.0, axis=1)):
                raise SpecInvalid("H has an all-zero row")
            object.__setattr__(self, "H", H)
            object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class SolverOptions:
    """Numerical knobs shared by the program builders and backends."""

    sos_epsilon: float = 1e-6  # margin closing strict SOS inequalities
    delta: float = 1e-6  # closure of strict LMIs (>=' delta I)
    variable_bound: float = 1e6  # box keeping unbounded optimal faces compact
    rank_tol: float = 1e-9
    feastol: float = 1e-8
    max_iter: int = 200
    seed: int = 0
    mu_mode: str = "fixed"  # "fixed" or "lifted"


@dataclass(frozen=True)
class ProblemSpec:
    """Full synthesis problem: system, sets, mode, and options."""

    system: LinearSystem
    partition: StatePartition
    mode: str
    safe_set: SafeSetSpec
    center: np.ndarray
    initial_set: InitialSetSpec | None = None
    input_bound: InputBoundSpec = field(default_factory=InputBoundSpec)
    multiplier_degree: int = 2
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if c.shape[0] != self.system.n:
            raise SpecInvalid("center dimension does not match system")
        object.__setattr__(self, "center", c)


@dataclass(frozen=True)
class CenterData:
    """Center c with its drift-cancelling offset d (Bd + Ac = 0)."""

    c: np.ndarray
    d: np.ndarray
    residual: float


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple
    warnings: tuple = ()

    @property
    def valid(self):
        return not self.problems


def validate_spec(spec: ProblemSpec) -> ValidationReport:
    """Structural validation; returns a report instead of raising."""
    problems = []
    warnings = []
    sys_, part = spec.system, spec.partition

    if part.n != sys_.n:
        problems.append(
            f"partition {part.n_bar}+{part.n_under} does not sum to n={sys_.n}"
        )
    if spec.mode not in (GLOBAL, LOCAL):
        problems.append(f"unknown mode {spec.mode!r}")

    if spec.mode == GLOBAL:
        if spec.safe_set.kind != UNION:
            problems.append("global mode requires a union-of-polynomials safe set")
        else:
            for i, s in enumerate(spec.safe_set.polynomials):
                if s.nvars != part.n_bar:
                    problems.append(
                        f"safe polynomial {i} has {s.nvars} variables, "
                        f"expected n_bar={part.n_bar}"
                    )
            for i, v in enumerate(spec.safe_set.vertices):
                if v.shape[0] != part.n_bar:
                    problems.append(
                        f"vertex {i} has dimension {v.shape[0]}, "
                        f"expected n_bar={part.n_bar}"
                    )
        if spec.multiplier_degree % 2 != 0 or spec.multiplier_degree < 0:
            problems.append("multiplier degree must be a nonnegative even integer")
    elif spec.mode == LOCAL:
        if spec.safe_set.kind != HALFSPACES:
            problems.append("local mode requires a halfspace safe set")
        elif spec.safe_set.halfspaces.shape[1] != sys_.n:
            problems.append("halfspace vectors must have dimension n")
        if spec.initial_set is None:
            problems.append("initial set required in local mode")
        else:
            for i, w in enumerate(spec.initial_set.polynomials):
                if w.nvars != sys_.n:
                    problems.append(
                        f"initial polynomial {i} has {w.nvars} variables, expected {sys_.n}"
                    )
        if part.n_bar != sys_.n:
            problems.append("local mode requires n_bar = n")

    if spec.mode == GLOBAL and spec.input_bound.variant in (LINF, POLYTOPE):
        problems.append(
            "global mode supports only the L2 input bound extrapolation"
        )
    if spec.input_bound.variant == POLYTOPE and spec.input_bound.H is not None:
        if spec.input_bound.H.shape[1] != sys_.m:
            problems.append("polytope H column count must equal m")

    if not sys_.is_stabilizable():
        warnings.append("system is not stabilizable (no program constraint uses this)")

    return ValidationReport(tuple(problems), tuple(warnings))


def prepare_center(system: LinearSystem, c, tol=1e-9) -> CenterData:
    """Find d minimizing ||Bd + Ac||_2 and check rank([B, Ac]) = rank(B).

    Raises RankConditionViolated when Ac is not in the range of B.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape[0] != system.n or not np.all(np.isfinite(c)):
        raise SpecInvalid("center must be a finite n-vector")
    Ac = system.A @ c
    d, *_ = np.linalg.lstsq(system.B, -Ac, rcond=None)
    residual = float(np.linalg.norm(system.B @ d + Ac))

    sv_b = np.linalg.svd(system.B, compute_uv=False)
    aug = np.hstack([system.B, Ac.reshape(-1, 1)])
    sv_aug = np.linalg.svd(aug, compute_uv=False)
    thresh = tol * max(sv_aug[0], 1.0)
    rank_b = int(np.sum(sv_b > thresh))
    rank_aug = int(np.sum(sv_aug > thresh))
    if rank_aug > rank_b:
        raise RankConditionViolated(
            f"rank([B, Ac])={rank_aug} exceeds rank(B)={rank_b}; "
            "Ac is not in the range of B"
        )
    return CenterData(c=c, d=d, residual=residual)


def chebyshev_center(G, offsets):
    """Chebyshev center of {x : G x + offsets >= 0} via linear programming.

    Used as the default center in local mode when the user gives none.
    """
    from scipy.optimize import linprog

    G = np.asarray(G, dtype=float)
    o = np.asarray(offsets, dtype=float).reshape(-1)
    norms = np.linalg.norm(G, axis=1)
    # maximize r subject to G x + o >= r * ||g_i||
    n = G.shape[1]
    cvec = np.zeros(n + 1)
    cvec[-1] = -1.0
    A_ub = np.hstack([-G, norms.reshape(-1, 1)])
    b_ub = o
    res = linprog(cvec, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * n + [(0, None)])
    if not res.success or res.x[-1] <= 0:
        raise SpecInvalid("halfspace safe set has empty interior")
    return res.x[:n]


def grlex_monomials(nvars, max_deg):
    """All exponent tuples of total degree <= max_deg, graded-lex ordered."""
    out = []
    for d in range(max_deg + 1):
        out.extend(
            sorted(
                e
                for e in itertools.product(range(d + 1), repeat=nvars)
                if sum(e) == d
            )
        )
    return out
