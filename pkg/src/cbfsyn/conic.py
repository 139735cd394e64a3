"""Standard-form conic problems over a named decision-variable layout.

A ConicProblem is: minimize a linear objective over scalar decision entries,
subject to linear equalities, linear inequalities (a.x + const >= 0), and
LMI blocks F0 + sum_k x_k F_k >= 0.  Symmetric matrix variables store the
upper triangle only; every constraint references flat scalar indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SpecInvalid

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class VarBlock:
    name: str
    kind: str  # "sym" | "dense" | "scalar"
    shape: tuple
    offset: int
    size: int


class DecisionLayout:
    """Named variable blocks mapped onto a flat scalar vector."""

    def __init__(self):
        self.blocks = {}
        self.num_vars = 0
        self._entry_names = []

    def _add(self, name, kind, shape, size):
        if name in self.blocks:
            raise SpecInvalid(f"duplicate variable name {name!r}")
        blk = VarBlock(name, kind, shape, self.num_vars, size)
        self.blocks[name] = blk
        self.num_vars += size
        return blk

    def add_symmetric(self, name, dim):
        """Symmetric dim x dim variable; returns the index matrix (dim x dim)."""
        size = dim * (dim + 1) // 2
        blk = self._add(name, "sym", (dim, dim), size)
        idx = np.zeros((dim, dim), dtype=int)
        k = blk.offset
        for i in range(dim):
            for j in range(i, dim):
                idx[i, j] = idx[j, i] = k
                self._entry_names.append(f"{name}[{i},{j}]")
                k += 1
        return idx

    def add_dense(self, name, rows, cols):
        blk = self._add(name, "dense", (rows, cols), rows * cols)
        idx = np.arange(blk.offset, blk.offset + rows * cols).reshape(rows, cols)
        for i in range(rows):
            for j in range(cols):
                self._entry_names.append(f"{name}[{i},{j}]")
        return idx

    def add_scalar(self, name):
        blk = self._add(name, "scalar", (), 1)
        self._entry_names.append(name)
        return blk.offset

    def entry_name(self, flat_index):
        return self._entry_names[flat_index]

    def extract(self, name, x):
        """Reassemble the named variable from a flat solution vector."""
        blk = self.blocks[name]
        if blk.kind == "scalar":
            return float(x[blk.offset])
        if blk.kind == "dense":
            return np.array(x[blk.offset : blk.offset + blk.size]).reshape(blk.shape)
        dim = blk.shape[0]
        M = np.zeros((dim, dim))
        k = blk.offset
        for i in range(dim):
            for j in range(i, dim):
                M[i, j] = M[j, i] = x[k]
                k += 1
        return M


@dataclass
class LMIBlock:
    """F0 + sum_k x_k F_k >= 0 (already normalized to the PSD sense)."""

    name: str
    dim: int
    F0: np.ndarray
    terms: dict  # flat index -> symmetric coefficient matrix
    group: str = ""

    def evaluate(self, x):
        M = self.F0.copy()
        for k, Fk in self.terms.items():
            M += x[k] * Fk
        return M

    def min_eig(self, x):
        return float(np.linalg.eigvalsh(self.evaluate(x))[0])


@dataclass
class LinearConstraint:
    """coeffs . x + const (= 0 for equalities, >= 0 for inequalities)."""

    coeffs: dict
    const: float
    group: str = ""

    def evaluate(self, x):
        return self.const + sum(c * x[k] for k, c in self.coeffs.items())


@dataclass
class Solution:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int = 0
    solve_time: float = 0.0
    residuals: dict = field(default_factory=dict)
    backend: str = ""
    diagnostics: str = ""


class ConicProblem:
    """Mutable builder + container for one standard-form SDP."""

    def __init__(self, layout=None):
        self.layout = layout or DecisionLayout()
        self.objective = {}  # flat index -> coefficient
        self.lmi_blocks = []
        self.equalities = []
        self.inequalities = []
        self.variable_bound = None
        self.metadata = {}

    # -- construction ---------------------------------------------------------

    def set_objective_trace(self, idx_matrix):
        for i in range(idx_matrix.shape[0]):
            k = int(idx_matrix[i, i])
            self.objective[k] = self.objective.get(k, 0.0) + 1.0

    def add_objective(self, flat_index, coeff):
        self.objective[flat_index] = self.objective.get(flat_index, 0.0) + coeff

    def add_lmi(self, name, F0, terms, dim=None, group=""):
        F0 = np.asarray(F0, dtype=float)
        dim = dim or F0.shape[0]
        for k, Fk in terms.items():
            if Fk.shape != (dim, dim):
                raise SpecInvalid(f"LMI {name}: coefficient shape mismatch")
            if not np.allclose(Fk, Fk.T):
                raise SpecInvalid(f"LMI {name}: coefficient matrix not symmetric")
        self.lmi_blocks.append(LMIBlock(name, dim, F0, dict(terms), group))

    def add_nsd_lmi(self, name, F0, terms, dim=None, group=""):
        """F0 + sum x_k F_k <= 0, stored negated as a PSD block."""
        self.add_lmi(
            name,
            -np.asarray(F0, dtype=float),
            {k: -Fk for k, Fk in terms.items()},
            dim,
            group,
        )

    def add_equality(self, coeffs, const, group=""):
        self.equalities.append(LinearConstraint(dict(coeffs), float(const), group))

    def add_inequality(self, coeffs, const, group=""):
        self.inequalities.append(LinearConstraint(dict(coeffs), float(const), group))

    def add_psd_var_cone(self, name, idx_matrix, group=""):
        """Constrain a symmetric variable block to the PSD cone."""
        dim = idx_matrix.shape[0]
        terms = {}
        for i in range(dim):
            for j in range(i, dim):
                E = np.zeros((dim, dim))
                E[i, j] = E[j, i] = 1.0
                terms[int(idx_matrix[i, j])] = E
        self.add_lmi(name, np.zeros((dim, dim)), terms, dim, group)

    def remove_group(self, group):
        """Drop every constraint tagged with ``group`` (vars stay allocated)."""
        self.lmi_blocks = [b for b in self.lmi_blocks if b.group != group]
        self.equalities = [e for e in self.equalities if e.group != group]
        self.inequalities = [e for e in self.inequalities if e.group != group]

    # -- inspection -----------------------------------------------------------

    def objective_value(self, x):
        return sum(c * x[k] for k, c in self.objective.items())

    def max_violation(self, x):
        """Worst constraint violation at x (0 means feasible)."""
        worst = 0.0
        for blk in self.lmi_blocks:
            worst = max(worst, -blk.min_eig(x))
        for eq in self.equalities:
            worst = max(worst, abs(eq.evaluate(x)))
        for ineq in self.inequalities:
            worst = max(worst, -ineq.evaluate(x))
        return worst

    # -- standard-form export ---------------------------------------------------

    def standard_form(self, psd_lower=False):
        """Flatten to (c, A_eq, b_eq, A_ineq, b_ineq, psd blocks).

        Conic form: A_eq x = b_eq; b_ineq - A_ineq x >= 0; for each PSD block
        the svec of (F0 + sum x_k F_k) with off-diagonals scaled by sqrt(2).
        ``psd_lower`` selects lower-triangle column-major stacking (SCS
        convention) instead of upper-triangle column-major (Clarabel).
        """
        nv = self.layout.num_vars
        c = np.zeros(nv)
        for k, v in self.objective.items():
            c[k] += v

        def rows(constraints):
            A = np.zeros((len(constraints), nv))
            b = np.zeros(len(constraints))
            for r, con in enumerate(constraints):
                for k, v in con.coeffs.items():
                    A[r, k] += v
                b[r] = con.const
            return A, b

        A_eq, b_eq = rows(self.equalities)
        # equality: coeffs.x + const = 0  ->  A x = -const
        b_eq = -b_eq
        A_in, b_in = rows(self.inequalities)
        # inequality coeffs.x + const >= 0  ->  b - (-A) x >= 0 with b = const
        A_in = -A_in

        if self.variable_bound is not None:
            eye = np.eye(nv)
            A_in = np.vstack([A_in, eye, -eye])
            b_in = np.concatenate(
                [b_in, np.full(nv, self.variable_bound), np.full(nv, self.variable_bound)]
            )

        psd = []
        for blk in self.lmi_blocks:
            m = blk.dim * (blk.dim + 1) // 2
            Ablk = np.zeros((m, nv))
            for k, Fk in blk.terms.items():
                Ablk[:, k] -= svec(Fk, lower=psd_lower)
            psd.append((blk.dim, Ablk, svec(blk.F0, lower=psd_lower)))
        return c, A_eq, b_eq, A_in, b_in, psd

    def to_text(self):
        """Human-readable flat serialization (documented backend interface)."""
        lines = [f"num_vars {self.layout.num_vars}"]
        for name, blk in self.layout.blocks.items():
            lines.append(f"var {name} {blk.kind} {blk.shape} offset {blk.offset}")
        lines.append(
            "objective "
            + " ".join(f"{k}:{v:.17g}" for k, v in sorted(self.objective.items()))
        )
        for eq in self.equalities:
            lines.append(
                "eq "
                + " ".join(f"{k}:{v:.17g}" for k, v in sorted(eq.coeffs.items()))
                + f" const {eq.const:.17g}"
            )
        for ineq in self.inequalities:
            lines.append(
                "ineq "
                + " ".join(f"{k}:{v:.17g}" for k, v in sorted(ineq.coeffs.items()))
                + f" const {ineq.const:.17g}"
            )
        for blk in self.lmi_blocks:
            lines.append(f"lmi {blk.name} dim {blk.dim}")
            lines.append("  F0 " + " ".join(f"{v:.17g}" for v in blk.F0.ravel()))
            for k in sorted(blk.terms):
                lines.append(
                    f"  F[{k}] " + " ".join(f"{v:.17g}" for v in blk.terms[k].ravel())
                )
        if self.variable_bound is not None:
            lines.append(f"variable_bound {self.variable_bound:.17g}")
        return "\n".join(lines) + "\n"


def svec(M, lower=False):
    """Scaled triangular vectorization: off-diagonals multiplied by sqrt(2).

    Upper-triangle column-major by default (Clarabel PSD-triangle order);
    lower-triangle column-major when ``lower`` is set (SCS order).
    """
    d = M.shape[0]
    s2 = np.sqrt(2.0)
    out = np.empty(d * (d + 1) // 2)
    k = 0
    if lower:
        for j in range(d):
            for i in range(j, d):
                out[k] = M[i, j] * (1.0 if i == j else s2)
                k += 1
    else:
        for j in range(d):
            for i in range(j + 1):
                out[k] = M[i, j] * (1.0 if i == j else s2)
                k += 1
    return out


class SolverBackend:
    """Interface contract for pluggable conic solvers (PSD cone required)."""

    name = "abstract"
    supports_psd = True

    def solve(self, problem: ConicProblem, options=None) -> Solution:
        raise NotImplementedError
