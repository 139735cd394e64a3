"""Sum-of-squares to semidefinite compilation.

Monomial bases, Gram parameterization with coefficient matching, the
S-procedure constraint assembler, and numeric witness extraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import ConicProblem
from .errors import DegreeOverflow, NotPSD
from .model import Polynomial, grlex_monomials


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials of degree <= max_degree, graded-lex ordered."""

    nvars: int
    max_degree: int
    exponents: tuple

    def __len__(self):
        return len(self.exponents)

    def index(self, exps):
        return self.exponents.index(tuple(exps))


def build_basis(num_vars, max_deg) -> MonomialBasis:
    if num_vars < 1 or max_deg < 0:
        raise ValueError("need num_vars >= 1 and max_deg >= 0")
    exps = tuple(grlex_monomials(num_vars, max_deg))
    return MonomialBasis(num_vars, max_deg, exps)


def product_map(basis: MonomialBasis):
    """For each monomial mu of degree <= 2d, the (i, j) pairs with
    z_i * z_j = mu (i <= j)."""
    pm = {}
    for i, ei in enumerate(basis.exponents):
        for j in range(i, len(basis.exponents)):
            mu = tuple(a + b for a, b in zip(ei, basis.exponents[j]))
            pm.setdefault(mu, []).append((i, j))
    return pm


class AffinePolyExpr:
    """Polynomial whose coefficients are affine in flat decision indices.

    Each monomial maps to (constant, {flat index: linear coefficient}).
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars):
        self.nvars = nvars
        self.terms = {}

    def _slot(self, exps):
        exps = tuple(exps)
        if exps not in self.terms:
            self.terms[exps] = [0.0, {}]
        return self.terms[exps]

    def add_const_poly(self, p: Polynomial, scale=1.0):
        for e, c in p.coeffs.items():
            self._slot(e)[0] += scale * c
        return self

    def add_scaled_poly(self, var_index, p: Polynomial, scale=1.0):
        """Add (scale * x_k) * p where x_k is the decision entry var_index."""
        for e, c in p.coeffs.items():
            lin = self._slot(e)[1]
            lin[var_index] = lin.get(var_index, 0.0) + scale * c
        return self

    def add_constant(self, value):
        self._slot((0,) * self.nvars)[0] += value
        return self

    def max_degree(self):
        degs = [sum(e) for e, (c, lin) in self.terms.items() if c != 0.0 or lin]
        return max(degs, default=0)

    def monomials(self):
        return [e for e, (c, lin) in self.terms.items() if c != 0.0 or lin]

    @staticmethod
    def from_polynomial(p: Polynomial):
        return AffinePolyExpr(p.nvars).add_const_poly(p)

    @staticmethod
    def quadratic_form(idx_matrix, center, nvars):
        """(x-c)^T M (x-c) with M a symmetric decision variable block."""
        expr = AffinePolyExpr(nvars)
        c = np.zeros(nvars) if center is None else np.asarray(center, dtype=float)
        for i in range(nvars):
            xi = Polynomial.variable(nvars, i) - c[i]
            for j in range(i, nvars):
                xj = Polynomial.variable(nvars, j) - c[j]
                mult = 1.0 if i == j else 2.0
                expr.add_scaled_poly(int(idx_matrix[i, j]), xi * xj, mult)
        return expr

    @staticmethod
    def gram_poly(idx_matrix, basis: MonomialBasis):
        """z(x)^T Q z(x) with Q a symmetric decision variable block."""
        expr = AffinePolyExpr(basis.nvars)
        for i, ei in enumerate(basis.exponents):
            for j in range(i, len(basis.exponents)):
                mu = tuple(a + b for a, b in zip(ei, basis.exponents[j]))
                mult = 1.0 if i == j else 2.0
                lin = expr._slot(mu)[1]
                k = int(idx_matrix[i, j])
                lin[k] = lin.get(k, 0.0) + mult
        return expr

    def mul_poly(self, p: Polynomial):
        """Return self * p (constant polynomial multiplier)."""
        out = AffinePolyExpr(self.nvars)
        for e1, (c1, lin1) in self.terms.items():
            for e2, c2 in p.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                slot = out._slot(e)
                slot[0] += c1 * c2
                for k, v in lin1.items():
                    slot[1][k] = slot[1].get(k, 0.0) + v * c2
        return out

    def __add__(self, other):
        out = AffinePolyExpr(self.nvars)
        for src in (self, other):
            for e, (c, lin) in src.terms.items():
                slot = out._slot(e)
                slot[0] += c
                for k, v in lin.items():
                    slot[1][k] = slot[1].get(k, 0.0) + v
        return out


def gram_constraints(problem: ConicProblem, expr: AffinePolyExpr,
                     basis: MonomialBasis, name, group=""):
    """Constrain expr to equal z(x)^T Q z(x) for a fresh PSD variable Q.

    One linear equality per monomial; raises DegreeOverflow if expr has a
    monomial not reachable by basis products.  Returns the Q index matrix.
    """
    pm = product_map(basis)
    for mu in expr.monomials():
        if mu not in pm:
            raise DegreeOverflow(
                f"monomial {mu} of {name} not expressible with basis degree "
                f"{basis.max_degree}"
            )
    Q = problem.layout.add_symmetric(name, len(basis))
    problem.add_psd_var_cone(f"{name}:psd", Q, group=group)
    # ordered union: all product monomials, plus any expr-only monomials
    for mu in sorted(pm, key=lambda e: (sum(e), e)):
        const, lin = expr.terms.get(mu, (0.0, {}))
        coeffs = {}
        for (i, j) in pm[mu]:
            k = int(Q[i, j])
            mult = 1.0 if i == j else 2.0
            coeffs[k] = coeffs.get(k, 0.0) + mult
        # sum(Q products) - expr = 0
        for k, v in lin.items():
            coeffs[k] = coeffs.get(k, 0.0) - v
        problem.add_equality(coeffs, -const, group=group)
    return Q


def sprocedure_emptiness(problem: ConicProblem, target: AffinePolyExpr,
                         constraints_ge, multiplier_degree, epsilon,
                         name, group=""):
    """Compile the S-procedure master constraint

        target + sum_i sigma_i * q_i - epsilon  in  Sigma[x],

    with fresh Gram-parameterized SOS multipliers sigma_i of the given even
    degree.  Certifies target >= epsilon on the region where every q_i <= 0.
    Returns (multiplier Gram index matrices, master Gram index matrix,
    master basis).
    """
    nvars = target.nvars
    if multiplier_degree % 2 != 0 or multiplier_degree < 0:
        raise ValueError("multiplier degree must be a nonnegative even integer")
    master = AffinePolyExpr(nvars) + target
    mult_grams = []
    max_deg = target.max_degree()
    for i, q in enumerate(constraints_ge):
        mb = build_basis(nvars, multiplier_degree // 2)
        G = problem.layout.add_symmetric(f"{name}:sigma{i}", len(mb))
        problem.add_psd_var_cone(f"{name}:sigma{i}:psd", G, group=group)
        sigma = AffinePolyExpr.gram_poly(G, mb)
        master = master + sigma.mul_poly(q)
        mult_grams.append(G)
        max_deg = max(max_deg, multiplier_degree + q.degree())
    if epsilon:
        master.add_constant(-epsilon)
    master_basis = build_basis(nvars, (max_deg + 1) // 2)
    Q = gram_constraints(problem, master, master_basis, f"{name}:master",
                         group=group)
    return mult_grams, Q, master_basis


def extract_sos_witness(Q_numeric, basis: MonomialBasis, tol=1e-8):
    """Factor a numeric Gram matrix into SOS witness polynomials.

    Negative eigenvalues above -tol are clipped to zero; below raises NotPSD.
    Returns p_i with sum p_i^2 ~= z^T Q z.
    """
    Q = np.asarray(Q_numeric, dtype=float)
    Q = 0.5 * (Q + Q.T)
    w, V = np.linalg.eigh(Q)
    if w[0] < -tol:
        raise NotPSD(f"Gram matrix min eigenvalue {w[0]:.3e} < -{tol:.1e}")
    w = np.clip(w, 0.0, None)
    L = (np.sqrt(w)[:, None] * V.T)  # Q = L^T L
    out = []
    for row in L:
        if np.max(np.abs(row)) < tol:
            continue
        p = Polynomial(basis.nvars, {})
        for coef, exps in zip(row, basis.exponents):
            if coef != 0.0:
                p = p + Polynomial.monomial(exps, coef)
        out.append(p)
    return out


def gram_to_polynomial(Q_numeric, basis: MonomialBasis):
    """Expand z(x)^T Q z(x) into an explicit Polynomial."""
    Q = np.asarray(Q_numeric, dtype=float)
    out = {}
    for i, ei in enumerate(basis.exponents):
        for j, ej in enumerate(basis.exponents):
            mu = tuple(a + b for a, b in zip(ei, ej))
            out[mu] = out.get(mu, 0.0) + Q[i, j]
    return Polynomial(basis.nvars, out)
