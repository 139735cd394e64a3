"""Assembly of the synthesis convex programs as standard-form SDPs.

Builders for the global and local designs, the vertex-containment variant
of the global safe-set constraint, and the input-bound blocks (L2, Linf,
polytope rowwise, and the global L2 extrapolation).
"""

from __future__ import annotations

import numpy as np

from .conic import ConicProblem, OPTIMAL, Solution
from .errors import BudgetExhausted, EmptyVertexList, SpecInvalid
from .model import (
    GLOBAL,
    L2,
    LINF,
    LOCAL,
    NO_BOUND,
    CenterData,
    ProblemSpec,
    SolverOptions,
    validate_spec,
)
from .sos import AffinePolyExpr, sprocedure_emptiness

SOS_GROUP = "safe_set_sos"


def _sym_entry(dim, i, j):
    E = np.zeros((dim, dim))
    E[i, j] = E[j, i] = 1.0
    return E


def _sym_block_entries(idx_matrix, dim, offset):
    """(flat index, dim x dim symmetric embedding) pairs for a symmetric
    variable block placed at [offset:offset+k, offset:offset+k]."""
    k = idx_matrix.shape[0]
    out = []
    for i in range(k):
        for j in range(i, k):
            F = np.zeros((dim, dim))
            F[offset + i, offset + j] = F[offset + j, offset + i] = 1.0
            out.append((int(idx_matrix[i, j]), F))
    return out


def _accumulate(terms, k, F):
    if k in terms:
        terms[k] = terms[k] + F
    else:
        terms[k] = F


def _invariance_terms(system, omega_entries, Y_idx):
    """Coefficient matrices of Omega A^T + Y^T B^T + A Omega + B Y."""
    A, B = system.A, system.B
    n, m = system.n, system.m
    terms = {}
    for k, D in omega_entries:
        _accumulate(terms, k, D @ A.T + A @ D)
    for r in range(m):
        for s in range(n):
            D = np.zeros((m, n))
            D[r, s] = 1.0
            BD = B @ D
            _accumulate(terms, int(Y_idx[r, s]), BD + BD.T)
    return {k: F for k, F in terms.items() if np.any(F)}


def _strict_psd(problem, name, idx_matrix, delta, sign=1.0):
    """sign * X >= delta I, closing the strict inequality."""
    dim = idx_matrix.shape[0]
    terms = {int(idx_matrix[i, j]): sign * _sym_entry(dim, i, j)
             for i in range(dim) for j in range(i, dim)}
    problem.add_lmi(name, -delta * np.eye(dim), terms, dim)


def _schur_r_omega(problem, R_idx, O_idx, name):
    """[[R, I], [I, Omega]] >= 0, linearizing R >= Omega^{-1}."""
    dim = R_idx.shape[0]
    F0 = np.zeros((2 * dim, 2 * dim))
    F0[:dim, dim:] = np.eye(dim)
    F0[dim:, :dim] = np.eye(dim)
    terms = {}
    for k, D in _sym_block_entries(R_idx, 2 * dim, 0):
        _accumulate(terms, k, D)
    for k, D in _sym_block_entries(O_idx, 2 * dim, dim):
        _accumulate(terms, k, D)
    problem.add_lmi(name, F0, terms, 2 * dim)


def _level_set_target(R_idx, center, nvars):
    """AffinePolyExpr for 1 - (x - c)^T R (x - c), the inside-the-unit-level
    condition of the barrier candidate."""
    target = AffinePolyExpr(nvars).add_constant(1.0)
    quad = AffinePolyExpr.quadratic_form(R_idx, center, nvars)
    for e, (c, lin) in quad.terms.items():
        slot = target._slot(e)
        slot[0] -= c
        for k, v in lin.items():
            slot[1][k] = slot[1].get(k, 0.0) - v
    return target


def _index_matrix(problem, name):
    blk = problem.layout.blocks[name]
    dim = blk.shape[0]
    idx = np.zeros((dim, dim), dtype=int)
    k = blk.offset
    for i in range(dim):
        for j in range(i, dim):
            idx[i, j] = idx[j, i] = k
            k += 1
    return idx


def _dense_index_matrix(problem, name):
    blk = problem.layout.blocks[name]
    return np.arange(blk.offset, blk.offset + blk.size).reshape(blk.shape)


def build_global(spec: ProblemSpec, center: CenterData) -> ConicProblem:
    """Global design: minimize the trace of the safe-subspace shape matrix
    subject to positive/negative definite splitting, invariance in the
    expanding (>= 0) sense, the Schur link to R, and the S-procedure
    certificate that the ellipsoid projection avoids the unsafe region."""
    report = validate_spec(spec)
    if not report.valid or spec.mode != GLOBAL:
        raise SpecInvalid("; ".join(report.problems) or "spec is not in global mode")
    sysm, part, opts = spec.system, spec.partition, spec.options
    n, m = sysm.n, sysm.m
    nbar, nund = part.n_bar, part.n_under

    problem = ConicProblem()
    lay = problem.layout
    Obar = lay.add_symmetric("Omega_bar", nbar)
    Ound = lay.add_symmetric("Omega_under", nund) if nund else None
    R = lay.add_symmetric("R", nbar)
    Y = lay.add_dense("Y", m, n)
    problem.set_objective_trace(Obar)
    problem.variable_bound = opts.variable_bound
    problem.metadata.update(program="global", n=n, m=m, n_bar=nbar,
                            containment="sos")

    _strict_psd(problem, "Omega_bar:pd", Obar, opts.delta)
    if Ound is not None:
        _strict_psd(problem, "Omega_under:nd", Ound, opts.delta, sign=-1.0)

    omega_entries = _sym_block_entries(Obar, n, 0)
    if Ound is not None:
        omega_entries += _sym_block_entries(Ound, n, nbar)
    problem.add_lmi("invariance", np.zeros((n, n)),
                    _invariance_terms(sysm, omega_entries, Y), n)
    _schur_r_omega(problem, R, Obar, "schur_R_Omega_bar")

    if spec.safe_set.polynomials:
        target = _level_set_target(R, center.c[:nbar], nbar)
        sprocedure_emptiness(
            problem,
            target,
            list(spec.safe_set.polynomials),
            spec.multiplier_degree,
            opts.sos_epsilon,
            "safe",
            group=SOS_GROUP,
        )
    elif spec.safe_set.vertices:
        add_vertex_containment(problem, spec.safe_set.vertices, center.c[:nbar])
    return problem


def add_vertex_containment(problem: ConicProblem, vertices, cbar) -> ConicProblem:
    """Swap the safe-set SOS certificate for per-vertex linear constraints
    -(v - cbar)^T R (v - cbar) + 1 >= 0 when the unsafe projection is a
    polytope given by its vertex list."""
    if len(vertices) == 0:
        raise EmptyVertexList("vertex containment needs at least one vertex")
    if problem.metadata.get("program") != "global":
        raise SpecInvalid("vertex containment applies to global-mode problems")
    problem.remove_group(SOS_GROUP)
    cbar = np.asarray(cbar, dtype=float).reshape(-1)
    nbar = cbar.shape[0]
    R = _index_matrix(problem, "R")
    for v in vertices:
        vc = np.asarray(v, dtype=float).reshape(-1) - cbar
        coeffs = {}
        for i in range(nbar):
            for j in range(i, nbar):
                mult = 1.0 if i == j else 2.0
                coeffs[int(R[i, j])] = -mult * vc[i] * vc[j]
        problem.add_inequality(coeffs, 1.0, group="vertex_containment")
    problem.metadata["containment"] = "vertices"
    return problem


def build_local(spec: ProblemSpec, center: CenterData) -> ConicProblem:
    """Local design: invariance in the contracting (<= 0) sense, the
    S-procedure containment of the initial set, and exact linear
    containment of the ellipsoid inside the halfspace safe set."""
    report = validate_spec(spec)
    if not report.valid or spec.mode != LOCAL:
        raise SpecInvalid("; ".join(report.problems) or "spec is not in local mode")
    sysm, opts = spec.system, spec.options
    n, m = sysm.n, sysm.m

    problem = ConicProblem()
    lay = problem.layout
    Om = lay.add_symmetric("Omega", n)
    R = lay.add_symmetric("R", n)
    Y = lay.add_dense("Y", m, n)
    problem.set_objective_trace(Om)
    problem.metadata.update(program="local", n=n, m=m, n_bar=n)

    _strict_psd(problem, "Omega:pd", Om, opts.delta)
    inv_terms = _invariance_terms(sysm, _sym_block_entries(Om, n, 0), Y)
    problem.add_nsd_lmi("invariance", np.zeros((n, n)), inv_terms, n)
    _schur_r_omega(problem, R, Om, "schur_R_Omega")

    # 1 - (x-c)^T R (x-c) - sum sigma_i w_i in Sigma[x]: every point with all
    # w_i <= 0 (the initial set) lies inside the unit level set of R.
    target = _level_set_target(R, center.c, n)
    negated = [-w for w in spec.initial_set.polynomials]
    sprocedure_emptiness(problem, target, negated, spec.multiplier_degree,
                         0.0, "init", group="initial_set_sos")

    # 1 - a_i^T Omega a_i >= 0 keeps the ellipsoid inside each halfspace.
    for a in spec.safe_set.halfspaces:
        coeffs = {}
        for i in range(n):
            for j in range(i, n):
                mult = 1.0 if i == j else 2.0
                coeffs[int(Om[i, j])] = -mult * a[i] * a[j]
        problem.add_inequality(coeffs, 1.0, group="halfspace_containment")
    return problem


def _norm_bound_block(problem, S, zeta, eps, d, tag, mu_mode, delta):
    """Certify sup ||S u(x)||^2 <= zeta - eps over the unit level set.

    S is a selector matrix applied to the controller output (identity for
    the full L2 norm, a single coordinate row for the Linf case).  The
    budget t = zeta - eps - ||S d||^2 must be positive.  The fixed-mu block
    uses mu = t/2, the maximizer of mu (t - mu); the free-mu form lifts the
    mu^2 term through a one-row Schur complement so mu stays a decision
    variable and the block remains an LMI.
    """
    n = problem.metadata["n"]
    m = problem.metadata["m"]
    S = np.atleast_2d(np.asarray(S, dtype=float))
    d_sel = S @ np.asarray(d, dtype=float).reshape(-1)
    t = float(zeta - eps - d_sel @ d_sel)
    if t <= 0:
        raise BudgetExhausted(
            f"{tag}: offset consumes the norm budget "
            f"(zeta - eps - ||d||^2 = {t:.3e} <= 0)"
        )
    rows = S.shape[0]
    dim11 = n + 1 + rows
    Om = _index_matrix(problem, "Omega")
    Y = _dense_index_matrix(problem, "Y")

    terms = {}
    for k, D in _sym_block_entries(Om, dim11, 0):
        _accumulate(terms, k, D)
    for r in range(m):
        col = S[:, r]
        if not np.any(col):
            continue
        for s in range(n):
            F = np.zeros((dim11, dim11))
            for br in range(rows):
                w = col[br]
                if w:
                    # column n carries (S Y)^T (S d), trailing block (S Y)^T
                    F[s, n] += w * d_sel[br]
                    F[s, n + 1 + br] += w
            _accumulate(terms, int(Y[r, s]), F + F.T)

    if mu_mode == "fixed":
        mu = t / 2.0
        F0 = np.zeros((dim11, dim11))
        F0[n, n] = mu * (t - mu)
        for br in range(rows):
            F0[n + 1 + br, n + 1 + br] = mu
        problem.add_lmi(tag, F0, terms, dim11)
        problem.metadata.setdefault("mu_values", {})[tag] = mu
    else:
        # [[Pi11(mu), mu e_n], [mu e_n^T, 1]] >= 0 with Pi11 affine in mu:
        # the Schur complement restores the mu (t - mu) middle entry.
        dim = dim11 + 1
        mu_k = problem.layout.add_scalar(f"{tag}:mu")
        F0 = np.zeros((dim, dim))
        F0[dim11, dim11] = 1.0
        big_terms = {}
        for k, F in terms.items():
            G = np.zeros((dim, dim))
            G[:dim11, :dim11] = F
            big_terms[k] = G
        Gmu = np.zeros((dim, dim))
        Gmu[n, n] = t
        for br in range(rows):
            Gmu[n + 1 + br, n + 1 + br] = 1.0
        Gmu[n, dim11] = Gmu[dim11, n] = 1.0
        big_terms[mu_k] = Gmu
        problem.add_lmi(tag, F0, big_terms, dim)
        problem.add_inequality({mu_k: 1.0}, -delta)
        problem.add_inequality({mu_k: -1.0}, t - delta)


def add_input_bound_l2(problem: ConicProblem, zeta, eps, d,
                       mu_mode="fixed", delta=1e-6) -> ConicProblem:
    """||u(x)||_2^2 <= zeta on the invariant set (local mode)."""
    if problem.metadata.get("program") != "local":
        raise SpecInvalid("L2 input bound applies to local-mode problems")
    m = problem.metadata["m"]
    _norm_bound_block(problem, np.eye(m), zeta, eps, d, "input_l2",
                      mu_mode, delta)
    problem.metadata["input_bound"] = ("l2", float(zeta), float(eps), mu_mode)
    return problem


def add_input_bound_linf(problem: ConicProblem, zeta, eps, d,
                         mu_mode="fixed", delta=1e-6) -> ConicProblem:
    """u_i(x)^2 <= zeta per coordinate on the invariant set."""
    if problem.metadata.get("program") != "local":
        raise SpecInvalid("Linf input bound applies to local-mode problems")
    m = problem.metadata["m"]
    for i in range(m):
        _norm_bound_block(problem, np.eye(m)[i : i + 1], zeta, eps, d,
                          f"input_linf{i}", mu_mode, delta)
    problem.metadata["input_bound"] = ("linf", float(zeta), float(eps), mu_mode)
    return problem


def add_input_bound_polytope(problem: ConicProblem, H, h, eps, d,
                             mu_mode="fixed", delta=1e-6) -> ConicProblem:
    """H u(x) <= h rowwise on the invariant set (local mode).

    Each row reduces to a scalar block of dimension n + 1 with budget
    t_i = 2 (h_i - H_i d) - eps.
    """
    if problem.metadata.get("program") != "local":
        raise SpecInvalid("polytope input bound applies to local-mode problems")
    H = np.atleast_2d(np.asarray(H, dtype=float))
    h = np.asarray(h, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    n = problem.metadata["n"]
    m = problem.metadata["m"]
    Om = _index_matrix(problem, "Omega")
    Y = _dense_index_matrix(problem, "Y")
    for i in range(H.shape[0]):
        Hi = H[i]
        t = float(2.0 * (h[i] - Hi @ d) - eps)
        if t <= 0:
            raise BudgetExhausted(
                f"polytope row {i}: 2 (h_i - H_i d) - eps = {t:.3e} <= 0"
            )
        dim11 = n + 1
        terms = {}
        for k, D in _sym_block_entries(Om, dim11, 0):
            _accumulate(terms, k, D)
        for r in range(m):
            if Hi[r] == 0.0:
                continue
            for s in range(n):
                F = np.zeros((dim11, dim11))
                F[s, n] = Hi[r]
                _accumulate(terms, int(Y[r, s]), F + F.T)
        tag = f"input_poly{i}"
        if mu_mode == "fixed":
            mu = t / 2.0
            F0 = np.zeros((dim11, dim11))
            F0[n, n] = mu * (t - mu)
            problem.add_lmi(tag, F0, terms, dim11)
            problem.metadata.setdefault("mu_values", {})[tag] = mu
        else:
            dim = dim11 + 1
            mu_k = problem.layout.add_scalar(f"{tag}:mu")
            F0 = np.zeros((dim, dim))
            F0[dim11, dim11] = 1.0
            big_terms = {}
            for k, F in terms.items():
                G = np.zeros((dim, dim))
                G[:dim11, :dim11] = F
                big_terms[k] = G
            Gmu = np.zeros((dim, dim))
            Gmu[n, n] = t
            Gmu[n, dim11] = Gmu[dim11, n] = 1.0
            big_terms[mu_k] = Gmu
            problem.add_lmi(tag, F0, big_terms, dim)
            problem.add_inequality({mu_k: 1.0}, -delta)
            problem.add_inequality({mu_k: -1.0}, t - delta)
    problem.metadata["input_bound"] = ("polytope", H.tolist(), h.tolist(),
                                       float(eps), mu_mode)
    return problem


def add_global_input_bound_l2(problem: ConicProblem, zeta, eps) -> ConicProblem:
    """[[ (zeta - eps) I, Y ], [ Y^T, Omega ]] >= 0, bounding the supremum of
    ||u||^2 over the ellipsoid.  Requires a fully safe partition (n_under = 0)
    and a zero controller offset."""
    if problem.metadata.get("program") != "global":
        raise SpecInvalid("global input bound applies to global-mode problems")
    if problem.metadata["n"] != problem.metadata["n_bar"]:
        raise SpecInvalid("global input bound requires n_under = 0")
    if zeta - eps <= 0:
        raise BudgetExhausted("zeta - eps must be positive")
    n = problem.metadata["n"]
    m = problem.metadata["m"]
    Om = _index_matrix(problem, "Omega_bar")
    Y = _dense_index_matrix(problem, "Y")
    dim = m + n
    F0 = np.zeros((dim, dim))
    F0[:m, :m] = (zeta - eps) * np.eye(m)
    terms = {}
    for k, D in _sym_block_entries(Om, dim, m):
        _accumulate(terms, k, D)
    for r in range(m):
        for s in range(n):
            F = np.zeros((dim, dim))
            F[r, m + s] = 1.0
            _accumulate(terms, int(Y[r, s]), F + F.T)
    problem.add_lmi("input_l2_global", F0, terms, dim)
    problem.metadata["input_bound"] = ("l2_global", float(zeta), float(eps))
    return problem


def attach_input_bound(problem, spec: ProblemSpec, center: CenterData):
    """Route the spec's input bound to the matching block builder."""
    ib = spec.input_bound
    if ib is None or ib.variant == NO_BOUND:
        return problem
    opts = spec.options
    if spec.mode == GLOBAL:
        if ib.variant != L2:
            raise SpecInvalid("global mode supports only the L2 input bound")
        if np.linalg.norm(center.d) > 1e-9 * max(1.0, np.linalg.norm(center.c)):
            raise SpecInvalid("global L2 input bound requires a zero offset d")
        return add_global_input_bound_l2(problem, ib.zeta, ib.epsilon)
    if ib.variant == L2:
        return add_input_bound_l2(problem, ib.zeta, ib.epsilon, center.d,
                                  opts.mu_mode, opts.delta)
    if ib.variant == LINF:
        return add_input_bound_linf(problem, ib.zeta, ib.epsilon, center.d,
                                    opts.mu_mode, opts.delta)
    return add_input_bound_polytope(problem, ib.H, ib.h, ib.epsilon, center.d,
                                    opts.mu_mode, opts.delta)


def solve(problem: ConicProblem, backend, options=None) -> Solution:
    """Run the problem through a backend and record feasibility residuals."""
    options = options or SolverOptions()
    solution = backend.solve(problem, options)
    if solution.status == OPTIMAL:
        solution.residuals["max_violation"] = problem.max_violation(solution.x)
    return solution
