"""Conic solver backends implementing the SolverBackend contract."""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .conic import (
    INFEASIBLE,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    Solution,
    SolverBackend,
)
from .model import SolverOptions


class ClarabelBackend(SolverBackend):
    """Interior-point backend (default): accurate, with exact infeasibility
    certificates from the homogeneous embedding."""

    name = "clarabel"

    _STATUS = {
        "Solved": OPTIMAL,
        "AlmostSolved": OPTIMAL,
        "PrimalInfeasible": INFEASIBLE,
        "AlmostPrimalInfeasible": INFEASIBLE,
        "DualInfeasible": UNBOUNDED,
        "AlmostDualInfeasible": UNBOUNDED,
    }

    def solve(self, problem, options=None):
        import clarabel

        options = options or SolverOptions()
        c, A_eq, b_eq, A_in, b_in, psd = problem.standard_form(psd_lower=False)
        A = sparse.csc_matrix(
            np.vstack([A_eq, A_in] + [Ablk for _, Ablk, _ in psd])
        )
        b = np.concatenate([b_eq, b_in] + [bblk for _, _, bblk in psd])
        cones = []
        if len(b_eq):
            cones.append(clarabel.ZeroConeT(len(b_eq)))
        if len(b_in):
            cones.append(clarabel.NonnegativeConeT(len(b_in)))
        cones.extend(clarabel.PSDTriangleConeT(dim) for dim, _, _ in psd)

        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = options.max_iter
        settings.tol_feas = options.feastol
        settings.tol_gap_abs = options.feastol
        settings.tol_gap_rel = options.feastol
        P = sparse.csc_matrix((len(c), len(c)))
        try:
            sol = clarabel.DefaultSolver(P, c, A, b, cones, settings).solve()
        except Exception as exc:  # pragma: no cover - defensive
            return Solution(NUMERICAL_FAILURE, None, None, backend=self.name,
                            diagnostics=str(exc))

        status = self._STATUS.get(str(sol.status), NUMERICAL_FAILURE)
        x = np.array(sol.x) if status == OPTIMAL else None
        obj = problem.objective_value(x) if x is not None else None
        residuals = {}
        if x is not None:
            residuals["max_violation"] = problem.max_violation(x)
        return Solution(
            status=status,
            x=x,
            objective=obj,
            iterations=int(sol.iterations),
            solve_time=float(sol.solve_time),
            residuals=residuals,
            backend=self.name,
            diagnostics=str(sol.status),
        )


class ScsBackend(SolverBackend):
    """First-order (ADMM) backend; slower to high accuracy but very robust."""

    name = "scs"

    def solve(self, problem, options=None):
        import scs

        options = options or SolverOptions()
        c, A_eq, b_eq, A_in, b_in, psd = problem.standard_form(psd_lower=True)
        A = sparse.csc_matrix(
            np.vstack([A_eq, A_in] + [Ablk for _, Ablk, _ in psd])
        )
        b = np.concatenate([b_eq, b_in] + [bblk for _, _, bblk in psd])
        cone = {"z": len(b_eq), "l": len(b_in), "s": [dim for dim, _, _ in psd]}
        data = {"A": A, "b": b, "c": c}
        solver = scs.SCS(
            data,
            cone,
            verbose=False,
            eps_abs=options.feastol,
            eps_rel=options.feastol,
            max_iters=max(20000, 100 * options.max_iter),
        )
        out = solver.solve()
        raw = out["info"]["status"].lower()
        if "solved" in raw and "inaccurate" not in raw:
            status = OPTIMAL
        elif "infeasible" in raw:
            status = INFEASIBLE
        elif "unbounded" in raw:
            status = UNBOUNDED
        else:
            status = NUMERICAL_FAILURE
        x = np.array(out["x"]) if status == OPTIMAL else None
        obj = problem.objective_value(x) if x is not None else None
        residuals = {}
        if x is not None:
            residuals["max_violation"] = problem.max_violation(x)
        return Solution(
            status=status,
            x=x,
            objective=obj,
            iterations=int(out["info"]["iter"]),
            solve_time=float(out["info"]["solve_time"]) * 1e-3,
            residuals=residuals,
            backend=self.name,
            diagnostics=out["info"]["status"],
        )


def default_backend():
    return ClarabelBackend()


def get_backend(name):
    if name == "clarabel":
        return ClarabelBackend()
    if name == "scs":
        return ScsBackend()
    raise ValueError(f"unknown backend {name!r}")
