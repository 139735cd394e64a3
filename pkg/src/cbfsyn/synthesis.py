"""End-to-end pipeline: validate, prepare the center, build, solve, recover
the controller and barrier, and audit the certificate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backends import default_backend
from .conic import INFEASIBLE, OPTIMAL, Solution
from .errors import IllConditioned, Infeasible, SolverFailure, SpecInvalid
from .model import CenterData, GLOBAL, ProblemSpec, prepare_center
from .programs import (
    add_vertex_containment,
    attach_input_bound,
    build_global,
    build_local,
    solve,
)

SUPER_LEVEL_SAFE = "super_level_safe"  # global: B = {b >= 0} is invariant
SUB_LEVEL_SAFE = "sub_level_safe"  # local: B^c = {b <= 0} is invariant


@dataclass(frozen=True)
class CbfFunction:
    """Quadratic barrier b(x) = (x - c)^T Omega^{-1} (x - c) - 1."""

    c: np.ndarray
    Omega: np.ndarray
    orientation: str
    n_bar: int

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        Om = np.asarray(self.Omega, dtype=float)
        Om = 0.5 * (Om + Om.T)
        if Om.shape != (c.shape[0], c.shape[0]):
            raise SpecInvalid("Omega shape does not match the center")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "Omega", Om)
        object.__setattr__(self, "P", np.linalg.inv(Om))

    def __call__(self, x):
        xc = np.asarray(x, dtype=float).reshape(-1) - self.c
        return float(xc @ self.P @ xc - 1.0)

    @property
    def n(self):
        return self.c.shape[0]

    def inversion_residual(self):
        return float(np.max(np.abs(self.P @ self.Omega - np.eye(self.n))))


@dataclass(frozen=True)
class AffineController:
    """Affine state feedback u(x) = K (x - c) + d."""

    K: np.ndarray
    d: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        d = np.asarray(self.d, dtype=float).reshape(-1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if K.shape != (d.shape[0], c.shape[0]):
            raise SpecInvalid("controller dimensions are inconsistent")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "c", c)

    def __call__(self, x):
        xc = np.asarray(x, dtype=float).reshape(-1) - self.c
        return self.K @ xc + self.d


@dataclass
class SynthesisResult:
    """Everything a certificate audit needs, bundled with solver context."""

    spec: ProblemSpec
    center: CenterData
    cbf: CbfFunction
    controller: AffineController
    Omega: np.ndarray
    R: np.ndarray
    Y: np.ndarray
    solution: Solution
    program_tag: str
    multipliers: dict = field(default_factory=dict)
    report: object = None

    @property
    def objective(self):
        return self.solution.objective


def recover_controller(Omega, Y, c, d, cond_limit=1e12) -> AffineController:
    """K = Y Omega^{-1} by linear solve; refuses silently inaccurate gains."""
    Omega = np.asarray(Omega, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    sv = np.linalg.svd(Omega, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > cond_limit:
        raise IllConditioned(
            f"Omega condition number {cond:.3e} exceeds {cond_limit:.1e}"
        )
    # K Omega = Y  <=>  Omega^T K^T = Y^T
    K = np.linalg.solve(Omega.T, Y.T).T
    residual = np.linalg.norm(K @ Omega - Y)
    if residual > 1e-8 * max(np.linalg.norm(Y), 1.0):
        raise IllConditioned(
            f"gain recovery residual {residual:.3e} too large "
            f"(condition number {cond:.3e})"
        )
    return AffineController(K=K, d=d, c=c)


def wrap_certificate(spec: ProblemSpec, Omega, K, d=None, R=None, Y=None,
                     program_tag="external") -> SynthesisResult:
    """Package an externally obtained certificate (e.g. published, rounded
    values) so it can run through the same audit as a synthesized one."""
    center = prepare_center(spec.system, spec.center, tol=spec.options.rank_tol)
    Omega = np.asarray(Omega, dtype=float)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    d = center.d if d is None else np.asarray(d, dtype=float).reshape(-1)
    orientation = SUPER_LEVEL_SAFE if spec.mode == GLOBAL else SUB_LEVEL_SAFE
    cbf = CbfFunction(c=center.c, Omega=Omega, orientation=orientation,
                      n_bar=spec.partition.n_bar)
    controller = AffineController(K=K, d=d, c=center.c)
    return SynthesisResult(
        spec=spec,
        center=center,
        cbf=cbf,
        controller=controller,
        Omega=Omega,
        R=R,
        Y=K @ Omega if Y is None else np.atleast_2d(np.asarray(Y, dtype=float)),
        solution=Solution(status=OPTIMAL, x=None, objective=None,
                          backend="external"),
        program_tag=program_tag,
    )


def _assemble_omega(problem, x, spec):
    lay = problem.layout
    if spec.mode == GLOBAL:
        nbar = spec.partition.n_bar
        nund = spec.partition.n_under
        Obar = lay.extract("Omega_bar", x)
        Omega = np.zeros((nbar + nund, nbar + nund))
        Omega[:nbar, :nbar] = Obar
        if nund:
            Omega[nbar:, nbar:] = lay.extract("Omega_under", x)
        return Omega
    return lay.extract("Omega", x)


def _collect_multipliers(problem, x):
    out = {}
    for name, blk in problem.layout.blocks.items():
        if ":sigma" in name or name.endswith(":master"):
            out[name] = problem.layout.extract(name, x)
    return out


def synthesize(spec: ProblemSpec, backend=None, containment=None,
               verify=True) -> SynthesisResult:
    """Full pipeline; never returns an unaudited success.

    ``containment`` picks the global safe-set encoding: "sos" (default when
    the spec carries polynomials) or "vertices" (linear constraints at the
    vertices of a polytopic unsafe projection).
    """
    backend = backend or default_backend()
    center = prepare_center(spec.system, spec.center, tol=spec.options.rank_tol)

    if spec.mode == GLOBAL:
        problem = build_global(spec, center)
        if containment == "vertices" and problem.metadata["containment"] == "sos":
            add_vertex_containment(problem, spec.safe_set.vertices,
                                   center.c[: spec.partition.n_bar])
        orientation = SUPER_LEVEL_SAFE
    else:
        problem = build_local(spec, center)
        orientation = SUB_LEVEL_SAFE
    attach_input_bound(problem, spec, center)

    solution = solve(problem, backend, spec.options)
    if solution.status == INFEASIBLE:
        raise Infeasible(
            f"synthesis program infeasible ({solution.diagnostics})", solution
        )
    if solution.status != OPTIMAL:
        raise SolverFailure(
            f"backend {backend.name} returned {solution.status}: "
            f"{solution.diagnostics}"
        )

    Omega = _assemble_omega(problem, solution.x, spec)
    R = problem.layout.extract("R", solution.x)
    Y = problem.layout.extract("Y", solution.x)
    controller = recover_controller(Omega, Y, center.c, center.d)
    cbf = CbfFunction(c=center.c, Omega=Omega, orientation=orientation,
                      n_bar=spec.partition.n_bar)

    tag = spec.mode
    if spec.mode == GLOBAL:
        tag += f":{problem.metadata['containment']}"
    ib = problem.metadata.get("input_bound")
    if ib is not None:
        tag += f":{ib[0]}"
        if spec.mode != GLOBAL and ib[0] != "l2_global":
            tag += f":{spec.options.mu_mode}"

    result = SynthesisResult(
        spec=spec,
        center=center,
        cbf=cbf,
        controller=controller,
        Omega=Omega,
        R=R,
        Y=Y,
        solution=solution,
        program_tag=tag,
        # Gram blocks stay allocated after a vertex-containment swap but are
        # no longer constrained, so only surface them on the SOS path
        multipliers=(
            _collect_multipliers(problem, solution.x)
            if problem.metadata.get("containment") != "vertices" else {}
        ),
    )
    if verify:
        from .verify import Tolerances, check_certificate

        result.report = check_certificate(
            result, Tolerances(seed=spec.options.seed)
        )
    return result
