"""Program builders: structure, input-bound encodings, error paths."""

import numpy as np
import pytest

from cbfsyn.backends import default_backend
from cbfsyn.conic import OPTIMAL
from cbfsyn.errors import BudgetExhausted, EmptyVertexList, SpecInvalid
from cbfsyn.model import (
    GLOBAL,
    HALFSPACES,
    InitialSetSpec,
    InputBoundSpec,
    LinearSystem,
    LOCAL,
    Polynomial,
    ProblemSpec,
    SafeSetSpec,
    SolverOptions,
    StatePartition,
    UNION,
    prepare_center,
)
from cbfsyn.programs import (
    add_vertex_containment,
    attach_input_bound,
    build_global,
    build_local,
    solve,
)


def _line_spec(**kw):
    # 1-D position with a velocity integrator; unsafe interval |x1| < 1
    sys_ = LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]),
                        np.array([[0.0], [1.0]]))
    base = dict(
        system=sys_,
        partition=StatePartition(1, 1),
        mode=GLOBAL,
        safe_set=SafeSetSpec(
            UNION, polynomials=(Polynomial(1, {(2,): 1.0, (0,): -1.0}),)),
        center=np.zeros(2),
    )
    base.update(kw)
    return ProblemSpec(**base)


def _disk_spec(**kw):
    sys_ = LinearSystem(np.array([[-1.0, -1.0], [0.0, -1.0]]),
                        np.array([[1.0], [1.0]]))
    base = dict(
        system=sys_,
        partition=StatePartition(2, 0),
        mode=GLOBAL,
        safe_set=SafeSetSpec(
            UNION,
            polynomials=(Polynomial(
                2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -1.0}),)),
        center=np.zeros(2),
    )
    base.update(kw)
    return ProblemSpec(**base)


def _local_spec(**kw):
    sys_ = LinearSystem(np.array([[-1.0, -1.0], [0.0, -1.0]]),
                        np.array([[1.0], [1.0]]))
    base = dict(
        system=sys_,
        partition=StatePartition(2, 0),
        mode=LOCAL,
        safe_set=SafeSetSpec(
            HALFSPACES,
            halfspaces=np.array([[-0.25, 0.0], [0.25, 0.0],
                                 [0.0, -0.25], [0.0, 0.25]])),
        center=np.zeros(2),
        initial_set=InitialSetSpec((Polynomial(
            2, {(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0}),)),
    )
    base.update(kw)
    return ProblemSpec(**base)


def _solve(problem, options=None):
    return solve(problem, default_backend(), options)


# -- global program ----------------------------------------------------------------


def test_global_line_program_structure():
    spec = _line_spec()
    problem = build_global(spec, prepare_center(spec.system, spec.center))
    names = set(problem.layout.blocks)
    assert {"Omega_bar", "Omega_under", "R", "Y"} <= names
    assert problem.metadata["program"] == "global"
    assert problem.metadata["containment"] == "sos"


def test_global_line_optimum_near_one():
    # largest safe ellipsoid in the 1-D projection has Omega_bar -> 1
    spec = _line_spec()
    problem = build_global(spec, prepare_center(spec.system, spec.center))
    sol = _solve(problem, spec.options)
    assert sol.status == OPTIMAL
    obar = problem.layout.extract("Omega_bar", sol.x)[0, 0]
    assert 1.0 < obar <= 1.1


def test_global_invariance_lmi_holds():
    spec = _disk_spec()
    center = prepare_center(spec.system, spec.center)
    problem = build_global(spec, center)
    sol = _solve(problem, spec.options)
    assert sol.status == OPTIMAL
    Omega = problem.layout.extract("Omega_bar", sol.x)
    Y = problem.layout.extract("Y", sol.x)
    A, B = spec.system.A, spec.system.B
    M = Omega @ A.T + Y.T @ B.T + A @ Omega + B @ Y
    assert np.linalg.eigvalsh(M)[0] > -1e-7


def test_global_schur_links_r_to_omega():
    spec = _disk_spec()
    problem = build_global(spec, prepare_center(spec.system, spec.center))
    sol = _solve(problem, spec.options)
    R = problem.layout.extract("R", sol.x)
    Omega = problem.layout.extract("Omega_bar", sol.x)
    # R >= Omega^{-1}
    assert np.linalg.eigvalsh(R - np.linalg.inv(Omega))[0] > -1e-6


# -- vertex containment ------------------------------------------------------------


def test_vertex_containment_swaps_groups():
    spec = _disk_spec()
    problem = build_global(spec, prepare_center(spec.system, spec.center))
    n_ineq_before = len(problem.inequalities)
    square = [np.array([1.0, 1.0]), np.array([-1.0, 1.0]),
              np.array([-1.0, -1.0]), np.array([1.0, -1.0])]
    add_vertex_containment(problem, square, np.zeros(2))
    assert problem.metadata["containment"] == "vertices"
    assert len(problem.inequalities) >= n_ineq_before + 4
    sol = _solve(problem, spec.options)
    assert sol.status == OPTIMAL
    R = problem.layout.extract("R", sol.x)
    for v in square:
        assert 1.0 - v @ R @ v >= -1e-6


def test_vertex_containment_rejects_empty():
    spec = _disk_spec()
    problem = build_global(spec, prepare_center(spec.system, spec.center))
    with pytest.raises(EmptyVertexList):
        add_vertex_containment(problem, [], np.zeros(2))


def test_vertex_containment_rejects_local():
    spec = _local_spec()
    problem = build_local(spec, prepare_center(spec.system, spec.center))
    with pytest.raises(SpecInvalid):
        add_vertex_containment(problem, [np.ones(2)], np.zeros(2))


# -- local program -----------------------------------------------------------------


def test_local_program_solves_and_contains():
    spec = _local_spec()
    center = prepare_center(spec.system, spec.center)
    problem = build_local(spec, center)
    sol = _solve(problem, spec.options)
    assert sol.status == OPTIMAL
    Omega = problem.layout.extract("Omega", sol.x)
    # contained in every arena halfspace: 1 - a' Omega a >= 0
    for a in spec.safe_set.halfspaces:
        assert 1.0 - a @ Omega @ a >= -1e-7
    # contractive invariance
    Y = problem.layout.extract("Y", sol.x)
    A, B = spec.system.A, spec.system.B
    M = Omega @ A.T + Y.T @ B.T + A @ Omega + B @ Y
    assert np.linalg.eigvalsh(M)[-1] < 1e-7


def test_local_objective_at_least_initial_ball():
    # the ellipsoid must contain the radius-1 start ball: tr(Omega) >= 2
    spec = _local_spec()
    problem = build_local(spec, prepare_center(spec.system, spec.center))
    sol = _solve(problem, spec.options)
    assert sol.objective >= 2.0 - 1e-6


# -- input bounds ------------------------------------------------------------------


@pytest.mark.parametrize("variant,mu_mode", [
    ("l2", "fixed"), ("l2", "lifted"),
    ("linf", "fixed"), ("linf", "lifted"),
])
def test_local_norm_bounds_solve(variant, mu_mode):
    spec = _local_spec(
        input_bound=InputBoundSpec(variant=variant, zeta=9.0),
        options=SolverOptions(mu_mode=mu_mode),
    )
    center = prepare_center(spec.system, spec.center)
    problem = build_local(spec, center)
    attach_input_bound(problem, spec, center)
    assert problem.metadata["input_bound"][0] == variant
    sol = _solve(problem, spec.options)
    assert sol.status == OPTIMAL


def test_local_polytope_bound_solves():
    spec = _local_spec(
        input_bound=InputBoundSpec(
            variant="polytope", H=np.array([[1.0], [-1.0]]),
            h=np.array([3.0, 3.0])),
    )
    center = prepare_center(spec.system, spec.center)
    problem = build_local(spec, center)
    attach_input_bound(problem, spec, center)
    sol = _solve(problem, spec.options)
    assert sol.status == OPTIMAL


def test_budget_exhausted_raises():
    # equilibrium offset d = 1 at center (0, 1); zeta below ||d||^2 cannot work
    spec = _local_spec(
        center=np.array([0.0, 1.0]),
        initial_set=InitialSetSpec((Polynomial(
            2, {(0, 0): -0.99, (2, 0): -1.0, (0, 2): -1.0, (0, 1): 2.0}),)),
        input_bound=InputBoundSpec(variant="l2", zeta=0.5),
    )
    center = prepare_center(spec.system, spec.center)
    assert abs(center.d[0] - 1.0) < 1e-9
    problem = build_local(spec, center)
    with pytest.raises(BudgetExhausted):
        attach_input_bound(problem, spec, center)


def test_global_l2_requires_zero_offset():
    # a global problem whose center forces d != 0 cannot take the global bound
    sys_ = LinearSystem(np.array([[-1.0, -1.0], [0.0, -1.0]]),
                        np.array([[1.0], [1.0]]))
    spec = _disk_spec(
        system=sys_,
        center=np.array([0.0, 3.0]),
        safe_set=SafeSetSpec(
            UNION,
            polynomials=(Polynomial(
                2, {(2, 0): 1.0, (0, 2): 1.0, (0, 1): -6.0, (0, 0): 8.0}),)),
        input_bound=InputBoundSpec(variant="l2", zeta=8.0),
    )
    center = prepare_center(spec.system, spec.center)
    assert np.linalg.norm(center.d) > 1e-6
    problem = build_global(spec, center)
    with pytest.raises(SpecInvalid):
        attach_input_bound(problem, spec, center)


def test_global_rejects_non_l2_bound():
    # validation catches the unsupported combination before any compilation
    spec = _disk_spec(input_bound=InputBoundSpec(variant="linf", zeta=4.0))
    center = prepare_center(spec.system, spec.center)
    with pytest.raises(SpecInvalid):
        build_global(spec, center)


def test_lifted_no_looser_than_fixed():
    # the lifted encoding searches over mu, so its optimum cannot be worse
    objs = {}
    for mu_mode in ("fixed", "lifted"):
        spec = _local_spec(
            input_bound=InputBoundSpec(variant="l2", zeta=4.0),
            options=SolverOptions(mu_mode=mu_mode),
        )
        center = prepare_center(spec.system, spec.center)
        problem = build_local(spec, center)
        attach_input_bound(problem, spec, center)
        sol = _solve(problem, spec.options)
        assert sol.status == OPTIMAL
        objs[mu_mode] = sol.objective
    assert objs["lifted"] <= objs["fixed"] + 1e-6
