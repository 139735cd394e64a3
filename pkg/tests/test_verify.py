"""Verification layer: eigenvalue audits, suprema, simulation, safety filter."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbfsyn.errors import UnboundedControl
from cbfsyn.model import (
    GLOBAL,
    InputBoundSpec,
    LinearSystem,
    Polynomial,
    ProblemSpec,
    SafeSetSpec,
    StatePartition,
    UNION,
)
from cbfsyn.synthesis import AffineController, CbfFunction, wrap_certificate
from cbfsyn.synthesis import SUB_LEVEL_SAFE, SUPER_LEVEL_SAFE
from cbfsyn.verify import (
    Tolerances,
    cbf_qp_reference,
    check_certificate,
    containment_oracle,
    invariance_matrix,
    pathology_scan,
    sample_ellipsoid_boundary,
    sample_region,
    simulate_closed_loop,
    sup_input,
    _sup_affine_norm_sq,
)


def _disk_spec():
    sys_ = LinearSystem(np.array([[-1.0, -1.0], [0.0, -1.0]]),
                        np.array([[1.0], [1.0]]))
    return ProblemSpec(
        system=sys_,
        partition=StatePartition(2, 0),
        mode=GLOBAL,
        safe_set=SafeSetSpec(
            UNION,
            polynomials=(Polynomial(
                2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -1.0}),)),
        center=np.zeros(2),
    )


CASE1_P = np.array([[0.88391, -0.253835], [-0.253835, 0.25205]])
CASE1_K = np.array([[1.4164, 0.59702]])


def _case1_result(scale=1.0):
    return wrap_certificate(_disk_spec(), np.linalg.inv(CASE1_P) * scale,
                            CASE1_K, program_tag="published")


# -- invariance --------------------------------------------------------------------


def test_invariance_matrix_formula():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 2))
    P = np.eye(3)
    K = rng.standard_normal((2, 3))
    M = invariance_matrix(A, B, P, K)
    Acl = A + B @ K
    assert np.allclose(M, Acl.T @ P + P @ Acl)
    assert np.allclose(M, M.T)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_invariance_eigenvalue_iff_sampled_derivative(seed):
    # min eig(M) >= 0 exactly when the sampled quadratic form is nonnegative
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((2, 2))
    B = rng.standard_normal((2, 1))
    K = rng.standard_normal((1, 2))
    L = rng.standard_normal((2, 2))
    P = L.T @ L + 0.1 * np.eye(2)
    M = invariance_matrix(A, B, P, K)
    eigmin = np.linalg.eigvalsh(M)[0]
    pts = rng.standard_normal((10_000, 2))
    vals = np.einsum("ij,jk,ik->i", pts, M, pts)
    norms = np.einsum("ij,ij->i", pts, pts)
    if eigmin >= 0.0:
        assert np.all(vals >= -1e-9 * norms)
    else:
        assert np.min(vals / norms) < 0.0


# -- sampling ----------------------------------------------------------------------


def test_sample_region_hits_target():
    disk = [Polynomial(2, {(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0})]
    rng = np.random.default_rng(1)
    pts = sample_region(disk, np.zeros(2), 5.0, 500, rng)
    assert len(pts) == 500
    assert np.all(np.einsum("ij,ij->i", pts, pts) <= 1.0 + 1e-12)


def test_sample_region_refines_to_thin_set():
    # thin annulus far from the center: rejection alone would starve
    ring = [Polynomial(2, {(0, 0): -15.99, (2, 0): -1.0, (0, 2): -1.0,
                           (1, 0): 8.0})]  # (x-4)^2 + y^2 <= 0.01
    rng = np.random.default_rng(2)
    pts = sample_region(ring, np.zeros(2), 5.0, 200, rng)
    assert len(pts) == 200
    assert np.all((pts[:, 0] - 4.0) ** 2 + pts[:, 1] ** 2 <= 0.01 + 1e-9)


def test_sample_ellipsoid_boundary_on_shell():
    Omega = np.array([[4.0, 1.0], [1.0, 2.0]])
    c = np.array([1.0, -1.0])
    rng = np.random.default_rng(3)
    pts = sample_ellipsoid_boundary(Omega, c, 300, rng)
    P = np.linalg.inv(Omega)
    vals = np.einsum("ij,jk,ik->i", pts - c, P, pts - c)
    assert np.allclose(vals, 1.0, atol=1e-9)


def test_containment_oracle_negative_control():
    # the published certificate passes; shrinking Omega by 0.5 must fail
    assert containment_oracle(_case1_result()) == []
    bad = containment_oracle(_case1_result(scale=0.5))
    assert len(bad) > 0


# -- input suprema -----------------------------------------------------------------


def test_sup_affine_norm_sq_analytic():
    # M = diag(2, 1), d = 0: sup ||Mz||^2 over ||z|| <= 1 is 4
    sup, zstar = _sup_affine_norm_sq(np.diag([2.0, 1.0]), np.zeros(2))
    assert sup == pytest.approx(4.0, rel=1e-9)
    assert abs(zstar[0]) == pytest.approx(1.0, rel=1e-9)


def test_sup_affine_norm_sq_with_offset():
    # 1-D: sup (2z + 3)^2 over |z| <= 1 is 25
    sup, zstar = _sup_affine_norm_sq(np.array([[2.0]]), np.array([3.0]))
    assert sup == pytest.approx(25.0, rel=1e-9)
    assert zstar[0] == pytest.approx(1.0, rel=1e-9)


def test_sup_affine_norm_sq_hard_case():
    # d orthogonal to the top eigenspace: the classic degenerate branch
    M = np.diag([2.0, 1.0])
    d = np.array([0.0, 0.5])
    sup, zstar = _sup_affine_norm_sq(M, d)
    val = np.sum((M @ zstar + d) ** 2)
    assert val == pytest.approx(sup, rel=1e-9)
    # sampled check
    rng = np.random.default_rng(4)
    z = rng.standard_normal((200_000, 2))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    sampled = np.max(np.sum((z @ M.T + d) ** 2, axis=1))
    assert sampled <= sup * (1.0 + 1e-6)
    assert sampled >= sup * (1.0 - 1e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_sup_affine_norm_sq_random_vs_sampling(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4))
    n = int(rng.integers(1, 4))
    M = rng.standard_normal((m, n))
    d = rng.standard_normal(m)
    sup, zstar = _sup_affine_norm_sq(M, d)
    assert np.sum((M @ zstar + d) ** 2) == pytest.approx(sup, rel=1e-8)
    z = rng.standard_normal((50_000, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    sampled = float(np.max(np.sum((z @ M.T + d) ** 2, axis=1)))
    assert sampled <= sup * (1.0 + 1e-9) + 1e-12
    assert sampled >= sup * (1.0 - 1e-2)


def test_sup_input_l2_linf_polytope():
    cbf = CbfFunction(c=np.zeros(2), Omega=np.diag([4.0, 1.0]),
                      orientation=SUB_LEVEL_SAFE, n_bar=2)
    ctrl = AffineController(K=np.array([[0.5, 0.0], [0.0, 1.0]]),
                            d=np.zeros(2), c=np.zeros(2))
    # K L = diag(1, 1), so sup over ||z|| <= 1 of ||K L z||^2 = 1
    (name, sup, limit), = sup_input(ctrl, cbf, InputBoundSpec("l2", zeta=4.0))
    assert name == "l2" and sup == pytest.approx(1.0, rel=1e-9)
    rows = sup_input(ctrl, cbf, InputBoundSpec("linf", zeta=4.0))
    assert [pytest.approx(1.0, rel=1e-9)] * 2 == [s for _, s, _ in rows]
    rows = sup_input(ctrl, cbf,
                     InputBoundSpec("polytope", H=np.array([[1.0, 0.0]]),
                                    h=np.array([2.0])))
    assert rows[0][1] == pytest.approx(1.0, rel=1e-9)


# -- simulation --------------------------------------------------------------------


def _stable_loop():
    sys_ = LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]),
                        np.array([[0.0], [1.0]]))
    ctrl = AffineController(K=np.array([[-2.0, -3.0]]), d=np.zeros(1),
                            c=np.zeros(2))
    return sys_, ctrl


def test_simulation_endpoint_matches_exponential():
    sys_, ctrl = _stable_loop()
    traj = simulate_closed_loop(sys_, ctrl, np.array([1.0, -1.0]), 5.0, 1e-3)
    assert traj.endpoint_rel_error < 1e-8


def test_simulation_rk4_order():
    # halving dt should cut the endpoint error by at least 8x (order >= 3
    # observed; RK4 gives ~16x until roundoff)
    sys_, ctrl = _stable_loop()
    e1 = simulate_closed_loop(sys_, ctrl, np.array([1.0, -1.0]), 2.0,
                              2e-2).endpoint_rel_error
    e2 = simulate_closed_loop(sys_, ctrl, np.array([1.0, -1.0]), 2.0,
                              1e-2).endpoint_rel_error
    assert e2 < e1 / 8.0


def test_simulation_divergence_reported():
    sys_ = LinearSystem(np.array([[1.0]]), np.array([[1.0]]))
    ctrl = AffineController(K=np.array([[2.0]]), d=np.zeros(1), c=np.zeros(1))
    traj = simulate_closed_loop(sys_, ctrl, np.array([1.0]), 200.0, 1e-2)
    assert traj.blowup_time is not None
    assert traj.blowup_time < 200.0


def test_simulation_affine_offset_equilibrium():
    # u = K(x - c) + d holds the equilibrium c exactly
    sys_ = LinearSystem(np.array([[-1.0, -1.0], [0.0, -1.0]]),
                        np.array([[1.0], [1.0]]))
    c = np.array([0.0, 1.0])
    d = np.array([1.0])
    ctrl = AffineController(K=np.zeros((1, 2)), d=d, c=c)
    traj = simulate_closed_loop(sys_, ctrl, c.copy(), 1.0, 1e-3)
    assert np.allclose(traj.x[-1], c, atol=1e-9)


def test_simulation_tracks_barrier_violation():
    cbf = CbfFunction(c=np.zeros(2), Omega=np.eye(2),
                      orientation=SUB_LEVEL_SAFE, n_bar=2)
    sys_ = LinearSystem(np.zeros((2, 2)), np.eye(2))
    # constant drift out of the unit disk
    ctrl = AffineController(K=np.zeros((2, 2)), d=np.array([1.0, 0.0]),
                            c=np.zeros(2))
    traj = simulate_closed_loop(sys_, ctrl, np.zeros(2), 3.0, 1e-3, cbf=cbf)
    assert traj.first_violation_time == pytest.approx(1.0, abs=2e-3)


# -- safety filter -----------------------------------------------------------------


def test_cbf_qp_reference_zero_when_safe():
    sys_ = LinearSystem(np.array([[-1.0, -1.0], [0.0, -1.0]]),
                        np.array([[1.0], [1.0]]))
    s = Polynomial(2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -1.0})
    # far outside the unsafe disk, f = 8x1^2 - 2x1x2 + 8x2^2 - 10 > 0
    assert cbf_qp_reference(s, 10.0, sys_, np.array([2.0, 2.0])) == 0.0


def test_cbf_qp_reference_blows_up_on_zero_gain():
    sys_ = LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]),
                        np.array([[0.0], [1.0]]))
    s = Polynomial(1, {(2,): 1.0, (0,): -1.0})  # position-only: g = 0
    with pytest.raises(UnboundedControl):
        cbf_qp_reference(s, 10.0, sys_, np.array([0.5, 0.0]))


def test_pathology_scan_caps_blowups():
    sys_ = LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]),
                        np.array([[0.0], [1.0]]))
    s = Polynomial(1, {(2,): 1.0, (0,): -1.0})
    grid = pathology_scan(s, 10.0, sys_, np.linspace(-0.9, 0.9, 5),
                          np.linspace(-1.0, 1.0, 5), cap=100.0)
    assert np.max(grid) == 100.0


# -- full audit --------------------------------------------------------------------


def test_check_certificate_deterministic():
    r1 = check_certificate(_case1_result(), Tolerances(psd_tol=1e-2))
    r2 = check_certificate(_case1_result(), Tolerances(psd_tol=1e-2))
    assert [c.margin for c in r1.checks] == [c.margin for c in r2.checks]
    names = [c.name for c in r1.checks]
    assert names == sorted(names)


def test_check_certificate_seed_changes_samples_not_verdict():
    r1 = check_certificate(_case1_result(), Tolerances(psd_tol=1e-2, seed=0))
    r2 = check_certificate(_case1_result(), Tolerances(psd_tol=1e-2, seed=7))
    assert r1.passed and r2.passed
    m1 = r1["containment:samples"].margin
    m2 = r2["containment:samples"].margin
    assert m1 != m2  # different samples, same conclusion


def test_check_certificate_fails_tampered():
    rep = check_certificate(_case1_result(scale=0.5),
                            Tolerances(psd_tol=1e-2))
    assert not rep.passed


def test_report_text_lists_every_check():
    rep = check_certificate(_case1_result(), Tolerances(psd_tol=1e-2))
    text = rep.to_text()
    for c in rep.checks:
        assert c.name in text
    assert "overall" in text
