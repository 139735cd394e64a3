"""Independent certificate auditing.

Eigenvalue checks, containment oracles, exact input-norm suprema with a
sampling cross-check, fixed-step closed-loop simulation against the matrix
exponential, and the closed-form safety-filter reference with its blow-up
scan.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq, minimize

from .errors import CbfSynError, OrientationUnsupported, SpecInvalid, UnboundedControl
from .model import GLOBAL, L2, LINF, NO_BOUND, POLYTOPE, eval_poly
from .sos import build_basis, extract_sos_witness, gram_to_polynomial
from .synthesis import SUB_LEVEL_SAFE, SUPER_LEVEL_SAFE


@dataclass(frozen=True)
class Tolerances:
    """Audit thresholds and sampling controls."""

    psd_tol: float = 1e-6  # min-eigenvalue slack, scaled by matrix norm
    paper_cert_tol: float = 1e-2  # for published certificates (~5 digits)
    sample_count: int = 10_000
    cross_check_samples: int = 100_000
    dt: float = 1e-3
    seed: int = 0
    sample_box: float = 5.0  # half-width of the rejection-sampling box

    def __post_init__(self):
        for name in ("psd_tol", "paper_cert_tol", "sample_count",
                     "cross_check_samples", "dt", "sample_box"):
            if getattr(self, name) <= 0:
                raise SpecInvalid(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    condition: str
    detail: str = ""


@dataclass(frozen=True)
class CertificateReport:
    checks: tuple
    seed: int = 0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self):
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = f"{c.name}: {status} margin={c.margin:.6e}  [{c.condition}]"
            if c.detail:
                line += f"  {c.detail}"
            lines.append(line)
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"overall: {verdict} (seed {self.seed})")
        return "\n".join(lines)


def _rng_for(name, seed):
    return np.random.default_rng((zlib.crc32(name.encode()) << 16) ^ (seed + 1))


def _spectral_scale(M):
    return max(1.0, float(np.linalg.norm(M, 2)))


def invariance_matrix(A, B, P, K):
    """A^T P + P A + K^T B^T P + P B K, the closed-loop derivative form."""
    M = A.T @ P + P @ A + K.T @ (B.T @ P) + (P @ B) @ K
    return 0.5 * (M + M.T)


# -- semi-algebraic sampling ----------------------------------------------------


def sample_region(polys_ge, center, half_width, count, rng, max_rounds=25):
    """Draw up to ``count`` points with every polynomial >= 0.

    Adaptive rejection sampling: the box shrinks toward the accepted cloud
    (or toward a feasible point found by direct search when rejection keeps
    missing).  Returns an (k, n) array, possibly with k < count.
    """
    n = polys_ge[0].nvars
    center = np.asarray(center, dtype=float).reshape(-1)[:n].copy()
    if center.shape[0] < n:
        center = np.concatenate([center, np.zeros(n - center.shape[0])])
    half = np.full(n, float(half_width))
    accepted = []
    total = 0
    for _ in range(max_rounds):
        pts = center + rng.uniform(-1.0, 1.0, size=(20_000, n)) * half
        ok = np.ones(len(pts), dtype=bool)
        for p in polys_ge:
            vals = np.array([eval_poly(p, x) for x in pts[ok]])
            idx = np.flatnonzero(ok)
            ok[idx[vals < 0.0]] = False
        hits = pts[ok]
        if len(hits):
            accepted.append(hits)
            total += len(hits)
            if total >= count:
                break
            cloud = np.vstack(accepted)
            lo, hi = cloud.min(axis=0), cloud.max(axis=0)
            pad = 0.3 * np.maximum(hi - lo, 1e-3)
            center = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo) + pad
        else:
            feas = _find_feasible_point(polys_ge, center, half, rng)
            if feas is not None:
                center = feas
                half = np.minimum(half, np.maximum(0.2 * half, 1e-2))
            else:
                half = 0.5 * half
    if not accepted:
        return np.empty((0, n))
    return np.vstack(accepted)[:count]


def _find_feasible_point(polys_ge, center, half, rng, tries=8):
    """Direct search for a point with all polynomials >= 0."""

    def worst(x):
        return max(-eval_poly(p, x) for p in polys_ge)

    best = None
    for _ in range(tries):
        x0 = center + rng.uniform(-1.0, 1.0, size=center.shape) * half
        res = minimize(worst, x0, method="Nelder-Mead",
                       options={"maxiter": 400, "xatol": 1e-8, "fatol": 1e-10})
        if res.fun < 0:
            return res.x
        if best is None or res.fun < best[0]:
            best = (res.fun, res.x)
    return None


def sample_ellipsoid_boundary(Omega, c, count, rng):
    """Uniform directions mapped through the Cholesky factor of Omega."""
    L = np.linalg.cholesky(Omega)
    z = rng.standard_normal(size=(count, Omega.shape[0]))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return c + z @ L.T


def containment_oracle(result, samples=10_000, seed=0, box=5.0):
    """Sampled containment audit; returns the list of violating points.

    Global orientation: points of the unsafe complement where the barrier
    projection fails to be negative.  Local orientation: initial-set points
    outside the ellipsoid, plus ellipsoid-boundary points leaving a safe
    halfspace.
    """
    spec, cbf = result.spec, result.cbf
    violations = []
    if cbf.orientation == SUPER_LEVEL_SAFE:
        nbar = cbf.n_bar
        Pbar = cbf.P[:nbar, :nbar]
        cbar = cbf.c[:nbar]
        unsafe = [-s for s in spec.safe_set.polynomials]
        if unsafe:
            rng = _rng_for("containment:global", seed)
            pts = sample_region(unsafe, cbar, box, samples, rng)
            for x in pts:
                if (x - cbar) @ Pbar @ (x - cbar) - 1.0 >= 0.0:
                    violations.append(x)
    else:
        rng = _rng_for("containment:initial", seed)
        pts = sample_region(list(spec.initial_set.polynomials), cbf.c, box,
                            samples, rng)
        for x in pts:
            if cbf(x) > 0.0:
                violations.append(x)
        rng = _rng_for("containment:boundary", seed)
        bpts = sample_ellipsoid_boundary(cbf.Omega, cbf.c, samples, rng)
        H = spec.safe_set.halfspaces
        for x in bpts:
            if np.any(H @ (x - cbf.c) + 1.0 < 0.0):
                violations.append(x)
    return violations


# -- input-norm suprema ----------------------------------------------------------


def _sup_affine_norm_sq(M, d):
    """sup_{||z|| <= 1} ||M z + d||^2, exact.

    Trust-region style: eigendecompose M^T M and root-find the secular
    equation for the boundary multiplier, with the hard case (offset
    orthogonal to the top eigenspace) handled explicitly.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    d = np.asarray(d, dtype=float).reshape(-1)
    G = M.T @ M
    b = M.T @ d
    lam, V = np.linalg.eigh(G)
    g = V.T @ b
    lmax = lam[-1]
    scale = max(lmax, float(d @ d), 1.0)
    top = lam > lmax - 1e-12 * scale

    def value(z):
        r = M @ z + d
        return float(r @ r)

    if np.linalg.norm(g) < 1e-14 * scale:
        # pure eigenvalue problem: maximizer along the top eigenvector
        return lmax + float(d @ d), V[:, -1]

    if np.max(np.abs(g[top])) < 1e-12 * np.linalg.norm(g):
        # hard case: fill the remaining norm along the top eigenspace
        zi = np.where(top, 0.0, g / np.maximum(lmax - lam, 1e-300))
        w = float(zi @ zi)
        if w <= 1.0:
            zi[np.argmax(lam)] = np.sqrt(1.0 - w)
            z = V @ zi
            return value(z), z
        # interior-style root below lmax cannot occur for a maximum; fall
        # through to the generic secular solve with a tiny perturbation
        g = g + 1e-12 * scale

    def phi(mu):
        return float(np.sum((g / (mu - lam)) ** 2)) - 1.0

    lo = lmax + 1e-14 * scale
    while phi(lo) < 0.0:
        lo = lmax + 0.1 * (lo - lmax)
        if lo - lmax < 1e-300:
            break
    hi = lmax + np.linalg.norm(g) + 1.0
    while phi(hi) > 0.0:
        hi = lmax + 2.0 * (hi - lmax)
    mu = brentq(phi, lo, hi, xtol=1e-14, rtol=1e-14)
    z = V @ (g / (mu - lam))
    nz = np.linalg.norm(z)
    if nz > 0:
        z = z / nz
    return value(z), z


def sup_input(controller, cbf, bound, tol: Tolerances | None = None):
    """Per-constraint suprema of the control over the barrier ellipsoid.

    Returns a list of (name, supremum, limit) triples.  Closed forms are
    cross-checked against boundary sampling (the sampled maximum must not
    exceed the closed form by more than 1e-3 relative).
    """
    tol = tol or Tolerances()
    if bound is None or bound.variant == NO_BOUND:
        return []
    Omega = cbf.Omega
    if np.linalg.eigvalsh(Omega)[0] <= 0.0:
        raise OrientationUnsupported(
            "input supremum needs a bounded ellipsoid (Omega > 0)"
        )
    d = controller.d
    if cbf.orientation == SUPER_LEVEL_SAFE and np.linalg.norm(d) > 1e-9:
        raise OrientationUnsupported(
            "global orientation supports suprema only with a zero offset d"
        )
    L = np.linalg.cholesky(Omega)
    K = controller.K
    KL = K @ L

    out = []
    if bound.variant == L2:
        sup, zstar = _sup_affine_norm_sq(KL, d)
        _cross_check_norm(KL, d, sup, zstar, tol)
        out.append(("l2", sup, float(bound.zeta)))
    elif bound.variant == LINF:
        for i in range(K.shape[0]):
            sup = (np.linalg.norm(KL[i]) + abs(d[i])) ** 2
            out.append((f"linf[{i}]", float(sup), float(bound.zeta)))
    elif bound.variant == POLYTOPE:
        for i in range(bound.H.shape[0]):
            Hi = bound.H[i]
            sup = float(Hi @ d + np.linalg.norm(Hi @ KL))
            out.append((f"row[{i}]", sup, float(bound.h[i])))
    else:
        raise SpecInvalid(f"unknown input bound variant {bound.variant!r}")
    return out


def _cross_check_norm(M, d, sup, zstar, tol):
    rng = _rng_for("sup_input:cross_check", tol.seed)
    n = M.shape[1]
    z = rng.standard_normal(size=(tol.cross_check_samples, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    vals = np.sum((z @ M.T + d) ** 2, axis=1)
    sampled = float(np.max(vals))
    attained = float(np.sum((M @ zstar + d) ** 2))
    scale = max(abs(sup), 1e-12)
    if sampled > sup * (1.0 + 1e-3) + 1e-9:
        raise CbfSynError(
            f"input supremum cross-check failed: sampled {sampled:.6e} "
            f"exceeds closed form {sup:.6e}"
        )
    if abs(attained - sup) > 1e-3 * scale + 1e-9:
        raise CbfSynError(
            f"input supremum maximizer inconsistent: attains {attained:.6e} "
            f"vs closed form {sup:.6e}"
        )


# -- closed-loop simulation -------------------------------------------------------


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    b: np.ndarray | None
    b_min: float | None = None
    b_max: float | None = None
    first_violation_time: float | None = None
    blowup_time: float | None = None
    endpoint_rel_error: float | None = None


_OVERFLOW = 1e150


def simulate_closed_loop(system, controller, x0, T, dt, cbf=None) -> Trajectory:
    """Classical fixed-step RK4 on xdot = A x + B u(x).

    The endpoint is cross-checked against the exact affine matrix-exponential
    solution; divergence is reported with the blow-up time instead of
    raising.
    """
    if dt <= 0 or T < 0:
        raise SpecInvalid("need dt > 0 and T >= 0")
    A, B = system.A, system.B
    K, d, c = controller.K, controller.d, controller.c
    Acl = A + B @ K
    r = B @ (d - K @ c)

    def f(x):
        return Acl @ x + r

    steps = int(round(T / dt))
    ts = [0.0]
    xs = [np.asarray(x0, dtype=float).reshape(-1).copy()]
    blowup = None
    for k in range(steps):
        x = xs[-1]
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (k + 1) * dt
        if not np.all(np.isfinite(xn)) or np.max(np.abs(xn)) > _OVERFLOW:
            blowup = t
            break
        ts.append(t)
        xs.append(xn)

    t = np.array(ts)
    x = np.vstack(xs)
    u = (x - c) @ K.T + d
    b = None
    b_min = b_max = first_violation = None
    if cbf is not None:
        diff = x - cbf.c
        b = np.einsum("ij,jk,ik->i", diff, cbf.P, diff) - 1.0
        b_min = float(np.min(b))
        b_max = float(np.max(b))
        if cbf.orientation == SUPER_LEVEL_SAFE:
            bad = np.flatnonzero(b < 0.0)
        else:
            bad = np.flatnonzero(b > 0.0)
        if len(bad):
            first_violation = float(t[bad[0]])

    endpoint_err = None
    if blowup is None and steps > 0:
        n = A.shape[0]
        aug = np.zeros((n + 1, n + 1))
        aug[:n, :n] = Acl
        aug[:n, n] = r
        exact = (expm(aug * t[-1]) @ np.concatenate([x[0], [1.0]]))[:n]
        endpoint_err = float(
            np.linalg.norm(x[-1] - exact) / max(1.0, np.linalg.norm(exact))
        )
    return Trajectory(t=t, x=x, u=u, b=b, b_min=b_min, b_max=b_max,
                      first_violation_time=first_violation,
                      blowup_time=blowup, endpoint_rel_error=endpoint_err)


# -- safety-filter reference -------------------------------------------------------


def cbf_qp_reference(s, alpha, system, x):
    """Closed-form minimum-norm safety filter for scalar-input systems:
    u_s(x) = -min{0, f(x)} / g(x) with f = grad(s) . A x + alpha s and
    g = grad(s) . B."""
    if system.m != 1:
        raise SpecInvalid("closed-form safety filter requires a scalar input")
    x = np.asarray(x, dtype=float).reshape(-1)
    # the safe polynomial may live on a leading sub-block of the state
    xs = x[: s.nvars]
    grads = s.gradient()
    gvals = np.zeros(x.shape[0])
    gvals[: s.nvars] = [eval_poly(p, xs) for p in grads]
    f = float(gvals @ (system.A @ x) + alpha * eval_poly(s, xs))
    g = float(gvals @ system.B[:, 0])
    if f >= 0.0:
        return 0.0
    if abs(g) < 1e-12:
        raise UnboundedControl(
            f"safety filter blows up at {x.tolist()}: g(x)=0 with f(x)={f:.6g}<0"
        )
    return -f / g


def pathology_scan(s, alpha, system, x1_values, x2_values, cap=100.0):
    """Grid of min(u_s(x)^2, cap) over a 2-D state slice; blow-up points are
    reported at the cap."""
    x1_values = np.asarray(x1_values, dtype=float)
    x2_values = np.asarray(x2_values, dtype=float)
    if x1_values.size < 1 or x2_values.size < 1:
        raise SpecInvalid("grid needs at least one point per axis")
    out = np.zeros((x1_values.size, x2_values.size))
    for i, x1 in enumerate(x1_values):
        for j, x2 in enumerate(x2_values):
            try:
                u = cbf_qp_reference(s, alpha, system, np.array([x1, x2]))
                out[i, j] = min(u * u, cap)
            except UnboundedControl:
                out[i, j] = cap
    return out


# -- certificate audit --------------------------------------------------------------


def check_certificate(result, tol: Tolerances | None = None) -> CertificateReport:
    """Run every applicable audit on a synthesis result (or a published
    certificate wrapped as one) and merge the findings deterministically."""
    tol = tol or Tolerances()
    checks = []
    spec, cbf, ctrl = result.spec, result.cbf, result.controller
    A, B = spec.system.A, spec.system.B
    P = cbf.P
    nbar = cbf.n_bar

    checks.append(_check_structure(cbf, tol))
    checks.append(_check_invariance(A, B, P, ctrl.K, cbf.orientation, tol))
    if result.R is not None:
        checks.append(_check_schur_link(result.R, cbf.Omega[:nbar, :nbar], tol))
    checks.extend(_check_containment(result, tol))
    if spec.input_bound is not None and spec.input_bound.variant != NO_BOUND:
        checks.extend(_check_input(result, tol))

    checks.sort(key=lambda c: c.name)
    return CertificateReport(checks=tuple(checks), seed=tol.seed)


def _check_structure(cbf, tol):
    nbar = cbf.n_bar
    Om = cbf.Omega
    margins = []
    details = []
    if cbf.orientation == SUPER_LEVEL_SAFE:
        eig_bar = np.linalg.eigvalsh(Om[:nbar, :nbar])
        margins.append(float(eig_bar[0]))
        details.append(f"min eig(Omega_bar)={eig_bar[0]:.3e}")
        if nbar < cbf.n:
            eig_und = np.linalg.eigvalsh(Om[nbar:, nbar:])
            margins.append(float(-eig_und[-1]))
            details.append(f"-max eig(Omega_under)={-eig_und[-1]:.3e}")
            off = float(np.max(np.abs(Om[:nbar, nbar:]))) if nbar else 0.0
            margins.append(1e-9 - off)
            details.append(f"off-block={off:.1e}")
    else:
        eig = np.linalg.eigvalsh(Om)
        margins.append(float(eig[0]))
        details.append(f"min eig(Omega)={eig[0]:.3e}")
    inv_res = cbf.inversion_residual()
    margins.append(1e-8 * _spectral_scale(Om) - inv_res)
    margin = min(margins)
    return CheckResult(
        name="structure",
        passed=margin > 0.0,
        margin=margin,
        condition="Omega definiteness split and P Omega = I",
        detail="; ".join(details) + f"; inversion residual={inv_res:.1e}",
    )


def _check_invariance(A, B, P, K, orientation, tol):
    M = invariance_matrix(A, B, P, K)
    slack = tol.psd_tol * _spectral_scale(M)
    eig = np.linalg.eigvalsh(M)
    if orientation == SUPER_LEVEL_SAFE:
        margin = float(eig[0]) + slack
        detail = f"min eig={eig[0]:.6e} (want >= -{slack:.1e})"
        cond = "A'P+PA+K'B'P+PBK >= 0 (expanding invariance)"
    else:
        margin = -float(eig[-1]) + slack
        detail = f"max eig={eig[-1]:.6e} (want <= {slack:.1e})"
        cond = "A'P+PA+K'B'P+PBK <= 0 (contracting invariance)"
    return CheckResult("invariance", margin >= 0.0, margin, cond, detail)


def _check_schur_link(R, Omega_bar, tol):
    dim = R.shape[0]
    M = np.zeros((2 * dim, 2 * dim))
    M[:dim, :dim] = R
    M[:dim, dim:] = np.eye(dim)
    M[dim:, :dim] = np.eye(dim)
    M[dim:, dim:] = Omega_bar
    slack = tol.psd_tol * _spectral_scale(M)
    eig = float(np.linalg.eigvalsh(M)[0])
    return CheckResult(
        name="schur_link",
        passed=eig >= -slack,
        margin=eig + slack,
        condition="[[R, I], [I, Omega]] >= 0 so R >= Omega^{-1}",
        detail=f"min eig={eig:.6e}",
    )


def _check_containment(result, tol):
    spec, cbf = result.spec, result.cbf
    checks = []
    if cbf.orientation == SUPER_LEVEL_SAFE:
        nbar = cbf.n_bar
        Pbar = cbf.P[:nbar, :nbar]
        cbar = cbf.c[:nbar]
        if spec.safe_set.polynomials:
            rng = _rng_for("containment:samples", tol.seed)
            unsafe = [-s for s in spec.safe_set.polynomials]
            pts = sample_region(unsafe, cbar, tol.sample_box,
                                tol.sample_count, rng)
            if len(pts):
                diff = pts - cbar
                vals = np.einsum("ij,jk,ik->i", diff, Pbar, diff)
                margin = float(1.0 - np.max(vals))
                detail = f"{len(pts)} unsafe samples, max (x-c)'P(x-c)={np.max(vals):.6f}"
                passed = margin > 0.0
            else:
                margin, passed = -np.inf, False
                detail = "sampler found no unsafe-region points"
            checks.append(CheckResult(
                "containment:samples", passed, margin,
                "b < 0 on the unsafe complement (sampled)", detail))
        if spec.safe_set.vertices:
            worst = np.inf
            for v in spec.safe_set.vertices:
                R = result.R if result.R is not None else Pbar
                vc = v - cbar
                worst = min(worst, 1.0 - float(vc @ R @ vc))
            checks.append(CheckResult(
                "containment:vertices", worst >= -1e-6, float(worst),
                "1 - (v-c)'R(v-c) >= 0 at every unsafe vertex",
                f"{len(spec.safe_set.vertices)} vertices, worst={worst:.6e}"))
        if result.multipliers and spec.safe_set.polynomials:
            checks.append(_check_sos_witness(result, tol))
    else:
        H = spec.safe_set.halfspaces
        Om = cbf.Omega
        worst = float(np.min(1.0 - np.einsum("ij,jk,ik->i", H, Om, H)))
        checks.append(CheckResult(
            "containment:halfspaces", worst >= -1e-9, worst,
            "1 - a'Omega a >= 0 per safe halfspace",
            f"{H.shape[0]} halfspaces, worst={worst:.6e}"))
        rng = _rng_for("containment:initial", tol.seed)
        pts = sample_region(list(spec.initial_set.polynomials), cbf.c,
                            tol.sample_box, tol.sample_count, rng)
        if len(pts):
            vals = np.array([cbf(x) for x in pts])
            margin = float(-np.max(vals))
            passed = margin >= -1e-9
            detail = f"{len(pts)} initial-set samples, max b={np.max(vals):.6e}"
        else:
            margin, passed = -np.inf, False
            detail = "sampler found no initial-set points"
        checks.append(CheckResult(
            "containment:initial", passed, margin,
            "b <= 0 on the initial set (sampled)", detail))
    return checks


def _check_sos_witness(result, tol):
    """Re-factor the stored master Gram and confirm it reproduces the
    S-procedure polynomial built from R and the multipliers."""
    from .model import Polynomial

    spec = result.spec
    nbar = result.cbf.n_bar
    cbar = result.cbf.c[:nbar]
    grams = result.multipliers
    master_name = next((k for k in grams if k.endswith(":master")), None)
    if master_name is None:
        return CheckResult("containment:sos_witness", False, -np.inf,
                           "SOS witness re-factorization", "no master Gram stored")
    try:
        sig_names = sorted(k for k in grams if ":sigma" in k)
        half = spec.multiplier_degree // 2
        sbasis = build_basis(nbar, half)
        expected = (Polynomial.constant(nbar, 1.0 - spec.options.sos_epsilon)
                    - Polynomial.quadratic_form(result.R, cbar))
        for name, s in zip(sig_names, spec.safe_set.polynomials):
            sigma = gram_to_polynomial(grams[name], sbasis)
            expected = expected + sigma * s
        Q = grams[master_name]
        mdeg = expected.degree()
        mbasis = build_basis(nbar, max(1, (mdeg + 1) // 2))
        if Q.shape[0] != len(mbasis):
            return CheckResult("containment:sos_witness", False, -np.inf,
                               "SOS witness re-factorization",
                               "master Gram dimension mismatch")
        witness_tol = 1e-7 * _spectral_scale(Q)
        extract_sos_witness(Q, mbasis, tol=witness_tol)
        actual = gram_to_polynomial(Q, mbasis)
        diff = actual - expected
        err = max((abs(c) for c in diff.coeffs.values()), default=0.0)
        # the construction starts from the constant 1, so never let a
        # tight (identically zero) witness shrink the comparison scale
        scale = max(1.0, *(abs(c) for c in expected.coeffs.values()), 0.0)
        margin = 1e-6 * scale - err
        return CheckResult(
            "containment:sos_witness", margin >= 0.0, float(margin),
            "master Gram is PSD and matches 1 - x'Rx + sum sigma_i s_i - eps",
            f"coefficient error={err:.3e} (scale {scale:.3e})")
    except CbfSynError as exc:
        return CheckResult("containment:sos_witness", False, -np.inf,
                           "SOS witness re-factorization", str(exc))


def _check_input(result, tol):
    checks = []
    try:
        sups = sup_input(result.controller, result.cbf,
                         result.spec.input_bound, tol)
    except OrientationUnsupported as exc:
        return [CheckResult("input:sup", False, -np.inf,
                            "input supremum within budget", str(exc))]
    for name, sup, limit in sups:
        margin = float(limit - sup)
        checks.append(CheckResult(
            f"input:{name}", margin >= -1e-9, margin,
            "sup of the constrained input functional <= limit",
            f"sup={sup:.6f} limit={limit:.6f}"))
    return checks
