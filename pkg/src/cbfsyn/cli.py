"""Command-line front end: problem-file parsing, synth/verify/simulate/scan
subcommands, and the flat text result serialization.

Exit codes: 0 success, 1 parse/usage error, 2 infeasible, 3 verification
failure, 4 simulation divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import re
import sys

import numpy as np

from .backends import get_backend
from .errors import CbfSynError, Infeasible, ParseError
from .model import (
    GLOBAL,
    HALFSPACES,
    InitialSetSpec,
    InputBoundSpec,
    LinearSystem,
    LOCAL,
    NO_BOUND,
    Polynomial,
    ProblemSpec,
    SafeSetSpec,
    SolverOptions,
    StatePartition,
    UNION,
    chebyshev_center,
)
from .synthesis import synthesize, wrap_certificate
from .verify import (
    CertificateReport,
    CheckResult,
    Tolerances,
    check_certificate,
    pathology_scan,
    simulate_closed_loop,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFY_FAILED = 3
EXIT_DIVERGED = 4


# -- low-level text parsing -------------------------------------------------------


def _split_sections(text):
    """-> {section: [(lineno, key, value)]}, keeping declaration order."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ParseError(f"content before any section header: {line!r}", lineno)
        if "=" in line:
            key, value = line.split("=", 1)
            sections[current].append((lineno, key.strip().lower(), value.strip()))
        else:
            sections[current].append((lineno, "", line))
    return sections


def _parse_vector(value, lineno):
    try:
        return np.array([float(v) for v in value.replace(",", " ").split()])
    except ValueError as exc:
        raise ParseError(f"bad vector {value!r}: {exc}", lineno)


def _parse_matrix(value, lineno):
    rows = [r.strip() for r in value.split(";") if r.strip()]
    if not rows:
        raise ParseError("empty matrix", lineno)
    parsed = [_parse_vector(r, lineno) for r in rows]
    width = len(parsed[0])
    if any(len(r) != width for r in parsed):
        raise ParseError("ragged matrix rows", lineno)
    return np.vstack(parsed)


def parse_polynomial(text, nvars, lineno=None):
    """Grammar: term (("+"|"-") term)*; term: coeff ["*" monomial] | monomial;
    monomial: ("x<i>" ["^<p>"])+.  Example: "1 * x1^2 x2 - 0.5 * x2^2 + 3"."""
    # expose sign tokens while keeping exponent notation like 1e-3 intact
    text = re.sub(r"(?<![eE])-", " - ", text)
    tokens = text.replace("+", " + ").replace("*", " ").split()
    coeffs = {}
    terms = []
    cur = []
    sign = 1.0
    for tok in tokens:
        if tok in ("+", "-"):
            if cur:
                terms.append((sign, cur))
                cur, sign = [], 1.0
            if tok == "-":
                sign = -sign
        else:
            cur.append(tok)
    if cur:
        terms.append((sign, cur))
    if not terms:
        raise ParseError("empty polynomial", lineno)
    for sign, parts in terms:
        coeff = sign
        exps = [0] * nvars
        seen_coeff = False
        for p in parts:
            if p == "*":
                continue
            if _is_number(p):
                if seen_coeff:
                    raise ParseError(f"two coefficients in one term: {parts}", lineno)
                coeff *= float(p)
                seen_coeff = True
            elif p.startswith("x"):
                body = p[1:]
                if "^" in body:
                    idx_s, pow_s = body.split("^", 1)
                else:
                    idx_s, pow_s = body, "1"
                try:
                    idx, power = int(idx_s), int(pow_s)
                except ValueError:
                    raise ParseError(f"bad monomial {p!r}", lineno)
                if not 1 <= idx <= nvars:
                    raise ParseError(
                        f"variable x{idx} out of range (1..{nvars})", lineno)
                if power < 0:
                    raise ParseError(f"negative power in {p!r}", lineno)
                exps[idx - 1] += power
            else:
                raise ParseError(f"unexpected token {p!r}", lineno)
        key = tuple(exps)
        coeffs[key] = coeffs.get(key, 0.0) + coeff
    return Polynomial(nvars, coeffs)


def _is_number(tok):
    try:
        float(tok)
        return True
    except ValueError:
        return False


def format_polynomial(p):
    parts = []
    for e, c in p.terms():
        mono = " ".join(
            f"x{i + 1}" + (f"^{k}" if k > 1 else "")
            for i, k in enumerate(e) if k > 0
        )
        parts.append(f"{c:.17g}" + (f" * {mono}" if mono else ""))
    return " + ".join(parts) if parts else "0"


def _fmt_vector(v):
    return " ".join(f"{x:.17g}" for x in np.asarray(v, dtype=float).reshape(-1))


def _fmt_matrix(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return " ; ".join(_fmt_vector(row) for row in M)


# -- problem files ----------------------------------------------------------------

_OPTION_KEYS = {
    "multiplier_degree", "epsilon", "sos_epsilon", "delta", "seed",
    "mu_mode", "backend", "feastol", "max_iter", "variable_bound",
}


def parse_problem(text) -> ProblemSpec:
    """Parse the sectioned problem grammar into a ProblemSpec."""
    sections = _split_sections(text)
    known = {"system", "partition", "mode", "safe_set", "initial_set",
             "input_bound", "center", "options"}
    for name in sections:
        if name not in known:
            raise ParseError(f"unknown section [{name}]")

    def require(name):
        if name not in sections:
            raise ParseError(f"missing section [{name}]")
        return sections[name]

    A = B = None
    for lineno, key, value in require("system"):
        if key == "a":
            A = _parse_matrix(value, lineno)
        elif key == "b":
            B = _parse_matrix(value, lineno)
        else:
            raise ParseError(f"unknown key {key!r} in [system]", lineno)
    if A is None or B is None:
        raise ParseError("[system] needs both A and B")
    system = LinearSystem(A, B)
    n = system.n

    mode = None
    for lineno, key, value in require("mode"):
        if key in ("", "mode"):
            mode = value.lower()
        else:
            raise ParseError(f"unknown key {key!r} in [mode]", lineno)
    if mode not in (GLOBAL, LOCAL):
        raise ParseError(f"mode must be 'global' or 'local', got {mode!r}")

    n_bar = n
    for lineno, key, value in sections.get("partition", []):
        if key == "n_bar":
            try:
                n_bar = int(value)
            except ValueError:
                raise ParseError(f"bad n_bar {value!r}", lineno)
        else:
            raise ParseError(f"unknown key {key!r} in [partition]", lineno)
    partition = StatePartition(n_bar, n - n_bar)

    options = {}
    backend_name = "clarabel"
    multiplier_degree = 2
    for lineno, key, value in sections.get("options", []):
        if key not in _OPTION_KEYS:
            raise ParseError(f"unknown key {key!r} in [options]", lineno)
        if key == "backend":
            backend_name = value.lower()
        elif key == "mu_mode":
            options["mu_mode"] = value.lower()
        elif key == "multiplier_degree":
            multiplier_degree = int(value)
        elif key in ("seed", "max_iter"):
            options[key] = int(value)
        elif key == "epsilon":
            options["sos_epsilon"] = float(value)
        else:
            options[key] = float(value)
    solver_options = SolverOptions(**options)

    center = None
    for lineno, key, value in sections.get("center", []):
        if key == "c":
            center = _parse_vector(value, lineno)
        else:
            raise ParseError(f"unknown key {key!r} in [center]", lineno)

    safe_polys = []
    halfspace_rows = []
    vertices = []
    for lineno, key, value in require("safe_set"):
        if key == "poly":
            safe_polys.append(parse_polynomial(value, n_bar, lineno))
        elif key == "halfspace":
            if "|" not in value:
                raise ParseError("halfspace needs 'a1 .. an | offset'", lineno)
            a_s, o_s = value.split("|", 1)
            a = _parse_vector(a_s, lineno)
            if a.shape[0] != n:
                raise ParseError(f"halfspace vector needs {n} entries", lineno)
            try:
                o = float(o_s)
            except ValueError:
                raise ParseError(f"bad halfspace offset {o_s!r}", lineno)
            halfspace_rows.append((a, o, lineno))
        elif key == "vertex":
            vertices.append(_parse_vector(value, lineno))
        else:
            raise ParseError(f"unknown key {key!r} in [safe_set]", lineno)

    if mode == GLOBAL:
        if halfspace_rows:
            raise ParseError("global mode takes 'poly'/'vertex' safe-set entries")
        safe_set = SafeSetSpec(UNION, polynomials=tuple(safe_polys),
                               vertices=tuple(vertices))
        if center is None:
            center = np.zeros(n)
    else:
        if safe_polys or vertices:
            raise ParseError("local mode takes 'halfspace' safe-set entries")
        if not halfspace_rows:
            raise ParseError("[safe_set] needs at least one halfspace")
        G = np.vstack([a for a, _, _ in halfspace_rows])
        offs = np.array([o for _, o, _ in halfspace_rows])
        if center is None:
            # default: deepest point of {a'x <= o}
            center = chebyshev_center(-G, offs)
        rows = []
        for a, o, lineno in halfspace_rows:
            slack = o - float(a @ center)
            if slack <= 0:
                raise ParseError(
                    "center is not strictly inside this halfspace", lineno)
            # store as {a'(x-c) + 1 >= 0} with a = -g / slack
            rows.append(-a / slack)
        safe_set = SafeSetSpec(HALFSPACES, halfspaces=np.vstack(rows))

    initial_set = None
    if "initial_set" in sections:
        polys = []
        for lineno, key, value in sections["initial_set"]:
            if key == "poly":
                polys.append(parse_polynomial(value, n, lineno))
            else:
                raise ParseError(f"unknown key {key!r} in [initial_set]", lineno)
        if polys:
            initial_set = InitialSetSpec(tuple(polys))

    variant = NO_BOUND
    ib_kwargs = {}
    for lineno, key, value in sections.get("input_bound", []):
        if key in ("", "variant"):
            variant = value.lower()
        elif key == "zeta":
            ib_kwargs["zeta"] = float(value)
        elif key == "epsilon":
            ib_kwargs["epsilon"] = float(value)
        elif key == "h":
            ib_kwargs["H"] = _parse_matrix(value, lineno)
        elif key == "offsets":
            ib_kwargs["h"] = _parse_vector(value, lineno)
        else:
            raise ParseError(f"unknown key {key!r} in [input_bound]", lineno)
    input_bound = InputBoundSpec(variant=variant, **ib_kwargs)

    spec = ProblemSpec(
        system=system,
        partition=partition,
        mode=mode,
        safe_set=safe_set,
        center=center,
        initial_set=initial_set,
        input_bound=input_bound,
        multiplier_degree=multiplier_degree,
        options=solver_options,
    )
    spec_backend = backend_name
    return spec, spec_backend


# -- result files -----------------------------------------------------------------


def spec_hash(problem_text):
    return hashlib.sha256(problem_text.encode()).hexdigest()


def write_result(result, problem_text):
    """Problem echo + [result] + [report], bitwise-stable at 17 digits."""
    lines = [problem_text.rstrip("\n"), "", "[result]"]
    lines.append(f"spec_hash = {spec_hash(problem_text)}")
    lines.append(f"program_tag = {result.program_tag}")
    if result.objective is not None:
        lines.append(f"objective = {result.objective:.17g}")
    lines.append(f"Omega = {_fmt_matrix(result.Omega)}")
    if result.R is not None:
        lines.append(f"R = {_fmt_matrix(result.R)}")
    lines.append(f"Y = {_fmt_matrix(result.Y)}")
    lines.append(f"K = {_fmt_matrix(result.controller.K)}")
    lines.append(f"c = {_fmt_vector(result.cbf.c)}")
    lines.append(f"d = {_fmt_vector(result.controller.d)}")
    for name in sorted(result.multipliers):
        lines.append(f"multiplier = {name} | {_fmt_matrix(result.multipliers[name])}")
    if result.report is not None:
        lines.append("")
        lines.append("[report]")
        for c in result.report.checks:
            status = "pass" if c.passed else "fail"
            lines.append(f"check = {c.name} | {status} | {c.margin:.17g}")
        lines.append(f"seed = {result.report.seed}")
    return "\n".join(lines) + "\n"


def parse_result(text):
    """-> (SynthesisResult wrapping the stored certificate, stored report)."""
    if "[result]" not in text:
        raise ParseError("file has no [result] section")
    problem_text = text.split("[result]", 1)[0]
    spec, _ = parse_problem(problem_text)
    sections = _split_sections(text)
    data = {}
    multipliers = {}
    tag = "external"
    for lineno, key, value in sections.get("result", []):
        if key == "multiplier":
            if "|" not in value:
                raise ParseError("multiplier needs 'name | matrix'", lineno)
            mname, mval = value.split("|", 1)
            multipliers[mname.strip()] = _parse_matrix(mval, lineno)
        elif key in ("omega", "r", "y", "k"):
            data[key] = _parse_matrix(value, lineno)
        elif key in ("c", "d"):
            data[key] = _parse_vector(value, lineno)
        elif key == "program_tag":
            tag = value
        elif key in ("spec_hash", "objective"):
            data[key] = value
        else:
            raise ParseError(f"unknown key {key!r} in [result]", lineno)
    for need in ("omega", "k"):
        if need not in data:
            raise ParseError(f"[result] is missing {need.upper()}")
    stored = []
    for lineno, key, value in sections.get("report", []):
        if key == "check":
            parts = [p.strip() for p in value.split("|")]
            if len(parts) != 3:
                raise ParseError("bad check line", lineno)
            stored.append(CheckResult(
                name=parts[0], passed=parts[1] == "pass",
                margin=float(parts[2]), condition=""))
        elif key != "seed":
            raise ParseError(f"unknown key {key!r} in [report]", lineno)
    result = wrap_certificate(
        spec, data["omega"], data["k"],
        d=data.get("d"), R=data.get("r"), Y=data.get("y"), program_tag=tag,
    )
    result.multipliers = multipliers
    return result, tuple(stored)


# -- subcommands -------------------------------------------------------------------


def cmd_synth(args):
    try:
        problem_text = open(args.problem).read()
        spec, backend_name = parse_problem(problem_text)
    except (OSError, CbfSynError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = synthesize(
            spec,
            backend=get_backend(args.backend or backend_name),
            containment=args.containment,
        )
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CbfSynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = write_result(result, problem_text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    print(f"objective = {result.objective:.12g}")
    print(result.report.to_text())
    return EXIT_OK if result.report.passed else EXIT_VERIFY_FAILED


def cmd_verify(args):
    try:
        result, _ = parse_result(open(args.result).read())
    except (OSError, CbfSynError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    tol = Tolerances(seed=args.seed)
    if args.paper_tol:
        tol = Tolerances(psd_tol=tol.paper_cert_tol, seed=args.seed)
    report = check_certificate(result, tol)
    print(report.to_text())
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_simulate(args):
    try:
        result, _ = parse_result(open(args.result).read())
    except (OSError, CbfSynError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    x0 = np.array([float(v) for v in args.x0.replace(",", " ").split()])
    traj = simulate_closed_loop(result.spec.system, result.controller, x0,
                                args.T, args.dt, cbf=result.cbf)
    if args.out:
        n = traj.x.shape[1]
        m = traj.u.shape[1]
        header = (["t"] + [f"x{i+1}" for i in range(n)] + ["b"]
                  + [f"u{i+1}" for i in range(m)])
        with open(args.out, "w") as fh:
            fh.write(",".join(header) + "\n")
            for k in range(len(traj.t)):
                row = ([traj.t[k]] + list(traj.x[k]) + [traj.b[k]]
                       + list(traj.u[k]))
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    print(f"b_min = {traj.b_min:.12g}  b_max = {traj.b_max:.12g}")
    if traj.first_violation_time is not None:
        print(f"first_violation_time = {traj.first_violation_time:.6g}")
    if traj.blowup_time is not None:
        print(f"diverged at t = {traj.blowup_time:.6g}")
        return EXIT_DIVERGED
    if traj.endpoint_rel_error is not None:
        print(f"endpoint_rel_error = {traj.endpoint_rel_error:.3e}")
    return EXIT_OK


def _parse_grid(args):
    lo = [float(v) for v in args.min.replace(",", " ").split()]
    hi = [float(v) for v in args.max.replace(",", " ").split()]
    res = [int(v) for v in args.res.replace(",", " ").split()]
    if not (len(lo) == len(hi) == len(res) == 2):
        raise ParseError("grid needs two entries each for --min/--max/--res")
    if min(res) < 1:
        raise ParseError("grid resolution must be >= 1 per axis")
    return (np.linspace(lo[0], hi[0], res[0]),
            np.linspace(lo[1], hi[1], res[1]))


def cmd_scan(args):
    try:
        xs, ys = _parse_grid(args)
        text = open(args.input).read()
        if args.kind == "pathology":
            spec, _ = parse_problem(text.split("[result]", 1)[0])
            if spec.system.m != 1 or not spec.safe_set.polynomials:
                raise ParseError(
                    "pathology scan needs a scalar-input union-safe-set problem")
            grid = pathology_scan(spec.safe_set.polynomials[0], args.alpha,
                                  spec.system, xs, ys, cap=args.cap)

            def value(i, j):
                return grid[i, j]
        else:
            result, _ = parse_result(text)
            axes = [int(v) - 1 for v in args.axes.replace(",", " ").split()]
            fixed = np.array(
                [float(v) for v in args.fixed.replace(",", " ").split()]
                if args.fixed else [])
            n = result.cbf.n
            free = [a for a in range(n) if a not in axes]
            if len(axes) != 2 or len(fixed) != len(free):
                raise ParseError(
                    "--axes needs two coordinates and --fixed the remaining values")
            base = np.zeros(n)
            base[free] = fixed

            def value(i, j):
                x = base.copy()
                x[axes[0]], x[axes[1]] = xs[i], ys[j]
                return result.cbf(x)
    except (OSError, CbfSynError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    with open(args.out, "w") as fh:
        fh.write("x1,x2,value\n")
        for i in range(len(xs)):
            for j in range(len(ys)):
                fh.write(f"{xs[i]:.17g},{ys[j]:.17g},{value(i, j):.17g}\n")
    print(f"wrote {len(xs) * len(ys)} grid points to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cbfsyn",
        description="Barrier certificate and controller co-design for linear systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize and audit a certificate")
    p.add_argument("problem")
    p.add_argument("--out", default=None, help="result file path")
    p.add_argument("--backend", default=None, choices=["clarabel", "scs"])
    p.add_argument("--containment", default=None, choices=["sos", "vertices"])
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="re-audit a stored result file")
    p.add_argument("result")
    p.add_argument("--paper-tol", action="store_true",
                   help="use the loose tolerance for published rounded values")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="closed-loop RK4 rollout")
    p.add_argument("result")
    p.add_argument("--x0", required=True)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", default=None, help="trajectory CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", help="grid scans for plotting")
    p.add_argument("input", help="problem file (pathology) or result file (levelset)")
    p.add_argument("--kind", choices=["pathology", "levelset"], default="levelset")
    p.add_argument("--min", default="-1 -1")
    p.add_argument("--max", default="1 1")
    p.add_argument("--res", default="101 101")
    p.add_argument("--axes", default="1 2", help="1-based free coordinates")
    p.add_argument("--fixed", default=None, help="values of the other coordinates")
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--cap", type=float, default=100.0)
    p.add_argument("--out", default="scan.csv")
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
