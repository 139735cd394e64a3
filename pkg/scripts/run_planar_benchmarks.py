"""Planar benchmark pair: synthesize a certificate for the stable system with
a squared-input budget, audit it, compare against the published rounded
certificates for both benchmark systems, and roll out the closed loop.

Usage: python3 run_planar_benchmarks.py [--backend clarabel|scs]
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cbfsyn.backends import get_backend
from cbfsyn.cli import parse_problem
from cbfsyn.synthesis import synthesize, wrap_certificate
from cbfsyn.verify import Tolerances, check_certificate, simulate_closed_loop

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")


def load(name):
    text = open(os.path.join(ROOT, "problems", name)).read()
    spec, _ = parse_problem(text)
    return spec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--backend", default="clarabel", choices=["clarabel", "scs"])
    args = ap.parse_args()
    backend = get_backend(args.backend)

    # -- fresh synthesis for the stable planar system ------------------------
    spec1 = load("case1_global_l2.prob")
    t0 = time.perf_counter()
    res = synthesize(spec1, backend=backend)
    dt = time.perf_counter() - t0
    print(f"[case1 synth] objective={res.objective:.6f} in {dt:.2f}s "
          f"({res.program_tag})")
    print(res.report.to_text())
    print()

    # -- published certificates, audited at the rounded-value tolerance ------
    P1 = np.array([[0.88391, -0.253835], [-0.253835, 0.25205]])
    K1 = np.array([[1.4164, 0.59702]])
    pub1 = wrap_certificate(spec1, np.linalg.inv(P1), K1,
                            program_tag="published")
    rep1 = check_certificate(pub1, Tolerances(psd_tol=1e-2))
    print("[case1 published]")
    print(rep1.to_text())
    print()

    spec2 = load("case2.prob")
    P2 = np.diag([1.0, 1.0, -0.0129])
    K2 = np.array([[-2.0, 38.9, 0.0], [76.8, 0.0, -0.5]])
    pub2 = wrap_certificate(spec2, np.linalg.inv(P2), K2,
                            program_tag="published")
    rep2 = check_certificate(pub2, Tolerances(psd_tol=1e-2))
    print("[case2 published]")
    print(rep2.to_text())
    print()

    # -- closed-loop rollout of the fresh certificate ------------------------
    traj = simulate_closed_loop(spec1.system, res.controller,
                                np.array([2.0, 0.0]), 10.0, 1e-3, cbf=res.cbf)
    print(f"[case1 rollout] b in [{traj.b_min:.4f}, {traj.b_max:.4f}], "
          f"endpoint error {traj.endpoint_rel_error:.2e}, "
          f"violation={traj.first_violation_time}")


if __name__ == "__main__":
    main()
