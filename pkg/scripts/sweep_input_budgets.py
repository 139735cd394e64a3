"""Budget sweep: how the certified input effort responds as the squared input
budget zeta tightens, for an unstable planar plant that must be actively
contained, comparing the fixed-multiplier and lifted input-bound encodings.

Usage: python3 sweep_input_budgets.py [--out CSV] [--variant l2|linf]
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cbfsyn.errors import BudgetExhausted, CbfSynError, Infeasible
from cbfsyn.model import (
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
)
from cbfsyn.synthesis import synthesize
from cbfsyn.verify import Tolerances, sup_input


def base_spec(variant, zeta, mu_mode):
    # saddle dynamics: one stable and one unstable mode, so invariance of any
    # bounded set requires sustained control effort
    system = LinearSystem(np.array([[0.0, 1.0], [1.0, 0.0]]),
                          np.array([[0.0], [1.0]]))
    # arena |x_i| <= 4, stored relative to the origin center
    arena = np.array([[-0.25, 0.0], [0.25, 0.0], [0.0, -0.25], [0.0, 0.25]])
    # start ball of radius 2 around the origin
    start = InitialSetSpec((Polynomial(
        2, {(0, 0): 4.0, (2, 0): -1.0, (0, 2): -1.0}),))
    return ProblemSpec(
        system=system,
        partition=StatePartition(2, 0),
        mode=LOCAL,
        safe_set=SafeSetSpec(HALFSPACES, halfspaces=arena),
        center=np.zeros(2),
        initial_set=start,
        input_bound=InputBoundSpec(variant=variant, zeta=zeta),
        options=SolverOptions(mu_mode=mu_mode),
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="/tmp/budget_sweep.csv")
    ap.add_argument("--variant", default="l2", choices=["l2", "linf"])
    args = ap.parse_args()

    rows = []
    for zeta in [4.0, 8.0, 16.0, 32.0, 64.0, 128.0]:
        row = [zeta]
        for mu_mode in ("fixed", "lifted"):
            spec = base_spec(args.variant, zeta, mu_mode)
            try:
                res = synthesize(spec)
                sups = sup_input(res.controller, res.cbf, spec.input_bound,
                                 Tolerances())
                row += [res.objective, max(s for _, s, _ in sups),
                        res.report.passed]
            except (Infeasible, BudgetExhausted):
                row += [float("nan"), float("nan"), False]
            except CbfSynError as exc:
                print(f"zeta={zeta} {mu_mode}: {exc}")
                row += [float("nan"), float("nan"), False]
        rows.append(row)
        print(f"zeta={row[0]:6.1f}  fixed: obj={row[1]:10.4f} sup={row[2]:9.4f}"
              f"  lifted: obj={row[4]:10.4f} sup={row[5]:9.4f}")

    with open(args.out, "w") as fh:
        fh.write("zeta,obj_fixed,sup_fixed,pass_fixed,"
                 "obj_lifted,sup_lifted,pass_lifted\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
