"""Regenerate the published-certificate result files in problems/.

The Omega/K values come from rounded certificates reported in the literature
for the two planar benchmark systems; running them through the normal result
serializer keeps the text files bitwise-stable and re-parsable.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cbfsyn.cli import parse_problem, write_result
from cbfsyn.synthesis import wrap_certificate

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
PROBLEMS = os.path.join(ROOT, "problems")


def emit(problem_file, out_file, P, K):
    text = open(os.path.join(PROBLEMS, problem_file)).read()
    spec, _ = parse_problem(text)
    result = wrap_certificate(spec, np.linalg.inv(P), K,
                              program_tag="published")
    out = write_result(result, text)
    path = os.path.join(PROBLEMS, out_file)
    with open(path, "w") as fh:
        fh.write(out)
    print(f"wrote {path}")


def main():
    # planar stable system, squared-input budget 8
    P1 = np.array([[0.88391, -0.253835], [-0.253835, 0.25205]])
    K1 = np.array([[1.4164, 0.59702]])
    emit("case1_global_l2.prob", "case1_published.result", P1, K1)

    # third-order system, block-diagonal certificate with an indefinite
    # trailing block for the unconstrained coordinate
    P2 = np.diag([1.0, 1.0, -0.0129])
    K2 = np.array([[-2.0, 38.9, 0.0], [76.8, 0.0, -0.5]])
    emit("case2.prob", "case2_published.result", P2, K2)


if __name__ == "__main__":
    main()
