"""Recompute the measured entries of the shipped calibration file.

    python scripts/calibrate.py            # print
    python scripts/calibrate.py --write    # update src/lsvlab/data/calibration.json
"""
import argparse
import json
import math
from importlib import resources

import numpy as np

from lsvlab import asymptotics as asy
from lsvlab.noise import ParamDistribution, laplace_signature, signature

U = ParamDistribution.uniform(0.3, 0.6)
Q = ParamDistribution.quadratic(0.3, 0.6)


def measure() -> dict:
    k = 10**6
    ea_u = asy.expected_a(U, k, method="quadrature")
    ea_q = asy.expected_a(Q, k, method="quadrature")
    s_u = asy.a1_partial_sum(U, 10**7)
    s_q = asy.a1_partial_sum(Q, 10**7)
    lk = math.log(k)
    return {
        "uniform_logk_EA_ratio_1e6": round(lk * ea_u / signature(U).c_nu, 4),
        "quadratic_logk2_EA_over_published_1e6": round(lk**2 * ea_q / signature(Q).c_nu, 4),
        "quadratic_logk2_EA_over_laplace_1e6": round(lk**2 * ea_q / laplace_signature(Q).c_nu, 4),
        "uniform_S_rel_err_1e7": round(abs(s_u / signature(U).c_nu - 1), 3),
        "quadratic_S_rel_err_published_1e7": round(abs(s_q / signature(Q).c_nu - 1), 3),
        "quadratic_S_rel_err_laplace_1e7": round(abs(s_q / laplace_signature(Q).c_nu - 1), 3),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()
    m = measure()
    print(json.dumps(m, indent=2))
    if args.write:
        path = resources.files("lsvlab") / "data" / "calibration.json"
        cal = json.loads(path.read_text())
        cal["a1a2"]["measured"] = m
        path.write_text(json.dumps(cal, indent=2) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
