"""Compare relativistic and Schrodinger-limit Bohmian trajectories over a range of v/c."""
import argparse
import json

import numpy as np

from bohmflow import ScaledModeFamily, nr_limit_study, temporal_decoupling_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--v-over-c", type=float, nargs="+", default=[0.01, 0.02, 0.05, 0.1, 0.2])
    ap.add_argument("--n-steps", type=int, default=2000)
    ap.add_argument("--json", action="store_true")
    a = ap.parse_args()

    fam = ScaledModeFamily(n_steps=a.n_steps)
    rep = nr_limit_study(fam, a.v_over_c)
    rng = np.random.default_rng(0)
    for row in rep["scan"]:
        v = row["v_over_c"]
        pts = rng.uniform(-3 / v, 3 / v, size=(200, 1, 2))
        psi = fam.relativistic(v)
        keep = np.abs(psi.evaluate(pts)) ** 2 > 1e-2
        row["decoupling_K"] = temporal_decoupling_check(psi, None, pts[keep], v)["K"]
    if a.json:
        print(json.dumps(rep, indent=2))
        return
    print(f"{'v/c':>8} {'rel. deviation':>15} {'max|dT/ds-1|':>14} {'K':>8}")
    for r in rep["scan"]:
        print(f"{r['v_over_c']:8.3g} {r['max_deviation']:15.4e} {r['max_dT_dsigma_minus_1']:14.4e} "
              f"{r['decoupling_K']:8.4f}")
    print(f"fitted exponents: deviation {rep['scaling_exponent']:.3f}, dT/dsigma {rep['dT_exponent']:.3f}")


if __name__ == "__main__":
    main()
