"""Equivariance of |psi|^2 under the sigma-flow, and the KS power against a corrupted flow.

Writes one CSV row per (span, scale) to stdout for plotting.
"""
import argparse
import csv
import sys

from bohmflow import ParticleParams, equivariance_test, superposition, two_mode_box


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spans", type=float, nargs="+", default=[0.085, 0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--scales", type=float, nargs="+", default=[1.0, 1.05, 1.1])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--method", default="rejection", choices=["rejection", "metropolis"])
    a = ap.parse_args()

    psi = superposition([[0.5], [3.0]], [1.0, 0.7], ParticleParams(1.0))
    box = two_mode_box(psi)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["sigma_span", "spatial_scale", "mean_displacement_over_box", "ks_x", "ks_t", "critical",
                "chi2_pvalue", "passed"])
    for span in a.spans:
        for scale in a.scales:
            r = equivariance_test(psi, None, box, n=a.n, sigma_span=span, n_steps=max(10, int(40 * span)),
                                  seed=a.seed, method=a.method, spatial_scale=scale)
            w.writerow([span, scale, f"{r['mean_displacement_over_box']:.4f}",
                        f"{r['ks'][0]['statistic']:.4f}", f"{r['ks'][1]['statistic']:.4f}",
                        f"{r['critical']:.4f}", f"{r['chi2_pvalue']:.3g}", r["passed"]])


if __name__ == "__main__":
    main()
