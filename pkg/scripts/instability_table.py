"""Growth of the harmonic family: interior vs boundary norms and fitted slopes.

    python scripts/instability_table.py --eps 0.1 --n-max 60 --k 1
"""

import argparse

import numpy as np

from redatum.instability import HadamardConfig, fit_growth, monotone_from


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--n-max", type=int, default=60)
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--every", type=int, default=5)
    a = ap.parse_args()
    cfg = HadamardConfig(eps=a.eps, n_max=a.n_max, k=a.k)
    fit = fit_growth(cfg, n_min=2)
    print(f"{'n':>4} {'log interior':>14} {'log boundary':>14} {'log ratio':>12}")
    for n, li, lb in zip(fit.n, fit.log_interior, fit.log_boundary):
        if n % a.every == 0 or n == fit.n[-1]:
            print(f"{n:4d} {li:14.6f} {lb:14.6f} {li - lb:12.6f}")
    best = fit_growth(cfg)
    print(f"interior slope {best.slope_interior:.5f}  (-ln(1 - eps) = {-np.log1p(-a.eps):.5f})")
    print(f"boundary log-log slope {best.slope_boundary_log:.3f}  (bound k + 1.5 = {a.k + 1.5})")
    print(f"ratio increasing from n = {monotone_from(best)}")


if __name__ == "__main__":
    main()
