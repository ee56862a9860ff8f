"""Structure of the connecting matrix when every sampling grid is halved.

Solver spacing and receiver sampling are refined together; the pulse basis is
fixed.  The h/2 run takes several minutes.

    python scripts/refinement_study.py [--levels 2] [--cache DIR]
"""

import argparse
import dataclasses
from pathlib import Path
import tempfile

from redatum.config import ExperimentConfig, Workspace


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=2)
    ap.add_argument("--tau", type=float, default=2.0)
    ap.add_argument("--cache", default=None)
    a = ap.parse_args()
    base = ExperimentConfig(stages=[])
    g0 = base.grid()
    tmp = Path(tempfile.mkdtemp())
    for level in range(a.levels):
        s = 2**level
        g = dataclasses.replace(g0, dt_r=g0.dt_r / s, dx_r=g0.dx_r / s, name=f"{g0.name}-{s}")
        cfg = dataclasses.replace(base, h=base.h / s, basis=str(g.to_json(tmp / f"basis_{s}.json")))
        d = Workspace(cfg, cache=a.cache, log=print).K(a.tau).diagnostics
        print(f"h = {cfg.h:.5f}: symmetry {d['symmetry_defect']:.3e}  "
              f"negative eig ratio {max(0.0, -d['min_eig']) / d['max_eig']:.3e}", flush=True)


if __name__ == "__main__":
    main()
