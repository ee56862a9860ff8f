"""Run every stage at desk scale and print the oracle comparison table.

    python scripts/run_desk.py [config.json] [--cache DIR]
"""

import argparse
import json
from pathlib import Path

from redatum.config import ExperimentConfig
from redatum.pipeline import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default=Path(__file__).parent / "configs" / "desk.json")
    ap.add_argument("--cache", default=None)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    report = run_experiment(cfg, cache=args.cache)
    st = report["stages"]
    for name in ("move-receivers", "move-sources"):
        for row in st.get(name, {}).get("times", []):
            extra = f"  lag {row['depth_lag']}" if "depth_lag" in row else ""
            print(f"{name:15s} t = {row['t']:.3f}  error {row.get('relative_error', float('nan')):.4f}{extra}")
    for tau, d in st.get("assemble-k", {}).items():
        print(f"K {tau}: symmetry {d['symmetry_defect']:.2e}  min/max eig {d['min_eig']:.2e} / {d['max_eig']:.2e}")
    print(json.dumps(report["timing"], indent=1))


if __name__ == "__main__":
    main()
