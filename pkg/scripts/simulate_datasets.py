"""Forward-simulate Michaelis-Menten datasets sampled every 10 time units.

    python scripts/simulate_datasets.py [--paths 3] [--seed 1] [--out out/sim]
"""

import argparse
import sys
from pathlib import Path

from kinbayes import cli

BUNDLE = Path(__file__).resolve().parent.parent / "bundles" / "michaelis_menten"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="out/sim")
    args = ap.parse_args()
    code = cli.main(["simulate", "--model", str(BUNDLE / "model.txt"), "--theta", "0.001,0.2,0.1",
                     "--t-end", "100", "--observe-every", "10", "--n-paths", str(args.paths),
                     "--seed", str(args.seed), "--out", args.out])
    if code == 0:
        for k in range(args.paths):
            print((Path(args.out) / f"observations_{k}.csv").read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
