"""Posterior for the Michaelis-Menten bundle: rates, K_D, K_M and trajectory bands.

    python scripts/mm_inference.py [--config infer_flat.cfg] [--out out/mm] [--workers 1] [--quick]

``--config`` names a config inside the bundle. The default uses flat priors;
``infer.cfg`` uses the improper prior and stops once no unbind event is left
in the augmented paths. ``--quick`` shortens the chain to 200 + 800 iterations.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from kinbayes import cli, formats

BUNDLE = Path(__file__).resolve().parent.parent / "bundles" / "michaelis_menten"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="infer_flat.cfg")
    ap.add_argument("--out", default="out/mm")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()

    argv = ["-v", "infer", "--config", str(BUNDLE / args.config), "--output", args.out,
            "--workers", str(args.workers)]
    if args.quick:
        argv += ["--burn-in", "200", "--iterations", "800"]
    code = cli.main(argv)
    if code:
        return code
    out = Path(args.out)
    header, post = formats.read_posterior(out / "posterior.csv")
    th = post[:, 1:4]
    print(open(out / "summary.csv").read())
    print("corr(theta_1, theta_2) = %.3f" % np.corrcoef(th[:, 0], th[:, 1])[0, 1])
    print("CV per rate:", np.round(th.std(axis=0, ddof=1) / th.mean(axis=0), 3))

    code = cli.main(["diagnose", "bands", "--model", str(BUNDLE / "model.txt"),
                     "--data", str(BUNDLE / "observations.csv"), "--posterior", str(out / "posterior.csv"),
                     "--streams", str(out / "streams.csv"), "--grid-step", "1",
                     "--max-samples", "200", "--out", str(out / "bands.csv")])
    if code:
        return code
    code = cli.main(["diagnose", "histogram", str(out / "posterior.csv"), "--bins", "40",
                     "--out", str(out / "histograms")])
    print(f"bands and histograms written under {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
