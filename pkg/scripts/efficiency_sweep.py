"""Rejection-efficiency sweep on the Michaelis-Menten model.

theta_2 = 0.001 and theta_3 = 0.1 are held fixed while theta_1 grows; the
interval is a short window after the initial state, where the exact
endpoint becomes harder to hit as binding speeds up.

    python scripts/efficiency_sweep.py [--workers 1,2,4,8] [--out sweep.csv]
"""

import argparse
import os
import sys

from scipy import stats

from kinbayes import bench, formats
from kinbayes.network import michaelis_menten
from kinbayes.sampler import IntervalProblem


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workers", default="1,2,4,8")
    ap.add_argument("--values", default="0.0003,0.001,0.002,0.003,0.0035")
    ap.add_argument("--replicates", type=int, default=20)
    ap.add_argument("--mode", default="fast", choices=["fast", "deterministic"])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()

    spec = bench.SweepSpec(
        michaelis_menten(), (0.001, 0.001, 0.1), 0, tuple(float(v) for v in args.values.split(",")),
        IntervalProblem((120, 301, 0, 0), (119, 300, 1, 0), 0.0, 0.1),
        replicates=args.replicates, master_seed=args.seed, mode=args.mode,
    )
    workers = [int(w) for w in args.workers.split(",")]
    rows = bench.run_sweep(spec, workers)
    lines = [f"# seed: {args.seed}", f"# host_cores: {os.cpu_count()}", f"# mode: {args.mode}"]
    formats.write_text(args.out, lines + bench.sweep_rows(rows))
    for w in workers:
        sel = [r for r in rows if r.workers == w and not r.error]
        rho = stats.spearmanr([r.mean_attempts for r in sel], [r.efficiency for r in sel]).statistic
        print(f"W={w}: Spearman(attempts, efficiency) = {rho:.2f}; "
              + ", ".join(f"{r.mean_attempts:.0f}->{r.efficiency:.2f} (bound {r.amdahl_bound:.2f})" for r in sel))
    print(f"written {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
