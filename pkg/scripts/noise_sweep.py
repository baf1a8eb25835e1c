"""Median |d_hat - d| over a noise-level x trajectory-length grid.

    python scripts/noise_sweep.py --replicates 100 --jobs 4 --out sweep.csv
"""

import argparse
import time

from degroot_resist.io import RunConfig, write_table
from degroot_resist.pipeline import SWEEP_COLUMNS, run_sweep


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--sigmas", type=float, nargs="+", default=[0.001, 0.01])
    p.add_argument("--lengths", type=int, nargs="+", default=[2, 5, 10, 25])
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="optional CSV path")
    args = p.parse_args()

    cfg = RunConfig(
        seed=args.seed,
        n=args.n,
        sweep_sigmas=tuple(args.sigmas),
        sweep_lengths=tuple(args.lengths),
        sweep_replicates=args.replicates,
        jobs=args.jobs,
    )
    start = time.perf_counter()
    rows = run_sweep(cfg)
    print(f"{'sigma':>8} {'T':>4} {'median':>10} {'mean':>10} {'estimates':>9}")
    for r in rows:
        print(f"{r['sigma']:8.4g} {r['length']:4d} {r['median_abs_error']:10.5f} "
              f"{r['mean_abs_error']:10.5f} {r['estimates']:9d}")
    print(f"# {time.perf_counter() - start:.1f}s")
    if args.out:
        write_table(rows, args.out, SWEEP_COLUMNS)


if __name__ == "__main__":
    main()
