"""Compare the compiled and numpy kernels against dense inversion.

    python3 benchmarks/bench_backends.py --family banded --sizes 100,400,1600

Prints one row per (size, backend) and optionally writes a CSV.
"""

import argparse

from dscov import available_backends
from dscov.bench import FAMILIES, run_bench, write_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=FAMILIES, default="banded")
    ap.add_argument("--sizes", default="100,400,1600")
    ap.add_argument("--reps", type=int, default=7)
    ap.add_argument("--bandwidth", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="optional CSV output path")
    args = ap.parse_args(argv)

    rows = run_bench(args.family, [int(s) for s in args.sizes.split(",")], args.reps,
                     backends=available_backends(), seed=args.seed, bandwidth=args.bandwidth)
    by_size = {}
    for r in rows:
        by_size.setdefault(r.p, {})[r.backend] = r
    print(f"{'p':>6} {'dense ms':>10} " + " ".join(f"{b + ' ms':>12}" for b in available_backends())
          + f" {'speedup':>8} {'rel diff':>9}")
    for p, rs in by_size.items():
        dense = next(iter(rs.values())).dense_median_s
        times = [rs[b].local_median_s for b in available_backends()]
        speedup = times[-1] / times[0] if len(times) > 1 else float("nan")
        diff = max(r.max_rel_discrepancy for r in rs.values())
        print(f"{p:>6} {dense * 1e3:>10.3f} " + " ".join(f"{t * 1e3:>12.3f}" for t in times)
              + f" {speedup:>8.1f} {diff:>9.1e}")
    if args.csv:
        write_csv(args.csv, rows)


if __name__ == "__main__":
    main()
