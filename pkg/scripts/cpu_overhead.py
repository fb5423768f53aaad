#!/usr/bin/env python3
"""
CPU overhead of double over single Rao-Blackwellisation

Runs one sweep cell per sample size (n = 20, 100 and 1000 by default) and
prints the mean PMC-loop seconds of each scheme and their ratio. The double
scheme evaluates N x N x D kernel densities per iteration on top of the
N x n target evaluations both schemes share, so the ratio should stay
between 2 and 8 and shrink as n grows. Exits with status 1 otherwise.
"""

import argparse
import sys

from rbpmc.config import apply_overrides, load_config
from rbpmc.datamodel import CellKey
from rbpmc.errors import ConfigError
from rbpmc.experiment import run_cell

RATIO_RANGE = (2.0, 8.0)
SAMPLE_SIZES = (20, 100, 1000)


def main():
    parser = argparse.ArgumentParser(description="Time single- and double-RB PMC across sample sizes")
    parser.add_argument('--config', help="YAML configuration file")
    parser.add_argument('--n', type=int, nargs='+', default=list(SAMPLE_SIZES),
                        help="Observations per sample, one cell each")
    parser.add_argument('--p', type=float, default=0.3)
    parser.add_argument('--mu2', type=float, default=3.0)
    parser.add_argument('--sigma2', type=float, default=1.0)
    parser.add_argument('--replicates', type=int, default=5)
    parser.add_argument('--particles', type=int, default=None, help="Override pmc.particles")
    args = parser.parse_args()

    try:
        config = apply_overrides(
            load_config(args.config),
            {"sweep.replicates": args.replicates, "pmc.particles": args.particles},
        )
    except ConfigError as e:
        print(f"ERROR: {e}")
        sys.exit(2)

    print("CPU Overhead")
    print("=" * 60)
    print(f"p={args.p:g} mu2={args.mu2:g} sigma2={args.sigma2:g}, {args.replicates} replicates, "
          f"N={config.pmc.particles}, T={config.pmc.iterations}")
    print()

    ratios = []
    for n in sorted(args.n):
        timing = run_cell(CellKey(n, args.p, args.mu2, args.sigma2), config).timing
        ratio = timing.double.mean / timing.single.mean if timing.single.mean > 0 else float("nan")
        ratios.append(ratio)
        print(f"  n={n:5d}  single {timing.single.mean:.4f}s  double {timing.double.mean:.4f}s  "
              f"ratio {ratio:.2f}  (harness {timing.harness_overhead:.1e}s)")

    print()
    lo, hi = RATIO_RANGE
    in_band = all(lo <= r <= hi for r in ratios)
    non_increasing = all(later <= earlier for earlier, later in zip(ratios, ratios[1:]))
    print(f"{'✓' if in_band else '✗'} Ratios within [{lo:g}, {hi:g}]")
    print(f"{'✓' if non_increasing else '✗'} Ratio non-increasing in n")
    if not (in_band and non_increasing):
        sys.exit(1)


if __name__ == "__main__":
    main()
