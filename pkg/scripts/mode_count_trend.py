#!/usr/bin/env python3
"""
Mode-count trend check for the Gaussian mean-mixture benchmark

Regenerates artificial samples for two cells that differ only in mu2 and
prints the mean (and standard deviation) number of posterior modes found by
the grid census. Well-separated clusters (large mu2) should produce more
modes than overlapping ones, about 3.74 against 2.05. Exits with status 1
if either mean leaves its band or the trend is reversed.

Usage:
    python scripts/mode_count_trend.py --samples 100 --n 100 --p 0.3
"""

import argparse
import sys

from rbpmc.config import apply_overrides, load_config
from rbpmc.datamodel import CellKey, MixtureHyper, ObservedSample
from rbpmc.errors import ConfigError
from rbpmc.modefinder import mode_count_stats
from rbpmc.rng import data_stream
from rbpmc.target import generate_artificial_sample

# mu2 -> (expected mean mode count, tolerance) at sigma2=1
EXPECTED_MODES = {1.0: (2.053, 0.5), 5.0: (3.742, 0.6)}


def census_stats(config, cell: CellKey, samples: int):
    """Mode-count Stat over ``samples`` regenerated samples of ``cell``."""
    hyper = MixtureHyper(cell.p, config.target.sigma1, cell.sigma2)
    observed = [
        ObservedSample(generate_artificial_sample(cell.n, cell.mu2, data_stream(config.seed, cell, k)), hyper)
        for k in range(samples)
    ]
    return mode_count_stats(
        observed,
        resolution=config.census.resolution,
        min_prominence=config.census.min_prominence,
        margin=config.target.prior_margin,
    )


def main():
    parser = argparse.ArgumentParser(description="Compare mean mode counts at mu2=1 and mu2=5 (sigma2=1)")
    parser.add_argument('--config', help="YAML configuration file")
    parser.add_argument('--samples', type=int, default=100, help="Samples per cell")
    parser.add_argument('--n', type=int, default=100, help="Observations per sample")
    parser.add_argument('--p', type=float, default=0.3, help="Weight of the first component")
    parser.add_argument('--resolution', type=int, default=None, help="Grid cells per axis")
    parser.add_argument('--seed', type=int, default=None, help="Root seed")
    args = parser.parse_args()

    try:
        config = apply_overrides(
            load_config(args.config),
            {"seed": args.seed, "census.resolution": args.resolution},
        )
    except ConfigError as e:
        print(f"ERROR: {e}")
        sys.exit(2)

    print("Mode Count Trend")
    print("=" * 60)
    print(f"n={args.n} p={args.p} sigma2=1, {args.samples} samples per cell, "
          f"resolution {config.census.resolution}")
    print()

    results = {}
    for mu2 in EXPECTED_MODES:
        stats = census_stats(config, CellKey(args.n, args.p, mu2, 1.0), args.samples)
        results[mu2] = stats
        print(f"  mu2={mu2:g}: {stats.mean:.3f} ({stats.sd:.3f}) modes")

    print()
    passed = True
    for mu2, (expected, tolerance) in EXPECTED_MODES.items():
        if abs(results[mu2].mean - expected) <= tolerance:
            print(f"✓ mu2={mu2:g} within {expected} ± {tolerance}")
        else:
            print(f"✗ mu2={mu2:g} outside {expected} ± {tolerance}")
            passed = False
    if results[5.0].mean > results[1.0].mean:
        print("✓ More modes for well-separated clusters")
    else:
        print("✗ Mode count did not increase with mu2")
        passed = False
    if not passed:
        sys.exit(1)


if __name__ == "__main__":
    main()
