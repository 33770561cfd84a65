#!/usr/bin/env python3
"""Run the statistical certification suite at full sample sizes.

Checks the Gamma distortion law (one-sample KS), the Chernoff exceedance
bound, and pipeline-vs-spectrum-sampler equivalence (two-sample KS), each
against its 1% critical value. Exits nonzero if any check fails.
"""

import argparse
import sys

from aircomp.cli import main as aircomp_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--ks-trials", type=int, default=10_000)
    parser.add_argument("--chernoff-trials", type=int, default=100_000)
    parser.add_argument("--oracle-n", type=int, default=10_000)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    return aircomp_main(
        [
            "dist-test",
            "--seed", str(args.seed),
            "--ks-trials", str(args.ks_trials),
            "--chernoff-trials", str(args.chernoff_trials),
            "--oracle-n", str(args.oracle_n),
            "--threads", str(args.threads),
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
