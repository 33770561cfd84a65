#!/usr/bin/env python3
"""Regenerate the three result tables (MSE vs SNR, rate regions, blocklength).

Thin wrapper over the `aircomp figures` subcommands; writes one CSV per
table into --out-dir. Increase --trials for smoother Monte Carlo columns.
"""

import argparse
import sys

from aircomp.cli import main as aircomp_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    for which in (2, 3, 4):
        argv = [
            "figures",
            "--which", str(which),
            "--out-dir", args.out_dir,
            "--seed", str(args.seed),
            "--threads", str(args.threads),
        ]
        if args.trials is not None and which != 3:
            argv += ["--trials", str(args.trials)]
        code = aircomp_main(argv)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
