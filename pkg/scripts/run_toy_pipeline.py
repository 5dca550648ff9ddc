#!/usr/bin/env python3
"""Run the bundled toy corpus through the full pipeline.

Produces IR pairs, entity-distribution reports, artificial pairs, and five
cross-validation folds under --out.  Handy as a smoke run and as a template
for running the same pipeline on a real corpus directory.
"""

import argparse
import sys

from foodsem.cli import main as cli_main
from foodsem.pools import default_pool_path


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/toy", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threshold", type=int, default=150, help="entity coverage target")
    parser.add_argument(
        "--corpus-dir",
        default=str(default_pool_path().parent / "toy"),
        help="corpus directory (defaults to the bundled toy corpus)",
    )
    args = parser.parse_args()
    return cli_main(
        [
            "pipeline",
            "--corpus-dir",
            args.corpus_dir,
            "--out",
            args.out,
            "--seed",
            str(args.seed),
            "--threshold",
            str(args.threshold),
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
