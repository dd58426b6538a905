"""S(T) for the three carvone schemes, written as CSV.

Reads the carvone config (override with ``--config``) and runs each scheme
against a Boltzmann ensemble over the subsystem levels.
"""

import argparse
import csv
import sys
from pathlib import Path

from threewave.cli import load_config, sweep_temperature

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "carvone.json")
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    args = ap.parse_args()

    rows, _ = sweep_temperature(load_config(args.config), threads=args.threads)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["temperature_K", "scheme", "S", "S_literal", "status"])
    w.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
