"""Synchronization time against accuracy for three z-polarized transitions.

For each transition the earliest pulse duration at which every M-component
reaches a 50/50 split within epsilon is printed over a log-spaced epsilon
grid. A dash marks a search that ran out of horizon.
"""

import argparse

import numpy as np

from threewave.coupling import Subsystem
from threewave.designer import SearchHorizonError, sync_search
from threewave.rotor import MoleculeSpec

TRANSITIONS = [("1_01", "2_11"), ("2_02", "3_12"), ("3_03", "4_13")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--intensity", type=float, default=10.0, help="W/cm^2")
    ap.add_argument("--points", type=int, default=12)
    ap.add_argument("--horizon", type=float, default=1e4, help="Rabi periods of the slowest component")
    args = ap.parse_args()

    spec = MoleculeSpec(2237.2, 656.3, 579.6, 2.0, 3.0, 0.5)
    eps_grid = np.geomspace(1e-3, 0.3, args.points)
    systems = [Subsystem.from_labels(spec, list(pair)) for pair in TRANSITIONS]
    print("epsilon   " + "".join(f"{a + '->' + b:>14}" for a, b in TRANSITIONS) + "   (duration in us)")
    for eps in eps_grid:
        cells = []
        for system, pair in zip(systems, TRANSITIONS):
            try:
                cells.append(f"{sync_search(system, pair, 'z', args.intensity, eps, horizon_periods=args.horizon).duration:14.4g}")
            except SearchHorizonError:
                cells.append(f"{'-':>14}")
        print(f"{eps:<10.4g}" + "".join(cells))


if __name__ == "__main__":
    main()
