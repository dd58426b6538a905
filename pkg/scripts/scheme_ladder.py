"""Selectivity of one, two and three cycles on the (0_00, 1_11, 1_10) system.

Starts from the M-averaged 1_11 level. Cycle (i) alone and cycles (ii)+(i)
are back-to-back pulse trains; the combined scheme uses the overlapping
seven-field template and is then refined by the optimizer.

    python scripts/scheme_ladder.py [--budget 400]
"""

import argparse
import time

from threewave.coupling import Subsystem
from threewave.designer import (
    FreeParameter,
    SchemeSpec,
    SequenceTemplate,
    build_scheme,
    j01_cycles,
    optimize_sequence,
    resolve_phases,
    selectivity_objective,
    sequential_pulses,
)
from threewave.ensemble import final_selectivity, uniform_level_ensemble
from threewave.rotor import MoleculeSpec

LEVELS = ("0_00", "1_11", "1_10")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--budget", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    system = Subsystem.from_labels(MoleculeSpec(2237.2, 656.3, 579.6, 2.0, 3.0, 0.5), LEVELS)
    ens = uniform_level_ensemble(system.level("1_11"), system)
    cycles = j01_cycles(LEVELS)

    seq = build_scheme(SchemeSpec("linear-xyz", LEVELS, cycles["i"], initial="1_11"), system)
    print(f"cycle (i)          S = {final_selectivity(system, ens, seq).S:.4f}")

    seq = sequential_pulses(system, cycles["ii"] + cycles["i"][1:])
    seq = resolve_phases(system, seq, ens, [2, 4])
    print(f"cycles (ii)+(i)    S = {final_selectivity(system, ens, seq).S:.4f}")

    seq = build_scheme(SchemeSpec.default("combined-3cycles", LEVELS, initial="1_11"), system)
    template = SequenceTemplate(seq, [FreeParameter(i, "amplitude", 0.7, 1.3) for i in range(len(seq))])
    t = time.perf_counter()
    res = optimize_sequence(template, selectivity_objective(system, ens), budget=args.budget, restarts=1, seed=args.seed)
    print(f"combined template  S = {res.S_start:.6f}")
    print(f"after optimization S = {res.S:.6f} ({res.evaluations} evaluations, "
          f"{'converged' if res.converged else 'not converged'}, {time.perf_counter() - t:.0f} s)")


if __name__ == "__main__":
    main()
