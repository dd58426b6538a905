"""Linear, circular and synchronized circular three-wave mixing on carvone.

The subsystem is (2_02, 3_13, 3_12) starting from the M-averaged 2_02
level. The z-polarized half pulse runs at ``--half-intensity``; twist and
probe pulses at ``--intensity``.
"""

import argparse

from threewave.coupling import Subsystem
from threewave.designer import SchemeSpec, build_scheme
from threewave.ensemble import simulate_enantiomers, uniform_level_ensemble
from threewave.rotor import MoleculeSpec

LEVELS = ("2_02", "3_13", "3_12")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--intensity", type=float, default=10.0, help="W/cm^2")
    ap.add_argument("--half-intensity", type=float, default=100.0, help="W/cm^2")
    ap.add_argument("--epsilon", type=float, default=0.05)
    args = ap.parse_args()

    system = Subsystem.from_labels(MoleculeSpec(2237.2, 656.3, 579.6, 2.0, 3.0, 0.5), LEVELS)
    ens = uniform_level_ensemble(system.level(LEVELS[0]), system)
    print(f"{'scheme':<22} {'S':>7} {'p(2_02)':>8} {'t_end/us':>9}  final levels (+ | -)")
    for name in ("linear-xyz", "circular", "circular-synchronized"):
        spec = SchemeSpec.default(name, LEVELS, args.intensity, args.half_intensity, epsilon=args.epsilon)
        seq = build_scheme(spec, system)
        pops = simulate_enantiomers(system, ens, seq, [seq.t_start, seq.t_end])
        rec = pops.selectivity()
        pp, pm = pops.final_levels(1), pops.final_levels(-1)
        rem = 0.5 * (pp[0] + pm[0])
        print(f"{name:<22} {rec.S:7.4f} {rem:8.4f} {seq.t_end:9.3f}  "
              f"{' '.join(f'{x:.3f}' for x in pp)} | {' '.join(f'{x:.3f}' for x in pm)}")


if __name__ == "__main__":
    main()
