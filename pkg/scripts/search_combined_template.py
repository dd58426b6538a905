"""Search for the overlapping seven-field template of the combined scheme.

Each field is a rectangular RWA drive on one carrier of the
(0_00, 1_11, 1_10) system with its own start, duration, strength and
phase, all in reduced units where a strength of 1 means a reference Rabi
frequency of 1. Random starts are refined with Nelder-Mead; the best
parameter set is printed as rows for ``COMBINED_TEMPLATE``.

    python scripts/search_combined_template.py --seed 0 --trials 30
"""

import argparse

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from threewave.coupling import RABI_PER_DEBYE_VM, Subsystem
from threewave.designer import reference_rabi
from threewave.rotor import MoleculeSpec

LEVELS = ("0_00", "1_11", "1_10")
CARRIERS = {"w1": LEVELS[:2], "w2": LEVELS[1:], "w3": (LEVELS[0], LEVELS[2])}
FIELDS = [("w1", "x"), ("w1", "y"), ("w1", "z"), ("w2", "x"), ("w2", "z"), ("w3", "y"), ("w3", "z")]


def generators(system):
    """Upward coupling of every field, scaled to unit reference Rabi frequency."""
    out = []
    for carrier, pol in FIELDS:
        pair = CARRIERS[carrier]
        lower, upper, _ = system.pair(*pair)
        X = np.zeros((system.dim, system.dim), dtype=complex)
        X[system.level_slice(upper), system.level_slice(lower)] = system.pair_block(pol, *pair)
        out.append(X / reference_rabi(system, pol, *pair, 1.0 / RABI_PER_DEBYE_VM))
    return out


def make_objective(system):
    gens = {c: generators(system.with_chirality(c)) for c in (1, -1)}
    sl = system.level_slice(LEVELS[1])
    psi0 = np.zeros((system.dim, sl.stop - sl.start), dtype=complex)
    psi0[np.arange(sl.start, sl.stop), np.arange(sl.stop - sl.start)] = 1.0
    idx = system.level_index()
    n = len(FIELDS)

    def final_levels(c, x):
        t, d, a, ph = x[:n], np.abs(x[n:2 * n]) + 1e-6, x[2 * n:3 * n], x[3 * n:]
        edges = np.unique(np.concatenate([t, t + d]))
        psi = psi0
        for lo, hi in zip(edges[:-1], edges[1:]):
            H = np.zeros((system.dim, system.dim), dtype=complex)
            on = False
            for i, X in enumerate(gens[c]):
                if t[i] < hi - 1e-12 and t[i] + d[i] > lo + 1e-12:
                    h = -0.5 * a[i] * np.exp(-1j * ph[i]) * X
                    H += h + h.conj().T
                    on = True
            if on:
                psi = expm(-1j * H * (hi - lo)) @ psi
        p = (np.abs(psi) ** 2).sum(axis=1) / psi0.shape[1]
        return np.array([p[idx == k].sum() for k in range(3)])

    def S(x):
        return 0.5 * np.abs(final_levels(1, x) - final_levels(-1, x)).sum()

    return S


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--maxfev", type=int, default=6000)
    args = ap.parse_args()

    spec = MoleculeSpec(2237.2, 656.3, 579.6, 2.0, 3.0, 0.5)
    S = make_objective(Subsystem.from_labels(spec, LEVELS))
    rng = np.random.default_rng(args.seed)
    opts = dict(maxfev=args.maxfev, xatol=1e-6, fatol=1e-9, adaptive=True)
    n = len(FIELDS)
    best_S, best_x = -1.0, None
    for trial in range(args.trials):
        x = np.concatenate([rng.uniform(0, 3, n), rng.uniform(0.3, 1.5, n), rng.uniform(0.5, 3, n),
                            rng.uniform(0, 2 * np.pi, n)])
        for _ in range(2):
            x = minimize(lambda v: -S(v), x, method="Nelder-Mead", options=opts).x
        if S(x) > best_S:
            best_S, best_x = S(x), x
            print(f"trial {trial}: S = {best_S:.12f}", flush=True)

    t, d, a, ph = best_x[:n], np.abs(best_x[n:2 * n]), best_x[2 * n:3 * n], np.mod(best_x[3 * n:], 2 * np.pi)
    t = t - t.min()
    print("# (carrier, pol, start, duration, strength, phase)")
    for i, (carrier, pol) in enumerate(FIELDS):
        print(f'("{carrier}", "{pol}", {t[i]:.4f}, {d[i]:.4f}, {a[i]:.4f}, {ph[i]:.4f}),')


if __name__ == "__main__":
    main()
