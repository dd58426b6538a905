"""Initial ensembles, population bookkeeping and enantiomer selectivity.

Diagonal initial density operators are unravelled into weighted pure
members which are propagated independently (all members of one
enantiomer in a single batched propagation).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc

from .coupling import Subsystem
from .dynamics import propagate

__all__ = [
    "EnsembleState",
    "PopulationRecord",
    "SelectivityReport",
    "uniform_level_ensemble",
    "thermal_ensemble",
    "thermal_weights",
    "selectivity",
    "simulate_enantiomers",
    "final_selectivity",
]

# k_B / h in MHz per kelvin
KB_MHZ_PER_K = sc.k / sc.h * 1e-6


@dataclass(frozen=True)
class EnsembleState:
    """Weighted mixture of unit-norm coefficient vectors (columns of ``psi``)."""

    weights: np.ndarray
    psi: np.ndarray
    enantiomer: int = 1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim != 2 or psi.shape[1] != w.size:
            raise ValueError("psi must have one column per weight")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError("weights must be non-negative and sum to 1")
        if not np.allclose(np.linalg.norm(psi, axis=0), 1.0, atol=1e-12):
            raise ValueError("ensemble members must be normalized")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "psi", psi)

    @property
    def members(self):
        return [(w, self.psi[:, i]) for i, w in enumerate(self.weights)]

    def __len__(self):
        return self.weights.size

    def with_enantiomer(self, enantiomer: int) -> "EnsembleState":
        return EnsembleState(self.weights, self.psi, enantiomer)


def _basis_members(system: Subsystem, indices, weights, enantiomer):
    psi = np.zeros((system.dim, len(indices)), dtype=complex)
    psi[indices, np.arange(len(indices))] = 1.0
    return EnsembleState(np.asarray(weights, dtype=float), psi, enantiomer)


def uniform_level_ensemble(level, system: Subsystem, enantiomer: int = 1) -> EnsembleState:
    """All ``2J+1`` M-states of ``level`` with weight ``1/(2J+1)``."""
    sl = system.level_slice(level)
    idx = np.arange(sl.start, sl.stop)
    return _basis_members(system, idx, np.full(idx.size, 1.0 / idx.size), enantiomer)


def thermal_weights(levels, T: float) -> np.ndarray:
    """Boltzmann weight of a single M-state of each level, normalized over all M."""
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    if len(levels) == 0:
        raise ValueError("need at least one level")
    E = np.array([lvl.energy for lvl in levels])
    g = np.array([2 * lvl.J + 1 for lvl in levels])
    boltz = np.exp(-(E - E.min()) / (KB_MHZ_PER_K * T))
    return boltz / np.sum(g * boltz)


def thermal_ensemble(system: Subsystem, T: float, enantiomer: int = 1, levels=None) -> EnsembleState:
    """One member per (level, M) with Boltzmann weight ``exp(-E/kT)/Q``."""
    levels = system.levels if levels is None else [system.level(l) for l in levels]
    p = thermal_weights(levels, T)
    idx, w = [], []
    for lvl, pl in zip(levels, p):
        sl = system.level_slice(lvl)
        idx += list(range(sl.start, sl.stop))
        w += [pl] * (sl.stop - sl.start)
    w = np.array(w)
    return _basis_members(system, np.array(idx), w / w.sum(), enantiomer)


@dataclass
class PopulationRecord:
    """Per-state populations over time for both enantiomers.

    ``populations[e]`` has shape ``(n_times, n_states)`` for enantiomer
    ``e`` in ``(+1, -1)``; states follow ``system.basis``.
    """

    times: np.ndarray
    system: Subsystem
    populations: dict = field(default_factory=dict)

    def level_populations(self, enantiomer: int) -> np.ndarray:
        """``(n_times, n_levels)``: populations summed over M."""
        pop = self.populations[enantiomer]
        idx = self.system.level_index()
        out = np.zeros((pop.shape[0], len(self.system.levels)))
        for k in range(len(self.system.levels)):
            out[:, k] = pop[:, idx == k].sum(axis=1)
        return out

    def final_levels(self, enantiomer: int) -> np.ndarray:
        return self.level_populations(enantiomer)[-1]

    def selectivity(self) -> "SelectivityReport":
        return selectivity(self.final_levels(1), self.final_levels(-1))

    def columns(self):
        """Column names and a 2-d array in the wide CSV layout."""
        names = ["time_us"]
        cols = [self.times]
        for e, tag in ((1, "plus"), (-1, "minus")):
            if e not in self.populations:
                continue
            pop = self.populations[e]
            for j, st in enumerate(self.system.basis):
                names.append(f"pop[{st.level.label};M={st.M};{tag}]")
                cols.append(pop[:, j])
        return names, np.column_stack(cols)


@dataclass(frozen=True)
class SelectivityReport:
    """``S`` (half the summed absolute population differences) and the
    per-level normalized variant ``S_literal = sum_i |p+ - p-| / (p+ + p-)``."""

    delta: np.ndarray
    normalized: np.ndarray
    S: float
    S_literal: float
    variant: str = "half-absolute"

    def to_dict(self):
        return {
            "variant": self.variant,
            "S": float(self.S),
            "S_literal": float(self.S_literal),
            "delta_p": [float(x) for x in self.delta],
            "delta_p_normalized": [float(x) for x in self.normalized],
        }


def selectivity(pop_plus, pop_minus, floor: float = 1e-12) -> SelectivityReport:
    pp = np.asarray(pop_plus, dtype=float)
    pm = np.asarray(pop_minus, dtype=float)
    if pp.shape != pm.shape or pp.ndim != 1:
        raise ValueError("population vectors must cover the same level set")
    delta = np.abs(pp - pm)
    tot = pp + pm
    norm = np.where(tot < floor, 0.0, delta / np.where(tot < floor, 1.0, tot))
    return SelectivityReport(delta, norm, 0.5 * float(delta.sum()), float(norm.sum()))


def _propagate_members(system, ensemble, seq, grid, method, kw):
    amp = propagate(ensemble.psi, seq, system.with_chirality(ensemble.enantiomer), grid, method=method, **kw)
    return np.einsum("tnk,k->tn", np.abs(amp) ** 2, ensemble.weights)


def simulate_enantiomers(
    system: Subsystem,
    ensemble: EnsembleState,
    seq,
    grid,
    method: str = "rwa",
    threads: int = 1,
    **kw,
) -> PopulationRecord:
    """Propagate ``ensemble`` for both enantiomers and record populations."""
    grid = np.asarray(grid, dtype=float)
    jobs = [ensemble.with_enantiomer(e) for e in (1, -1)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, 2)) as ex:
            pops = list(ex.map(lambda e: _propagate_members(system, e, seq, grid, method, kw), jobs))
    else:
        pops = [_propagate_members(system, e, seq, grid, method, kw) for e in jobs]
    return PopulationRecord(grid, system, {1: pops[0], -1: pops[1]})


def final_selectivity(system, ensemble, seq, method: str = "rwa", **kw) -> SelectivityReport:
    """Selectivity at the end of ``seq``."""
    t_end = max(seq.t_end, 0.0)
    rec = simulate_enantiomers(system, ensemble, seq, [t_end], method=method, **kw)
    return rec.selectivity()
