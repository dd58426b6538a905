"""Lab-frame dipole couplings between asymmetric-top states.

The space-fixed dipole components are expanded in symmetric-top Wigner
D-operators and weighted by ``mu_a``, ``mu_b`` and ``chirality * mu_c``.
Matrix entries are in Debye. The lab y axis is taken right-handed with
respect to the D-matrix phase convention, so ``mu_x + i mu_y`` raises M.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import sqrt

import numpy as np
from scipy import constants as sc

from .angular import _wigner3j
from .rotor import MoleculeSpec, RotLevel, RotState, find_level, solve_levels

__all__ = [
    "Polarization",
    "CouplingMatrix",
    "Subsystem",
    "DEBYE",
    "RABI_PER_DEBYE_VM",
    "dipole_components",
    "dipole_matrix",
    "rabi_frequency",
    "field_amplitude_from_intensity",
    "transition_type",
]

DEBYE = 1e-21 / sc.c  # C m
# angular frequency in rad/us produced by 1 Debye in 1 V/m
RABI_PER_DEBYE_VM = DEBYE / sc.hbar * 1e-6


class Polarization(str, Enum):
    X = "x"
    Y = "y"
    Z = "z"
    SIGMA_PLUS = "sigma_plus"
    SIGMA_MINUS = "sigma_minus"

    @property
    def vector(self) -> np.ndarray:
        """Complex polarization vector; sigma+- is ``e_x +- i e_y`` (not normalized)."""
        return {
            "x": np.array([1, 0, 0], dtype=complex),
            "y": np.array([0, 1, 0], dtype=complex),
            "z": np.array([0, 0, 1], dtype=complex),
            "sigma_plus": np.array([1, 1j, 0]),
            "sigma_minus": np.array([1, -1j, 0]),
        }[self.value]

    @property
    def circular(self) -> bool:
        return self in (Polarization.SIGMA_PLUS, Polarization.SIGMA_MINUS)

    @property
    def delta_m(self):
        """M change of the bra relative to the ket allowed by this polarization."""
        return {"x": (-1, 1), "y": (-1, 1), "z": (0,), "sigma_plus": (1,), "sigma_minus": (-1,)}[
            self.value
        ]


def _as_pol(pol) -> Polarization:
    return pol if isinstance(pol, Polarization) else Polarization(pol)


# (lab M, molecular K) -> coefficient, per dipole type, from the expansion of
# the space-fixed components in D^1_{MK}. y carries the right-handed sign.
_R2 = 1 / sqrt(2)
_EXPANSION = {
    "x": {
        "a": {(-1, 0): _R2, (1, 0): -_R2},
        "b": {(1, 1): 0.5, (1, -1): -0.5, (-1, 1): -0.5, (-1, -1): 0.5},
        "c": {(1, 1): -0.5j, (1, -1): -0.5j, (-1, 1): 0.5j, (-1, -1): 0.5j},
    },
    "y": {
        "a": {(-1, 0): 1j * _R2, (1, 0): 1j * _R2},
        "b": {(1, 1): -0.5j, (1, -1): 0.5j, (-1, 1): -0.5j, (-1, -1): 0.5j},
        "c": {(1, 1): -0.5, (1, -1): -0.5, (-1, 1): -0.5, (-1, -1): -0.5},
    },
    "z": {
        "a": {(0, 0): 1.0},
        "b": {(0, 1): -_R2, (0, -1): _R2},
        "c": {(0, 1): 1j * _R2, (0, -1): 1j * _R2},
    },
}


@lru_cache(maxsize=4096)
def _d_block(lbra: RotLevel, lket: RotLevel, Md: int, Kd: int) -> np.ndarray:
    """``<bra, M''| D^1_{Md Kd} |ket, M'>`` between two asymmetric-top levels."""
    Jpp, Jp = lbra.J, lket.J
    out = np.zeros((2 * Jpp + 1, 2 * Jp + 1))
    if abs(Jpp - Jp) > 1:
        return out
    cpp, cp = lbra.coeffs, lket.coeffs
    kfac = 0.0
    for b, Kp in enumerate(range(-Jp, Jp + 1)):
        Kpp = Kp + Kd
        if abs(Kpp) > Jpp or cp[b] == 0.0:
            continue
        w = _wigner3j(Jp, 1, Jpp, Kp, Kd, -Kpp)
        if w:
            kfac += cp[b] * cpp[Kpp + Jpp] * (-1) ** (Kpp % 2) * w
    if kfac == 0.0:
        return out
    norm = sqrt((2 * Jpp + 1) * (2 * Jp + 1)) * kfac
    for j, Mp in enumerate(range(-Jp, Jp + 1)):
        Mpp = Mp + Md
        if abs(Mpp) > Jpp:
            continue
        w = _wigner3j(Jp, 1, Jpp, Mp, Md, -Mpp)
        if w:
            out[Mpp + Jpp, j] = norm * (-1) ** (Mpp % 2) * w
    return out


@lru_cache(maxsize=4096)
def _component_block(lbra: RotLevel, lket: RotLevel, axis: str, dtype: str) -> np.ndarray:
    terms = _EXPANSION[axis][dtype]
    out = np.zeros((2 * lbra.J + 1, 2 * lket.J + 1), dtype=complex)
    if lbra == lket:
        # every asymmetric-top level has a definite D2 symmetry and each dipole
        # component is antisymmetric under it, so the K-sum cancels exactly
        out.setflags(write=False)
        return out
    for (Md, Kd), coef in terms.items():
        out += coef * _d_block(lbra, lket, Md, Kd)
    out.setflags(write=False)
    return out


def _check_basis(basis, spec):
    key = spec.rotor_key
    for st in basis:
        if st.level.rotor_key and st.level.rotor_key != key:
            raise ValueError(f"state {st.label} does not belong to molecule {key}")


def dipole_components(pol, basis) -> tuple:
    """Unit-dipole a-, b- and c-type parts of ``mu . e_pol`` on ``basis``.

    Returns three complex ``(n, n)`` arrays; the physical matrix is
    ``mu_a * a + mu_b * b + chirality * mu_c * c``.
    """
    pol = _as_pol(pol)
    e = pol.vector
    n = len(basis)
    parts = []
    for dtype in "abc":
        mat = np.zeros((n, n), dtype=complex)
        for i, si in enumerate(basis):
            for j, sj in enumerate(basis):
                v = 0j
                for axis, ea in zip("xyz", e):
                    if ea:
                        blk = _component_block(si.level, sj.level, axis, dtype)
                        v += ea * blk[si.M + si.level.J, sj.M + sj.level.J]
                mat[i, j] = v
        parts.append(mat)
    return tuple(parts)


@dataclass(frozen=True)
class CouplingMatrix:
    """``<i| mu . e_pol |j>`` in Debye over an ordered basis of RotState."""

    pol: Polarization
    basis: tuple
    matrix: np.ndarray

    def element(self, bra: RotState, ket: RotState) -> complex:
        return self.matrix[self.basis.index(bra), self.basis.index(ket)]


def dipole_matrix(pol, basis, spec: MoleculeSpec) -> CouplingMatrix:
    basis = tuple(basis)
    _check_basis(basis, spec)
    a, b, c = dipole_components(pol, basis)
    m = spec.mu_a * a + spec.mu_b * b + spec.chirality * spec.mu_c * c
    m.setflags(write=False)
    return CouplingMatrix(_as_pol(pol), basis, m)


def rabi_frequency(upper: RotState, lower: RotState, pol, E0: float, spec: MoleculeSpec) -> float:
    """Resonant Rabi angular frequency in rad/us for ``E0`` in V/m.

    ``|<upper| mu . e_pol |lower>| * E0 / hbar``; zero for uncoupled pairs.
    """
    cm = dipole_matrix(pol, (upper, lower), spec)
    return abs(cm.matrix[0, 1]) * E0 * RABI_PER_DEBYE_VM


def field_amplitude_from_intensity(I: float) -> float:
    """Peak field in V/m of a plane wave with intensity ``I`` in W/cm^2."""
    if I < 0:
        raise ValueError(f"intensity must be non-negative, got {I}")
    return sqrt(2 * I * 1e4 / (sc.c * sc.epsilon_0))


def transition_type(l1: RotLevel, l2: RotLevel):
    """``'a'``, ``'b'`` or ``'c'`` for a dipole-allowed pair, else ``None``."""
    found = [d for d in "abc" if np.any(np.abs(_component_block(l1, l2, "z", d)) > 1e-12)]
    if not found:
        # z can miss Delta J = 0, M = 0 only pairs; x covers the rest
        found = [d for d in "abc" if np.any(np.abs(_component_block(l1, l2, "x", d)) > 1e-12)]
    if not found:
        return None
    return found[0] if len(found) == 1 else "".join(found)


class Subsystem:
    """A set of rotational levels with their full M-resolved basis.

    Coupling matrices are cached per polarization; ``mirror()`` returns the
    other enantiomer sharing the same cache of unit-dipole parts.
    """

    def __init__(self, spec: MoleculeSpec, levels, _cache=None):
        self.spec = spec
        self.levels = tuple(levels)
        if len(set(self.levels)) != len(self.levels):
            raise ValueError("duplicate levels in subsystem")
        self.basis = tuple(st for lvl in self.levels for st in lvl.states())
        _check_basis(self.basis, spec)
        self.energies = np.array([st.level.energy for st in self.basis])
        self._parts = {} if _cache is None else _cache

    @classmethod
    def from_labels(cls, spec: MoleculeSpec, labels) -> "Subsystem":
        J_max = max(int(lab.split("_")[0]) for lab in labels)
        levels = solve_levels(spec, J_max)
        return cls(spec, [find_level(levels, lab) for lab in labels])

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def labels(self):
        return [lvl.label for lvl in self.levels]

    def level(self, label_or_level) -> RotLevel:
        if isinstance(label_or_level, RotLevel):
            if label_or_level not in self.levels:
                raise KeyError(f"level {label_or_level.label} not in subsystem")
            return label_or_level
        return find_level(self.levels, label_or_level)

    def level_slice(self, level) -> slice:
        level = self.level(level)
        start = 0
        for lvl in self.levels:
            if lvl == level:
                return slice(start, start + 2 * lvl.J + 1)
            start += 2 * lvl.J + 1
        raise KeyError(level)

    def level_index(self):
        """Level position of every basis state."""
        return np.array([self.levels.index(st.level) for st in self.basis])

    def components(self, pol) -> tuple:
        pol = _as_pol(pol)
        if pol not in self._parts:
            parts = dipole_components(pol, self.basis)
            for p in parts:
                p.setflags(write=False)
            self._parts[pol] = parts
        return self._parts[pol]

    def matrix(self, pol) -> np.ndarray:
        a, b, c = self.components(pol)
        s = self.spec
        return s.mu_a * a + s.mu_b * b + s.chirality * s.mu_c * c

    def coupling(self, pol) -> CouplingMatrix:
        return CouplingMatrix(_as_pol(pol), self.basis, self.matrix(pol))

    def with_chirality(self, chirality: int) -> "Subsystem":
        if chirality == self.spec.chirality:
            return self
        return Subsystem(self.spec.with_chirality(chirality), self.levels, _cache=self._parts)

    def mirror(self) -> "Subsystem":
        return self.with_chirality(-self.spec.chirality)

    def pair(self, l1, l2):
        """``(lower, upper, frequency_MHz)`` for two levels of the subsystem."""
        l1, l2 = self.level(l1), self.level(l2)
        if l1.energy == l2.energy:
            from .rotor import DegeneracyError

            raise DegeneracyError(f"levels {l1.label} and {l2.label} are degenerate")
        lower, upper = (l1, l2) if l1.energy < l2.energy else (l2, l1)
        return lower, upper, upper.energy - lower.energy

    def pair_block(self, pol, l1, l2) -> np.ndarray:
        """Coupling block ``<upper, M''| mu . e |lower, M'>`` in Debye."""
        lower, upper, _ = self.pair(l1, l2)
        m = self.matrix(pol)
        return m[self.level_slice(upper), self.level_slice(lower)]

    def pair_rabi(self, pol, l1, l2, E0: float) -> np.ndarray:
        """Singular-value Rabi frequencies (rad/us) of a resonant pair.

        For z and sigma+- drives these are the per-M two-level Rabi
        frequencies; zeros are dropped.
        """
        blk = self.pair_block(pol, l1, l2)
        s = np.linalg.svd(blk, compute_uv=False)
        return s[s > 1e-12 * max(1.0, s.max(initial=0.0))] * E0 * RABI_PER_DEBYE_VM

    def transition_type(self, l1, l2):
        return transition_type(self.level(l1), self.level(l2))
