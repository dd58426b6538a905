"""Rigid asymmetric-top levels.

The Hamiltonian ``A Ja^2 + B Jb^2 + C Jc^2`` is built per J-block in the
prolate symmetric-top basis ``|J, K>`` (quantization along the a axis,
representation I^r) and diagonalized. Energies are frequencies in MHz (E/h).
"""

import re
from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np

__all__ = [
    "DegeneracyError",
    "MoleculeSpec",
    "RotLevel",
    "RotState",
    "build_j_block",
    "solve_levels",
    "transition_frequency",
    "find_level",
    "parse_label",
]


class DegeneracyError(ValueError):
    """Two levels share the same energy, so no transition frequency exists."""


@dataclass(frozen=True)
class MoleculeSpec:
    """Rotational constants (MHz), dipole components (Debye) and handedness.

    ``chirality`` multiplies ``mu_c``; the two enantiomers differ only in it.
    """

    A: float
    B: float
    C: float
    mu_a: float = 0.0
    mu_b: float = 0.0
    mu_c: float = 0.0
    chirality: int = 1
    name: str = ""

    def __post_init__(self):
        if not (self.A >= self.B >= self.C > 0):
            raise ValueError(
                f"rotational constants must satisfy A >= B >= C > 0, got {self.A}, {self.B}, {self.C}"
            )
        if self.chirality not in (1, -1):
            raise ValueError(f"chirality must be +1 or -1, got {self.chirality}")

    @property
    def rotor_key(self):
        return (float(self.A), float(self.B), float(self.C))

    def mirror(self) -> "MoleculeSpec":
        """The other enantiomer."""
        return replace(self, chirality=-self.chirality)

    def with_chirality(self, chirality: int) -> "MoleculeSpec":
        return replace(self, chirality=chirality)


@dataclass(frozen=True)
class RotLevel:
    J: int
    tau: int
    Ka: int
    Kc: int
    energy: float
    coeffs: tuple = field(repr=False)
    rotor_key: tuple = field(default=(), repr=False, compare=True)

    @property
    def label(self) -> str:
        return f"{self.J}_{self.Ka}{self.Kc}"

    def coeff_array(self) -> np.ndarray:
        """Expansion coefficients ``c_K`` for ``K = -J..J``."""
        return np.asarray(self.coeffs, dtype=float)

    def states(self):
        return [RotState(self, M) for M in range(-self.J, self.J + 1)]

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class RotState:
    level: RotLevel
    M: int

    def __post_init__(self):
        if abs(self.M) > self.level.J:
            raise ValueError(f"|M| must not exceed J={self.level.J}, got M={self.M}")

    @property
    def label(self) -> str:
        return f"{self.level.label},M={self.M}"


def build_j_block(J: int, spec: MoleculeSpec) -> np.ndarray:
    """Real symmetric ``(2J+1, 2J+1)`` block of the rotor Hamiltonian, rows ``K=-J..J``."""
    if J < 0:
        raise ValueError(f"J must be non-negative, got {J}")
    A, B, C = spec.A, spec.B, spec.C
    n = 2 * J + 1
    jj = J * (J + 1)
    H = np.zeros((n, n))
    for i, K in enumerate(range(-J, J + 1)):
        H[i, i] = 0.5 * (B + C) * (jj - K * K) + A * K * K
        if K + 2 <= J:
            off = 0.25 * (B - C) * sqrt((jj - K * (K + 1)) * (jj - (K + 1) * (K + 2)))
            H[i + 2, i] = H[i, i + 2] = off
    return H


def _ka_kc(J, k):
    # k = tau + J counts levels up from the bottom of the J-block
    return (k + 1) // 2, J - k // 2


def solve_levels(spec: MoleculeSpec, J_max: int) -> list:
    """All levels with ``J <= J_max``, ordered by J then ascending energy (tau)."""
    if J_max < 0:
        raise ValueError(f"J_max must be non-negative, got {J_max}")
    levels = []
    for J in range(J_max + 1):
        energies, vecs = np.linalg.eigh(build_j_block(J, spec))
        for k in range(2 * J + 1):
            v = vecs[:, k]
            # sign fix: the first largest-magnitude coefficient is positive
            imax = int(np.argmax(np.round(np.abs(v), 12)))
            if v[imax] < 0:
                v = -v
            Ka, Kc = _ka_kc(J, k)
            levels.append(
                RotLevel(
                    J=J,
                    tau=k - J,
                    Ka=Ka,
                    Kc=Kc,
                    energy=float(energies[k]),
                    coeffs=tuple(float(x) for x in v),
                    rotor_key=spec.rotor_key,
                )
            )
    return levels


def transition_frequency(l1: RotLevel, l2: RotLevel, rtol: float = 1e-12):
    """Transition frequency in MHz and whether ``l2`` is the upper level.

    Returns ``(frequency, l2_is_upper)``.
    """
    if l1.rotor_key and l2.rotor_key and l1.rotor_key != l2.rotor_key:
        raise ValueError("levels belong to different molecules")
    delta = l2.energy - l1.energy
    scale = max(1.0, abs(l1.energy), abs(l2.energy))
    if abs(delta) <= rtol * scale:
        raise DegeneracyError(f"levels {l1.label} and {l2.label} are degenerate")
    return abs(delta), delta > 0


_LABEL = re.compile(r"^\s*(\d+)\s*_\s*\{?\s*(\d+)\s*,?\s*(\d+)\s*\}?\s*$")


def parse_label(label: str):
    """Parse ``"J_KaKc"`` (``"3_12"``, ``"3_{1,2}"``, ``"12_3,10"``) into ``(J, Ka, Kc)``."""
    m = _LABEL.match(label)
    if not m:
        raise ValueError(f"cannot parse level label {label!r}")
    J = int(m.group(1))
    if "," in label:
        Ka, Kc = int(m.group(2)), int(m.group(3))
    else:
        digits = re.sub(r"[^0-9]", "", label.split("_", 1)[1])
        # split the digit run so that Ka + Kc is J or J + 1
        for cut in range(1, len(digits)):
            Ka, Kc = int(digits[:cut]), int(digits[cut:])
            if Ka + Kc in (J, J + 1) and Ka <= J and Kc <= J:
                break
        else:
            raise ValueError(f"inconsistent level label {label!r}")
    if Ka > J or Kc > J or Ka + Kc not in (J, J + 1):
        raise ValueError(f"inconsistent level label {label!r}")
    return J, Ka, Kc


def find_level(levels, label: str) -> RotLevel:
    J, Ka, Kc = parse_label(label)
    for lvl in levels:
        if (lvl.J, lvl.Ka, lvl.Kc) == (J, Ka, Kc):
            return lvl
    raise KeyError(f"level {label} not among the solved levels")
