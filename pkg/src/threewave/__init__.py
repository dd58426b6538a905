"""Enantiomer-selective microwave three-wave mixing in asymmetric-top rotors."""

from .angular import symtop_element, wigner3j
from .coupling import Polarization, Subsystem, dipole_matrix, field_amplitude_from_intensity, rabi_frequency
from .designer import (
    CycleSlot,
    FreeParameter,
    SchemeSpec,
    SequenceTemplate,
    build_scheme,
    optimize_sequence,
    pulse_area_duration,
    sync_search,
)
from .dynamics import Envelope, Pulse, PulseSequence, propagate, propagate_full, propagate_rwa
from .ensemble import selectivity, simulate_enantiomers, thermal_ensemble, uniform_level_ensemble
from .rotor import MoleculeSpec, RotLevel, RotState, solve_levels

__version__ = "0.1.0"

__all__ = [
    "CycleSlot",
    "Envelope",
    "FreeParameter",
    "MoleculeSpec",
    "Polarization",
    "Pulse",
    "PulseSequence",
    "RotLevel",
    "RotState",
    "SchemeSpec",
    "SequenceTemplate",
    "Subsystem",
    "build_scheme",
    "dipole_matrix",
    "field_amplitude_from_intensity",
    "optimize_sequence",
    "propagate",
    "propagate_full",
    "propagate_rwa",
    "pulse_area_duration",
    "rabi_frequency",
    "selectivity",
    "simulate_enantiomers",
    "solve_levels",
    "symtop_element",
    "sync_search",
    "thermal_ensemble",
    "uniform_level_ensemble",
    "wigner3j",
]
