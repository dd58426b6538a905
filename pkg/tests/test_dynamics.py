from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from threewave.coupling import Subsystem, field_amplitude_from_intensity
from threewave.dynamics import (
    ChebyshevStepper,
    Envelope,
    PropagationError,
    Pulse,
    PulseSequence,
    ResonanceError,
    propagate,
    propagate_full,
    propagate_rwa,
)
from threewave.rotor import MoleculeSpec

from .oracles import rabi_two_level

RECT = Envelope("rect")
# a-type only rotor: 0_00 -> 1_01 is a single M=0 two-level system under z
LINEAR_A = MoleculeSpec(3000.0, 700.0, 600.0, mu_a=1.0)


def basis_index(system, label, M):
    return next(k for k, s in enumerate(system.basis) if s.level.label == label and s.M == M)


def unit(system, label, M):
    psi = np.zeros(system.dim, dtype=complex)
    psi[basis_index(system, label, M)] = 1.0
    return psi


@pytest.fixture(scope="module")
def two_level():
    return Subsystem.from_labels(LINEAR_A, ["0_00", "1_01"])


# ------------------------------------------------------------ envelopes and pulses


@pytest.mark.parametrize("env", [Envelope("rect"), Envelope("sin2", 0.05), Envelope("sin2", 0.5), Envelope("gauss", sigma=0.2)])
def test_area_fraction_matches_quadrature(env):
    val, _ = quad(lambda x: env.at(x), 0, 1, points=[env.ramp, 1 - env.ramp], limit=200)
    assert env.area_fraction() == pytest.approx(val, rel=1e-10)
    x = np.linspace(-0.2, 1.2, 57)
    assert np.allclose(env(x), [env.at(v) for v in x], atol=1e-15)


def test_invalid_envelopes_and_pulses():
    with pytest.raises(ValueError):
        Envelope("triangle")
    with pytest.raises(ValueError):
        Envelope("sin2", ramp=0.0)
    with pytest.raises(ValueError):
        Pulse("z", 100.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        Pulse("z", 100.0, -1.0, 0.0, 1.0)


def test_sequence_round_trip():
    seq = PulseSequence([
        Pulse("z", 1234.5, 10.0, 0.0, 1.0, 0.3, Envelope("gauss", sigma=0.2), "a"),
        Pulse("sigma_plus", 99.0, 2.0, 0.5, 2.0),
    ])
    assert PulseSequence.from_list(seq.to_list()) == seq
    assert seq.t_start == 0.0 and seq.t_end == 2.5


# ------------------------------------------------------------ Chebyshev stepper


def test_chebyshev_matches_expm():
    from scipy.linalg import expm

    rng = np.random.default_rng(1)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    H = A + A.conj().T
    ev = np.linalg.eigvalsh(H)
    for dt in (0.01, 0.7, 5.0):
        st_ = ChebyshevStepper(ev[0] - 0.1, ev[-1] + 0.1, dt, tol=1e-14)
        assert np.allclose(st_.matrix(H), expm(-1j * H * dt), atol=1e-12)


def test_chebyshev_reports_failure():
    with pytest.raises(PropagationError):
        ChebyshevStepper(-1e6, 1e6, 10.0, max_order=1000)


# ------------------------------------------------------------ field-free and two-level


@pytest.mark.parametrize("method", ["rwa", "full"])
def test_zero_field_phases(j01_system, method):
    _, _, f = j01_system.pair("0_00", "1_11")
    seq = PulseSequence([Pulse("x", f, 0.0, 0.0, 0.05, envelope=RECT)])
    rng = np.random.default_rng(0)
    psi0 = rng.normal(size=j01_system.dim) + 1j * rng.normal(size=j01_system.dim)
    psi0 /= np.linalg.norm(psi0)
    grid = np.linspace(0, 0.05, 6)
    out = propagate(psi0, seq, j01_system, grid, method=method)
    ref = np.exp(-2j * np.pi * np.outer(grid, j01_system.energies)) * psi0
    assert np.allclose(out, ref, atol=1e-9)


def test_rwa_two_level_is_exact(two_level):
    lower, upper, f = two_level.pair("0_00", "1_01")
    E0 = 500.0
    om = two_level.pair_rabi("z", "0_00", "1_01", E0)[0]
    seq = PulseSequence([Pulse("z", f, E0, 0.0, 4 * np.pi / om, envelope=RECT)])
    grid = np.linspace(0, seq.t_end, 41)
    p = np.abs(propagate_rwa(unit(two_level, "0_00", 0), seq, two_level, grid)[:, basis_index(two_level, "1_01", 0)]) ** 2
    assert np.allclose(p, rabi_two_level(om, grid), atol=1e-12)


def test_full_field_pi_pulse(two_level):
    _, _, f = two_level.pair("0_00", "1_01")
    om_target = 2 * np.pi * f * 1e-3
    E0 = om_target / two_level.pair_rabi("z", "0_00", "1_01", 1.0)[0]
    seq = PulseSequence([Pulse("z", f, E0, 0.0, np.pi / om_target, envelope=RECT)])
    grid = np.linspace(0, seq.t_end, 11)
    a = propagate_full(unit(two_level, "0_00", 0), seq, two_level, grid)
    p = np.abs(a[:, basis_index(two_level, "1_01", 0)]) ** 2
    assert p[-1] >= 0.999
    assert np.allclose(p, rabi_two_level(om_target, grid), atol=1e-3)


def test_rwa_sin2_converges_at_fourth_order(two_level):
    _, _, f = two_level.pair("0_00", "1_01")
    E0 = 300.0
    psi0 = unit(two_level, "0_00", 0)
    seq = PulseSequence([Pulse("z", f, E0, 0.0, 0.05, envelope=Envelope("gauss", sigma=0.15))])
    ref = propagate_rwa(psi0, seq, two_level, [0, 0.05], dt=0.05 / 4000)[-1]
    errs = [np.abs(propagate_rwa(psi0, seq, two_level, [0, 0.05], dt=0.05 / n)[-1] - ref).max() for n in (25, 50)]
    assert errs[0] / errs[1] > 12


def test_resonance_error(two_level):
    _, _, f = two_level.pair("0_00", "1_01")
    seq = PulseSequence([Pulse("z", f + 0.01, 100.0, 0.0, 1.0)])
    with pytest.raises(ResonanceError):
        propagate_rwa(unit(two_level, "0_00", 0), seq, two_level, [0, 1.0])
    # 1 kHz is still resonant
    seq = PulseSequence([Pulse("z", f + 0.0009, 100.0, 0.0, 1.0)])
    propagate_rwa(unit(two_level, "0_00", 0), seq, two_level, [0, 1.0])


# ------------------------------------------------------------ selection rules and decompositions


def test_z_pulse_keeps_m(carvone_system):
    s = carvone_system
    _, _, f = s.pair("2_02", "3_12")
    seq = PulseSequence([Pulse("z", f, field_amplitude_from_intensity(10.0), 0.0, 2.0)])
    Ms = np.array([b.M for b in s.basis])
    sl = s.level_slice("2_02")
    for k in range(sl.start, sl.stop):
        psi0 = np.zeros(s.dim, complex)
        psi0[k] = 1.0
        p = np.abs(propagate_rwa(psi0, seq, s, [0, 1.0, 2.0])) ** 2
        assert np.all(p[:, Ms != s.basis[k].M] <= 1e-12)


def test_sigma_plus_two_level_subspaces(carvone_system):
    s = carvone_system
    _, _, f = s.pair("2_02", "3_13")
    seq = PulseSequence([Pulse("sigma_plus", f, field_amplitude_from_intensity(10.0), 0.0, 1.0)])
    for M in range(-2, 3):
        allowed = {basis_index(s, "2_02", M), basis_index(s, "3_13", M + 1)}
        p = np.abs(propagate_rwa(unit(s, "2_02", M), seq, s, np.linspace(0, 1, 5))) ** 2
        mask = np.ones(s.dim, bool)
        mask[list(allowed)] = False
        assert np.all(p[:, mask] <= 1e-12)


def test_x_pulse_inverts_m_ladder(carvone):
    s = Subsystem.from_labels(carvone, ["3_13", "3_12"])
    _, _, f = s.pair("3_13", "3_12")
    E0 = field_amplitude_from_intensity(10.0)
    om = s.pair_rabi("x", "3_13", "3_12", E0)
    assert np.allclose(np.unique(np.round(om / om.min(), 12)), [1, 2, 3])
    t = 2 * np.pi / om.min()
    seq = PulseSequence([Pulse("x", f, E0, 0.0, t, envelope=RECT)])
    a = propagate_rwa(unit(s, "3_13", -3), seq, s, [0, t])
    assert abs(a[-1, basis_index(s, "3_13", 3)]) ** 2 >= 0.99


def test_full_vs_rwa_three_rabi_cycles(carvone):
    # z drive on the Delta J = 0 pair from 3_13 with Omega/omega <= 1e-3
    s = Subsystem.from_labels(carvone, ["3_13", "3_12"])
    _, _, f = s.pair("3_13", "3_12")
    om_max = 1e-3 * 2 * np.pi * f
    E0 = om_max / s.pair_rabi("z", "3_13", "3_12", 1.0).max()
    t = 2 * np.pi / s.pair_rabi("z", "3_13", "3_12", E0).min()
    seq = PulseSequence([Pulse("z", f, E0, 0.0, t, envelope=Envelope("sin2", 0.1))])
    sl = s.level_slice("3_13")
    psi0 = np.zeros((s.dim, 7), complex)
    psi0[np.arange(sl.start, sl.stop), np.arange(7)] = 1.0
    grid = np.linspace(0, t, 9)
    lvl = s.level_index()
    pops = []
    for method in ("rwa", "full"):
        p = (np.abs(propagate(psi0, seq, s, grid, method=method)) ** 2).sum(axis=2) / 7
        pops.append(np.array([p[:, lvl == k].sum(axis=1) for k in range(2)]))
    assert np.allclose(pops[0], pops[1], atol=1e-3)


# ------------------------------------------------------------ invariants


def test_phase_irrelevant_for_single_pulse_on_incoherent_level(carvone_system):
    s = carvone_system
    _, _, f = s.pair("2_02", "3_13")
    sl = s.level_slice("2_02")
    psi0 = np.zeros((s.dim, 5), complex)
    psi0[np.arange(sl.start, sl.stop), np.arange(5)] = 1.0
    lvl = s.level_index()
    res = []
    for phase in (0.0, 1.1, np.pi):
        seq = PulseSequence([Pulse("x", f, 5000.0, 0.0, 0.3, phase)])
        p = (np.abs(propagate_rwa(psi0, seq, s, [0, 0.3])[-1]) ** 2).sum(axis=1)
        res.append([p[lvl == k].sum() for k in range(3)])
    assert np.allclose(res, res[0], atol=1e-12)


pulse_strategy = st.builds(
    lambda pair, pol, E0, t0, d, ph, shape: (pair, pol, E0, t0, d, ph, shape),
    st.sampled_from([("2_02", "3_13"), ("3_13", "3_12"), ("2_02", "3_12")]),
    st.sampled_from(["x", "y", "z", "sigma_plus", "sigma_minus"]),
    st.floats(0.0, 2e4),
    st.floats(0.0, 0.2),
    st.floats(0.01, 0.3),
    st.floats(0.0, 2 * np.pi),
    st.sampled_from(["rect", "sin2", "gauss"]),
)


@settings(max_examples=20)
@given(st.lists(pulse_strategy, min_size=1, max_size=3), st.integers(0, 18))
def test_rwa_norm_conserved(carvone_system, specs, k0):
    s = carvone_system
    pulses = []
    for pair, pol, E0, t0, d, ph, shape in specs:
        _, _, f = s.pair(*pair)
        pulses.append(Pulse(pol, f, E0, t0, d, ph, Envelope(shape)))
    seq = PulseSequence(pulses)
    psi0 = np.zeros(s.dim, complex)
    psi0[k0] = 1.0
    out = propagate_rwa(psi0, seq, s, np.linspace(0, seq.t_end, 4))
    assert np.all(np.abs(np.linalg.norm(out, axis=1) - 1) <= 1e-10)


def test_threads_give_identical_results(carvone_system):
    s = carvone_system
    _, _, f = s.pair("2_02", "3_13")
    seq = PulseSequence([Pulse("x", f, 5000.0, 0.0, 0.3), Pulse("y", f, 3000.0, 0.1, 0.3)])
    psis = [unit(s, "2_02", M) for M in range(-2, 3)]
    serial = [propagate_rwa(p, seq, s, [0, 0.4]) for p in psis]
    with ThreadPoolExecutor(4) as ex:
        par = list(ex.map(lambda p: propagate_rwa(p, seq, s, [0, 0.4]), psis))
    for a, b in zip(serial, par):
        assert np.array_equal(a, b)


def test_grid_validation(two_level):
    seq = PulseSequence([Pulse("z", 1300.0, 0.0, 0.0, 1.0)])
    with pytest.raises(ValueError):
        propagate_full(unit(two_level, "0_00", 0), seq, two_level, [1.0, 0.5])
    with pytest.raises(ValueError):
        propagate(unit(two_level, "0_00", 0), seq, two_level, [0, 1], method="euler")
