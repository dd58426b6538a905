import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threewave.coupling import Subsystem, field_amplitude_from_intensity
from threewave.dynamics import Envelope, Pulse, PulseSequence
from threewave.ensemble import (
    EnsembleState,
    selectivity,
    simulate_enantiomers,
    thermal_ensemble,
    thermal_weights,
    uniform_level_ensemble,
)
from threewave.rotor import MoleculeSpec, solve_levels

from .oracles import boltzmann


def test_uniform_ensembles(j01_system, carvone_system):
    e = uniform_level_ensemble(j01_system.level("0_00"), j01_system)
    assert len(e) == 1 and e.weights[0] == 1.0
    e = uniform_level_ensemble(carvone_system.level("2_02"), carvone_system)
    assert len(e) == 5
    assert np.allclose(e.weights, 0.2, atol=0) and e.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert e.with_enantiomer(-1).enantiomer == -1


def test_ensemble_validation():
    with pytest.raises(ValueError):
        EnsembleState(np.array([0.5, 0.6]), np.eye(2))
    with pytest.raises(ValueError):
        EnsembleState(np.array([1.5, -0.5]), np.eye(2))
    with pytest.raises(ValueError):
        EnsembleState(np.array([1.0]), np.array([[2.0], [0.0]]))


def test_thermal_equal_energies_is_uniform():
    levels = [l for l in solve_levels(MoleculeSpec(1000.0, 1000.0, 1000.0), 1) if l.J == 1]
    w = thermal_weights(levels, 0.3)
    assert np.allclose(w, 1 / 9, atol=1e-15)


def test_thermal_cold_limit(carvone_system):
    e = thermal_ensemble(carvone_system, 0.01)
    sl = carvone_system.level_slice("2_02")
    assert e.weights[sl].sum() == pytest.approx(1.0, abs=1e-6)


def test_thermal_weights_against_oracle(carvone_system):
    levels = carvone_system.levels
    w = thermal_weights(levels, 1.0)
    ref = boltzmann([l.energy for l in levels], [2 * l.J + 1 for l in levels], 1.0)
    assert np.allclose(w, ref, rtol=1e-12)
    e = thermal_ensemble(carvone_system, 1.0)
    assert e.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert len(e) == carvone_system.dim


@pytest.mark.parametrize("T", [0.0, -1.0])
def test_thermal_rejects_nonpositive_temperature(carvone_system, T):
    with pytest.raises(ValueError):
        thermal_ensemble(carvone_system, T)


@given(st.floats(1e-3, 50.0), st.floats(1.01, 10.0))
def test_thermal_weights_flatten(T, factor):
    levels = [l for l in solve_levels(MoleculeSpec(2237.2, 656.3, 579.6), 3)][:6]
    w1 = thermal_weights(levels, T)
    w2 = thermal_weights(levels, T * factor)
    r1 = w1 / w1[0]
    r2 = w2 / w2[0]
    # ratios towards 1 from below (every level lies above the ground level)
    assert np.all(r2 >= r1 - 1e-15) and np.all(r2 <= 1 + 1e-15)


def test_selectivity_examples():
    assert selectivity([0, 1, 0], [0, 0, 1]).S == 1.0
    assert selectivity([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]).S == 0.0
    r = selectivity([1 / 3, 2 / 3, 0], [0, 2 / 3, 1 / 3])
    assert r.S == pytest.approx(1 / 3, abs=1e-15)
    assert r.S_literal == pytest.approx(2.0, abs=1e-15)
    assert selectivity([0, 1, 0], [0, 0, 1]).S_literal == 2.0
    with pytest.raises(ValueError):
        selectivity([0.5, 0.5], [1, 0, 0])


probs = st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3).map(
    lambda v: np.array(v) / sum(v)
)


@given(probs, probs, st.permutations(range(3)))
def test_selectivity_properties(pp, pm, perm):
    r = selectivity(pp, pm)
    assert 0 <= r.S <= 1 + 1e-12
    assert selectivity(pp[list(perm)], pm[list(perm)]).S == pytest.approx(r.S, abs=1e-15)
    assert selectivity(pm, pp).S == pytest.approx(r.S, abs=1e-15)
    assert selectivity(pp, pp).S == 0.0


def test_population_record(carvone_system):
    s = carvone_system
    _, _, f = s.pair("2_02", "3_12")
    seq = PulseSequence([Pulse("z", f, field_amplitude_from_intensity(10.0), 0.0, 1.0)])
    ens = uniform_level_ensemble(s.level("2_02"), s)
    rec = simulate_enantiomers(s, ens, seq, np.linspace(0, 1, 11))
    for e in (1, -1):
        assert np.allclose(rec.populations[e].sum(axis=1), 1.0, atol=1e-9)
        assert np.allclose(rec.level_populations(e).sum(axis=1), 1.0, atol=1e-9)
    names, data = rec.columns()
    assert names[0] == "time_us" and data.shape == (11, 1 + 2 * s.dim)
    assert "pop[2_02;M=-2;plus]" in names and "pop[3_12;M=3;minus]" in names
    par = simulate_enantiomers(s, ens, seq, np.linspace(0, 1, 11), threads=2)
    assert all(np.array_equal(rec.populations[e], par.populations[e]) for e in (1, -1))


single_pulse = st.tuples(
    st.sampled_from([("2_02", "3_13"), ("3_13", "3_12"), ("2_02", "3_12")]),
    st.sampled_from(["x", "y", "z", "sigma_plus", "sigma_minus"]),
    st.floats(100.0, 3e4),
    st.floats(0.01, 0.5),
    st.floats(0, 2 * np.pi),
    st.sampled_from(["2_02", "3_13", "3_12"]),
)


@settings(max_examples=30)
@given(single_pulse)
def test_single_pulse_never_separates_enantiomers(carvone_system, case):
    pair, pol, E0, d, ph, initial = case
    s = carvone_system
    _, _, f = s.pair(*pair)
    seq = PulseSequence([Pulse(pol, f, E0, 0.0, d, ph, Envelope("sin2"))])
    rec = simulate_enantiomers(s, uniform_level_ensemble(s.level(initial), s), seq, [0.0, d])
    assert np.allclose(rec.final_levels(1), rec.final_levels(-1), atol=1e-9)


def test_identical_hamiltonians_give_zero(j01_system):
    spec = MoleculeSpec(2237.2, 656.3, 579.6, 2.0, 3.0, 0.0)
    s = Subsystem.from_labels(spec, ["0_00", "1_11", "1_10"])
    pulses = []
    t = 0.0
    for pair, pol in ((("0_00", "1_11"), "x"), (("1_11", "1_10"), "z"), (("0_00", "1_10"), "y")):
        _, _, f = s.pair(*pair)
        pulses.append(Pulse(pol, f, 4000.0, t, 0.2))
        t += 0.2
    rec = simulate_enantiomers(s, uniform_level_ensemble(s.level("1_11"), s), PulseSequence(pulses), [0, t])
    assert rec.selectivity().S == 0.0
