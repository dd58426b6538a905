import csv
import json
from math import pi
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from threewave import cli
from threewave.coupling import Subsystem, field_amplitude_from_intensity
from threewave.rotor import MoleculeSpec, solve_levels
from threewave.units import format_quantity

ROOT = Path(__file__).resolve().parents[1]
CARVONE_CFG = ROOT / "configs" / "carvone.json"
J01_CFG = ROOT / "configs" / "j01.json"

MOLECULE = {"A": "2237.2 MHz", "B": "656.3 MHz", "C": "579.6 MHz", "mu_a": "2 D", "mu_b": "3 D", "mu_c": "0.5 D"}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_configs_validate():
    for p in (CARVONE_CFG, J01_CFG):
        cli.load_config(p)


# ------------------------------------------------------------ spectrum


def test_spectrum_spherical_top(tmp_path):
    cfg = {"schema": cli.CONFIG_VERSION, "molecule": {"A": "1000 MHz", "B": "1000 MHz", "C": "1000 MHz", "J_max": 1}}
    assert run("spectrum", "--config", write(tmp_path, cfg), "--out", tmp_path / "o") == 0
    head, rows = read_csv(tmp_path / "o" / "levels.csv")
    assert head == ["J", "tau", "Ka", "Kc", "label", "energy_MHz"]
    assert [float(r[5]) for r in rows if r[0] == "1"] == pytest.approx([2000.0] * 3, abs=1e-9)


def test_spectrum_prolate_closed_form(tmp_path):
    cfg = {"schema": cli.CONFIG_VERSION, "molecule": {"A": "3000 MHz", "B": "1000 MHz", "C": "1000 MHz", "mu_a": "1 D", "J_max": 3}}
    run("spectrum", "--config", write(tmp_path, cfg), "--out", tmp_path)
    _, rows = read_csv(tmp_path / "levels.csv")
    for J, tau, Ka, Kc, label, E in rows:
        assert float(E) == pytest.approx(1000 * int(J) * (int(J) + 1) + 2000 * int(Ka) ** 2, abs=1e-8)


def test_spectrum_carvone_matches_solver(tmp_path):
    assert run("spectrum", "--config", CARVONE_CFG, "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "levels.csv")
    ref = solve_levels(MoleculeSpec(2237.2, 656.3, 579.6, 2.0, 3.0, 0.5), 4)
    assert [r[4] for r in rows] == [l.label for l in ref]
    assert [float(r[5]) for r in rows] == [l.energy for l in ref]
    head, trans = read_csv(tmp_path / "transitions.csv")
    assert head == ["lower", "upper", "frequency_MHz", "type"]
    t = {(r[0], r[1]): (float(r[2]), r[3]) for r in trans}
    assert t[("2_02", "3_12")][1] == "c" and t[("2_02", "3_13")][1] == "b" and t[("3_13", "3_12")][1] == "a"
    assert ("0_00", "2_02") not in t


# ------------------------------------------------------------ simulate


def test_simulate_zero_field(tmp_path):
    cfg = {
        "schema": cli.CONFIG_VERSION,
        "molecule": MOLECULE,
        "subsystem": ["2_02", "3_13", "3_12"],
        "pulses": [{"pol": "z", "freq": "5558.040101543757 MHz", "E0": "0 V/m", "t_start": "0 us", "duration": "1 us"}],
        "propagation": {"samples": 5},
    }
    assert run("simulate", "--config", write(tmp_path, cfg), "--out", tmp_path) == 0
    head, rows = read_csv(tmp_path / "populations.csv")
    data = np.array(rows, dtype=float)
    assert np.allclose(data[:, 1:], data[0, 1:], rtol=0, atol=1e-14)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["results"]["selectivity"]["half-absolute"]["S"] == 0.0


def test_simulate_x_pulse_revival(tmp_path):
    spec = MoleculeSpec(2237.2, 656.3, 579.6, 2.0, 3.0, 0.5)
    s = Subsystem.from_labels(spec, ["3_13", "3_12"])
    _, _, f = s.pair("3_13", "3_12")
    E0 = field_amplitude_from_intensity(10.0)
    t = 2 * pi / s.pair_rabi("x", "3_13", "3_12", E0).min()
    cfg = {
        "schema": cli.CONFIG_VERSION,
        "molecule": MOLECULE,
        "subsystem": ["3_13", "3_12"],
        "initial": "3_13,M=-3",
        "pulses": [{
            "pol": "x", "freq": format_quantity(f, "MHz"), "intensity": "10 W/cm^2",
            "t_start": "0 us", "duration": format_quantity(t, "us"), "envelope": {"shape": "rect"},
        }],
        "propagation": {"samples": 3},
    }
    assert run("simulate", "--config", write(tmp_path, cfg), "--out", tmp_path) == 0
    head, rows = read_csv(tmp_path / "populations.csv")
    assert float(rows[-1][head.index("pop[3_13;M=3;plus]")]) >= 0.99


def test_simulate_carvone_and_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("simulate", "--config", CARVONE_CFG, "--out", a) == 0
    man = json.loads((a / "manifest.json").read_text())
    jsonschema.validate(man, cli.MANIFEST_SCHEMA)
    assert man["results"]["selectivity"]["half-absolute"]["S"] >= 0.95
    assert {"half-absolute", "per-level-normalized"} <= set(man["results"]["selectivity"])
    assert man["files"]["populations.csv"] == cli.sha256(a / "populations.csv")
    assert len(man["config"]["pulses"]) == 3
    assert run("simulate", "--config", a / "manifest.json", "--out", b) == 0
    for name in ("populations.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    head, _ = read_csv(a / "populations.csv")
    assert head[0] == "time_us" and all(h.startswith("pop[") for h in head[1:])


# ------------------------------------------------------------ sync


def test_sync_table(tmp_path):
    cfg = json.loads(CARVONE_CFG.read_text())
    cfg["sync"]["epsilon"] = [0.005, 0.01, 0.05, 0.1]
    assert run("sync", "--config", write(tmp_path, cfg), "--out", tmp_path) == 0
    head, rows = read_csv(tmp_path / "sync.csv")
    assert head[:4] == ["epsilon", "duration_us", "deviation", "status"]
    assert head[4:] == [f"fraction[M={m}]" for m in range(-2, 3)]
    d = [float(r[1]) for r in rows]
    assert d == sorted(d, reverse=True)
    for r in rows:
        eps = float(r[0])
        assert all(abs(float(x) - 0.5) <= eps for x in r[4:])


def test_sync_horizon_reported_per_epsilon(tmp_path):
    cfg = json.loads(CARVONE_CFG.read_text())
    cfg["sync"].update(epsilon=[1e-4, 0.1], horizon_periods=5)
    assert run("sync", "--config", write(tmp_path, cfg), "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "sync.csv")
    assert [r[3] for r in rows] == ["horizon", "ok"]


# ------------------------------------------------------------ optimize


def test_optimize_nothing_to_optimize(tmp_path, capsys):
    cfg = json.loads(J01_CFG.read_text())
    cfg["optimizer"]["parameters"] = []
    assert run("optimize", "--config", write(tmp_path, cfg), "--out", tmp_path) == cli.EXIT_CONFIG
    assert "nothing to optimize" in capsys.readouterr().err


def test_optimize_budget_one(tmp_path):
    cfg = json.loads(J01_CFG.read_text())
    cfg["optimizer"] = {"budget": 1}
    assert run("optimize", "--config", write(tmp_path, cfg), "--out", tmp_path) == cli.EXIT_NOT_CONVERGED
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["results"]["evaluations"] == 1 and man["results"]["converged"] is False
    assert man["results"]["S"] == man["results"]["S_start"] >= 0.95
    opt = json.loads((tmp_path / "optimized.json").read_text())
    jsonschema.validate(opt, cli.PULSES_SCHEMA)
    head, rows = read_csv(tmp_path / "trace.csv")
    assert head == ["restart", "evaluation", "S", "best_S"] and len(rows) == 1


# ------------------------------------------------------------ sweep


def test_sweep_records_failures(tmp_path):
    cfg = json.loads(CARVONE_CFG.read_text())
    cfg["sweep"] = {"T_min": "10 mK", "T_max": "1 K", "points": 3, "schemes": ["linear-xyz", "circular-synchronized"]}
    cfg["scheme"]["horizon_periods"] = 1e-3
    assert run("sweep-temperature", "--config", write(tmp_path, cfg), "--out", tmp_path, "--threads", 2) == 0
    head, rows = read_csv(tmp_path / "sweep.csv")
    assert head == ["temperature_K", "scheme", "S", "S_literal", "status"]
    status = {(r[1], r[0]): r[4] for r in rows}
    assert len(rows) == 6
    assert all(v == "ok" for (name, _), v in status.items() if name == "linear-xyz")
    assert all(v.startswith("design failed") for (name, _), v in status.items() if name == "circular-synchronized")


def test_temperature_grid_default():
    T = cli.temperature_grid({})
    assert len(T) == 13 and T[0] == pytest.approx(0.01) and T[-1] == pytest.approx(10.0)


# ------------------------------------------------------------ errors and flags


@pytest.mark.parametrize(
    "mutate,needle",
    [
        (lambda c: c.update(bogus=1), "bogus"),
        (lambda c: c["molecule"].update(A="2237.2"), "/molecule/A"),
        (lambda c: c["molecule"].update(A="2237.2 K"), "/molecule/A"),
        (lambda c: c.update(schema="threewave-config/0"), "/schema"),
        (lambda c: c["scheme"].update(name="helical"), "/scheme/name"),
    ],
)
def test_config_errors(tmp_path, capsys, mutate, needle):
    cfg = json.loads(CARVONE_CFG.read_text())
    mutate(cfg)
    assert run("spectrum", "--config", write(tmp_path, cfg), "--out", tmp_path) == cli.EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_json_syntax_error_has_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema": "threewave-config/1",\n  "molecule": {,}\n}')
    assert run("spectrum", "--config", p, "--out", tmp_path) == cli.EXIT_CONFIG
    assert "bad.json:3:" in capsys.readouterr().err


def test_off_resonant_pulse_is_numerical_error(tmp_path, capsys):
    cfg = {
        "schema": cli.CONFIG_VERSION,
        "molecule": MOLECULE,
        "subsystem": ["2_02", "3_12"],
        "pulses": [{"pol": "z", "freq": "5000 MHz", "E0": "100 V/m", "t_start": "0 us", "duration": "1 us"}],
    }
    assert run("simulate", "--config", write(tmp_path, cfg), "--out", tmp_path) == cli.EXIT_NUMERICAL
    assert "pulse 0" in capsys.readouterr().err


def test_threads_env(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli._threads(None) == 3
    assert cli._threads(2) == 2
    monkeypatch.delenv(cli.THREADS_ENV)
    assert cli._threads(None) == 1


def test_propagator_flag_overrides(tmp_path):
    cfg = {
        "schema": cli.CONFIG_VERSION,
        "molecule": MOLECULE,
        "subsystem": ["3_13", "3_12"],
        "pulses": [{"pol": "z", "freq": "460.1395040 MHz", "E0": "0 V/m", "t_start": "0 us", "duration": "0.01 us"}],
        "propagation": {"method": "rwa", "samples": 2},
    }
    assert run("simulate", "--config", write(tmp_path, cfg), "--out", tmp_path, "--propagator", "full") == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["propagation"]["method"] == "full"
