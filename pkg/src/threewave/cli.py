"""Command-line front end.

Verbs: ``spectrum``, ``simulate``, ``sync``, ``optimize`` and
``sweep-temperature``. Every verb reads one JSON config (see
:data:`CONFIG_SCHEMA`), writes CSV tables with unit-suffixed column names
plus a JSON manifest, and exits with 0 (success), 2 (bad config),
3 (numerical failure) or 4 (optimizer did not converge; outputs written).

A manifest is itself a valid ``--config``: it carries the resolved config
with the pulse sequence spelled out, so re-running it reproduces the same
files byte for byte.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .coupling import Polarization, Subsystem, field_amplitude_from_intensity, transition_type
from .designer import (
    SCHEMES,
    CycleSlot,
    FreeParameter,
    SchemeSpec,
    SearchHorizonError,
    SequenceTemplate,
    build_scheme,
    optimize_sequence,
    selectivity_objective,
    sync_search,
)
from .dynamics import Envelope, PropagationError, Pulse, PulseSequence, ResonanceError
from .ensemble import EnsembleState, final_selectivity, simulate_enantiomers, thermal_ensemble, uniform_level_ensemble
from .rotor import MoleculeSpec, solve_levels, transition_frequency
from .units import UnitError, format_quantity, parse_quantity

CONFIG_VERSION = "threewave-config/1"
MANIFEST_VERSION = "threewave-manifest/1"
PULSES_VERSION = "threewave-pulses/1"
THREADS_ENV = "THREEWAVE_THREADS"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NOT_CONVERGED = 0, 2, 3, 4

_Q = {"type": "string"}
_POL = {"enum": [p.value for p in Polarization]}
_ENVELOPE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "shape": {"enum": ["rect", "sin2", "gauss"]},
        "ramp": {"type": "number"},
        "sigma": {"type": "number"},
    },
}
_LABELS = {"type": "array", "items": {"type": "string"}}
_PULSE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["pol", "freq", "t_start", "duration"],
    "properties": {
        "pol": _POL,
        "freq": _Q,
        "E0": _Q,
        "intensity": _Q,
        "t_start": _Q,
        "duration": _Q,
        "phase": _Q,
        "envelope": _ENVELOPE,
        "label": {"type": "string"},
    },
}
_SLOT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["pair", "pol"],
    "properties": {
        "pair": {**_LABELS, "minItems": 2, "maxItems": 2},
        "pol": _POL,
        "role": {"enum": ["half", "twist", "probe"]},
        "intensity": _Q,
        "E0": _Q,
        "phase": _Q,
        "area": _Q,
    },
}
_SCHEME = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"enum": list(SCHEMES)},
        "levels": {**_LABELS, "minItems": 3, "maxItems": 3},
        "intensity": _Q,
        "half_intensity": _Q,
        "epsilon": {"type": "number"},
        "gap": _Q,
        "envelope": _ENVELOPE,
        "initial": {"type": "string"},
        "resolve_phase": {"type": "boolean"},
        "horizon_periods": {"type": "number"},
        "slots": {"type": "array", "items": _SLOT},
        "timing": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": CONFIG_VERSION,
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "molecule"],
    "properties": {
        "schema": {"const": CONFIG_VERSION},
        "molecule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["A", "B", "C"],
            "properties": {
                "name": {"type": "string"},
                "A": _Q, "B": _Q, "C": _Q,
                "mu_a": _Q, "mu_b": _Q, "mu_c": _Q,
                "chirality": {"enum": [1, -1]},
                "J_max": {"type": "integer", "minimum": 0},
                "note": {"type": "string"},
            },
        },
        "subsystem": {**_LABELS, "minItems": 1},
        "initial": {"type": "string"},
        "temperature": _Q,
        "scheme": _SCHEME,
        "pulses": {"type": "array", "items": _PULSE},
        "propagation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["rwa", "full"]},
                "dt": _Q,
                "samples": {"type": "integer", "minimum": 2},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resonance": _Q,
                "chebyshev": {"type": "number", "exclusiveMinimum": 0},
                "xatol": {"type": "number", "exclusiveMinimum": 0},
                "fatol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sync": {
            "type": "object",
            "additionalProperties": False,
            "required": ["transition"],
            "properties": {
                "transition": {**_LABELS, "minItems": 2, "maxItems": 2},
                "pol": _POL,
                "intensity": _Q,
                "target": {"enum": ["half", "full"]},
                "epsilon": {
                    "oneOf": [
                        {"type": "array", "items": {"type": "number"}, "minItems": 1},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["min", "max", "points"],
                            "properties": {
                                "min": {"type": "number"},
                                "max": {"type": "number"},
                                "points": {"type": "integer", "minimum": 1},
                            },
                        },
                    ]
                },
                "horizon_periods": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "budget": {"type": "integer", "minimum": 1},
                "restarts": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "spread": {"type": "number", "minimum": 0},
                "parameters": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["pulse", "kind", "lower", "upper"],
                        "properties": {
                            "pulse": {"type": "integer", "minimum": 0},
                            "kind": {"enum": ["duration", "amplitude", "phase", "start"]},
                            "lower": {"type": "number"},
                            "upper": {"type": "number"},
                        },
                    },
                },
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T_min": _Q,
                "T_max": _Q,
                "points": {"type": "integer", "minimum": 1},
                "schemes": {"type": "array", "items": {"enum": list(SCHEMES)}, "minItems": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": MANIFEST_VERSION,
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "command", "version", "config", "results", "files"],
    "properties": {
        "schema": {"const": MANIFEST_VERSION},
        "command": {"enum": ["spectrum", "simulate", "sync", "optimize", "sweep-temperature"]},
        "version": {"type": "string"},
        "config": {"type": "object"},
        "results": {"type": "object"},
        "files": {"type": "object", "additionalProperties": {"type": "string", "pattern": "^sha256:[0-9a-f]{64}$"}},
    },
}

PULSES_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": PULSES_VERSION,
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "pulses"],
    "properties": {"schema": {"const": PULSES_VERSION}, "pulses": {"type": "array", "items": _PULSE}},
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


def _field_path(err) -> str:
    return "/" + "/".join(str(p) for p in err.absolute_path)


def load_config(path) -> dict:
    """Read and validate a config (or a manifest, whose ``config`` is used)."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(data, dict) and data.get("schema") == MANIFEST_VERSION:
        _validate(data, MANIFEST_SCHEMA, path)
        data = data["config"]
    _validate(data, CONFIG_SCHEMA, path)
    return data


def _validate(data, schema, path):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{path}: field {_field_path(e)}: {e.message}" for e in errors]
        raise ConfigError("\n".join(lines))


def _q(value, dimension, where):
    try:
        return parse_quantity(value, dimension)
    except UnitError as exc:
        raise ConfigError(f"field {where}: {exc}") from None


def _opt_q(block, key, dimension, where, default=None):
    return _q(block[key], dimension, f"{where}/{key}") if key in block else default


def molecule_from(cfg) -> MoleculeSpec:
    m = cfg["molecule"]
    w = "/molecule"
    return MoleculeSpec(
        A=_q(m["A"], "frequency", f"{w}/A"),
        B=_q(m["B"], "frequency", f"{w}/B"),
        C=_q(m["C"], "frequency", f"{w}/C"),
        mu_a=_opt_q(m, "mu_a", "dipole", w, 0.0),
        mu_b=_opt_q(m, "mu_b", "dipole", w, 0.0),
        mu_c=_opt_q(m, "mu_c", "dipole", w, 0.0),
        chirality=m.get("chirality", 1),
        name=m.get("name", ""),
    )


def subsystem_from(cfg, spec=None, labels=None) -> Subsystem:
    spec = spec or molecule_from(cfg)
    labels = labels or cfg.get("subsystem")
    if not labels:
        raise ConfigError("field /subsystem: a list of level labels is required for this command")
    return Subsystem.from_labels(spec, labels)


def _envelope(d) -> Envelope:
    return Envelope(**d) if d else Envelope()


def _slot_from(d, where) -> CycleSlot:
    return CycleSlot(
        pair=tuple(d["pair"]),
        pol=d["pol"],
        role=d.get("role", "half"),
        intensity=_opt_q(d, "intensity", "intensity", where, 10.0),
        E0=_opt_q(d, "E0", "field", where),
        phase=_opt_q(d, "phase", "angle", where, 0.0),
        area=_opt_q(d, "area", "angle", where),
    )


def scheme_from(cfg, name=None) -> SchemeSpec:
    s = cfg.get("scheme", {})
    w = "/scheme"
    name = name or s.get("name")
    if name is None:
        raise ConfigError("field /scheme/name: a scheme (or explicit pulses) is required")
    levels = s.get("levels") or cfg.get("subsystem")
    if not levels or len(levels) != 3:
        raise ConfigError("field /scheme/levels: three level labels are required")
    kw = dict(
        epsilon=s.get("epsilon", 0.05),
        gap=_opt_q(s, "gap", "time", w, 0.0),
        envelope=_envelope(s.get("envelope")),
        initial=s.get("initial", cfg.get("initial")),
        resolve_phase=s.get("resolve_phase", True),
        horizon_periods=s.get("horizon_periods", 1e4),
    )
    if "timing" in s:
        kw["timing"] = tuple(tuple(t) for t in s["timing"])
    if s.get("slots"):
        slots = tuple(_slot_from(d, f"{w}/slots/{i}") for i, d in enumerate(s["slots"]))
        return SchemeSpec(name, tuple(levels), slots, **kw)
    return SchemeSpec.default(
        name,
        tuple(levels),
        intensity=_opt_q(s, "intensity", "intensity", w, 10.0),
        half_intensity=_opt_q(s, "half_intensity", "intensity", w),
        **kw,
    )


def pulses_from(items, where="/pulses") -> PulseSequence:
    pulses = []
    for i, d in enumerate(items):
        w = f"{where}/{i}"
        if "E0" in d and "intensity" in d:
            raise ConfigError(f"field {w}: give either E0 or intensity, not both")
        if "E0" in d:
            E0 = _q(d["E0"], "field", f"{w}/E0")
        elif "intensity" in d:
            E0 = field_amplitude_from_intensity(_q(d["intensity"], "intensity", f"{w}/intensity"))
        else:
            raise ConfigError(f"field {w}: a field amplitude E0 or an intensity is required")
        pulses.append(
            Pulse(
                pol=d["pol"],
                freq=_q(d["freq"], "frequency", f"{w}/freq"),
                E0=E0,
                t_start=_q(d["t_start"], "time", f"{w}/t_start"),
                duration=_q(d["duration"], "time", f"{w}/duration"),
                phase=_opt_q(d, "phase", "angle", w, 0.0),
                envelope=_envelope(d.get("envelope")),
                label=d.get("label", ""),
            )
        )
    return PulseSequence(pulses)


def pulses_to_json(seq: PulseSequence) -> list:
    """Explicit pulses with exactly round-tripping floats."""
    out = []
    for p in seq:
        env = p.envelope
        out.append({
            "pol": p.pol.value,
            "freq": format_quantity(p.freq, "MHz"),
            "E0": format_quantity(p.E0, "V/m"),
            "t_start": format_quantity(p.t_start, "us"),
            "duration": format_quantity(p.duration, "us"),
            "phase": format_quantity(p.phase, "rad"),
            "envelope": {"shape": env.shape, "ramp": env.ramp, "sigma": env.sigma},
            "label": p.label,
        })
    return out


def _propagation_kw(cfg, method):
    prop = cfg.get("propagation", {})
    tol = cfg.get("tolerances", {})
    kw = {}
    if "dt" in prop:
        kw["dt"] = _q(prop["dt"], "time", "/propagation/dt")
    if "chebyshev" in tol:
        kw["tol"] = tol["chebyshev"]
    if "resonance" in tol and method == "rwa":
        kw["resonance_tol"] = _q(tol["resonance"], "frequency", "/tolerances/resonance")
    return kw


def ensemble_from(cfg, system):
    if "temperature" in cfg:
        return thermal_ensemble(system, _q(cfg["temperature"], "temperature", "/temperature"))
    initial = cfg.get("initial") or cfg.get("scheme", {}).get("initial")
    if initial is None:
        s = cfg.get("scheme", {})
        initial = (s.get("levels") or cfg["subsystem"])[0]
    if ",M=" in initial:
        # a single basis state, e.g. "3_13,M=-3"
        label, M = initial.split(",M=")
        try:
            k = next(i for i, b in enumerate(system.basis) if b.level == system.level(label) and b.M == int(M))
        except (StopIteration, ValueError):
            raise ConfigError(f"field /initial: no state {initial!r} in the subsystem") from None
        psi = np.zeros((system.dim, 1), dtype=complex)
        psi[k, 0] = 1.0
        return EnsembleState(np.ones(1), psi)
    return uniform_level_ensemble(system.level(initial), system)


def sequence_from(cfg, system, method) -> PulseSequence:
    if "pulses" in cfg:
        return pulses_from(cfg["pulses"])
    return build_scheme(scheme_from(cfg), system, method=method)


# ---------------------------------------------------------------- output


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, command, cfg, results, files):
    manifest = {
        "schema": MANIFEST_VERSION,
        "command": command,
        "version": __version__,
        "config": cfg,
        "results": results,
        "files": {f.name: sha256(f) for f in files},
    }
    jsonschema.validate(manifest, MANIFEST_SCHEMA)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _resolved(cfg, method, seed=None, **extra):
    out = json.loads(json.dumps(cfg))
    out.setdefault("propagation", {})["method"] = method
    if seed is not None:
        out.setdefault("optimizer", {})["seed"] = seed
    out.update(extra)
    return out


# ---------------------------------------------------------------- commands


def cmd_spectrum(cfg, args, out: Path) -> int:
    spec = molecule_from(cfg)
    J_max = cfg["molecule"].get("J_max")
    if J_max is None:
        J_max = max((int(lab.split("_")[0]) for lab in cfg.get("subsystem", [])), default=3)
    levels = solve_levels(spec, J_max)
    level_rows = [(l.J, l.tau, l.Ka, l.Kc, l.label, l.energy) for l in levels]
    write_csv(out / "levels.csv", ["J", "tau", "Ka", "Kc", "label", "energy_MHz"], level_rows)
    dipoles = {"a": spec.mu_a, "b": spec.mu_b, "c": spec.mu_c}
    trans = []
    for i, a in enumerate(levels):
        for b in levels[i + 1:]:
            if abs(a.J - b.J) > 1 or a.energy == b.energy:
                continue
            kind = "".join(d for d in (transition_type(a, b) or "") if dipoles[d] != 0.0)
            if not kind:
                continue
            freq, b_upper = transition_frequency(a, b)
            lo, hi = (a, b) if b_upper else (b, a)
            trans.append((lo.label, hi.label, freq, kind))
    trans.sort(key=lambda r: (r[2], r[0], r[1]))
    write_csv(out / "transitions.csv", ["lower", "upper", "frequency_MHz", "type"], trans)
    print(f"{'level':>6} {'tau':>4} {'E / MHz':>16}")
    for J, tau, Ka, Kc, label, E in level_rows:
        print(f"{label:>6} {tau:>4d} {E:16.6f}")
    print(f"{len(trans)} dipole-allowed transitions -> {out / 'transitions.csv'}")
    write_manifest(out, "spectrum", _resolved(cfg, args.propagator or "rwa"), {"levels": len(levels), "transitions": len(trans)},
                   [out / "levels.csv", out / "transitions.csv"])
    return EXIT_OK


def cmd_simulate(cfg, args, out: Path) -> int:
    method = _method(cfg, args)
    system = subsystem_from(cfg)
    seq = sequence_from(cfg, system, method)
    ens = ensemble_from(cfg, system)
    samples = cfg.get("propagation", {}).get("samples", 201)
    t0, t1 = seq.t_start, seq.t_end
    grid = np.linspace(t0, t1, samples) if t1 > t0 else np.array([t0, t0 + 1.0])
    rec = simulate_enantiomers(system, ens, seq, grid, method=method, threads=args.threads,
                               t0=grid[0], **_propagation_kw(cfg, method))
    names, data = rec.columns()
    write_csv(out / "populations.csv", names, data)
    report = rec.selectivity()
    half = report.to_dict()
    literal = dict(half, variant="per-level-normalized", S=half["S_literal"])
    results = {
        "selectivity": {"half-absolute": half, "per-level-normalized": literal},
        "final_levels": {
            "labels": system.labels,
            "plus": [float(x) for x in rec.final_levels(1)],
            "minus": [float(x) for x in rec.final_levels(-1)],
        },
    }
    resolved = _resolved(cfg, method, pulses=pulses_to_json(seq))
    write_manifest(out, "simulate", resolved, results, [out / "populations.csv"])
    print(f"S = {report.S:.6f} (per-level normalized: {report.S_literal:.6f})")
    return EXIT_OK


def _epsilon_grid(s):
    eps = s.get("epsilon", {"min": 1e-3, "max": 0.1, "points": 11})
    if isinstance(eps, list):
        return [float(e) for e in eps]
    if not 0 < eps["min"] <= eps["max"]:
        raise ConfigError("field /sync/epsilon: need 0 < min <= max")
    return [float(e) for e in np.geomspace(eps["min"], eps["max"], eps["points"])]


def cmd_sync(cfg, args, out: Path) -> int:
    s = cfg.get("sync")
    if s is None:
        raise ConfigError("field /sync: a sync block with a transition is required")
    pair = tuple(s["transition"])
    spec = molecule_from(cfg)
    labels = cfg.get("subsystem") or list(pair)
    system = subsystem_from(cfg, spec, labels)
    pol = s.get("pol", "z")
    intensity = _opt_q(s, "intensity", "intensity", "/sync", 10.0)
    target = s.get("target", "half")
    horizon = s.get("horizon_periods", 1e4)
    rows, results, mcols = [], [], None
    for eps in _epsilon_grid(s):
        try:
            r = sync_search(system, pair, pol, intensity, eps, target, horizon_periods=horizon)
        except SearchHorizonError as exc:
            rows.append(("horizon", eps, float("nan"), float("nan")))
            results.append({"epsilon": eps, "status": "horizon", "message": str(exc)})
            continue
        mcols = mcols or [f"fraction[M={m}]" for m in r.lower_M]
        rows.append(("ok", eps, r.duration, r.deviation, *r.fractions))
        results.append({"status": "ok", **r.to_dict()})
    if mcols is None:
        mcols = []
    width = 4 + len(mcols)
    rows = [(r[1], r[2], r[3], r[0], *r[4:], *([float("nan")] * (width - len(r)))) for r in rows]
    write_csv(out / "sync.csv", ["epsilon", "duration_us", "deviation", "status", *mcols], rows)
    for r in rows:
        print(f"epsilon={r[0]:.4g}  duration={r[1]:.6g} us  [{r[3]}]")
    write_manifest(out, "sync", _resolved(cfg, _method(cfg, args)), {"points": results}, [out / "sync.csv"])
    ok = [r for r in results if r["status"] == "ok"]
    return EXIT_OK if ok else EXIT_NUMERICAL


def _auto_parameters(cfg, seq):
    combined = "pulses" not in cfg and cfg.get("scheme", {}).get("name") == "combined-3cycles"
    kind, lo, hi = ("amplitude", 0.7, 1.3) if combined else ("duration", 0.8, 1.2)
    return [FreeParameter(i, kind, lo, hi) for i in range(len(seq))]


def cmd_optimize(cfg, args, out: Path) -> int:
    method = _method(cfg, args)
    system = subsystem_from(cfg)
    seq = sequence_from(cfg, system, method)
    ens = ensemble_from(cfg, system)
    o = cfg.get("optimizer", {})
    if "parameters" in o:
        params = [FreeParameter(**p) for p in o["parameters"]]
    else:
        params = _auto_parameters(cfg, seq)
    tol = cfg.get("tolerances", {})
    template = SequenceTemplate(seq, params)
    seed = args.seed if args.seed is not None else o.get("seed", 0)
    res = optimize_sequence(
        template,
        selectivity_objective(system, ens, method, **_propagation_kw(cfg, method)),
        budget=o.get("budget", 400),
        restarts=o.get("restarts", 4),
        seed=seed,
        threads=args.threads,
        spread=o.get("spread", 0.15),
        xatol=tol.get("xatol", 1e-4),
        fatol=tol.get("fatol", 1e-6),
    )
    write_csv(out / "trace.csv", ["restart", "evaluation", "S", "best_S"], res.trace)
    optimized = {"schema": PULSES_VERSION, "pulses": pulses_to_json(res.sequence)}
    jsonschema.validate(optimized, PULSES_SCHEMA)
    (out / "optimized.json").write_text(json.dumps(optimized, indent=2) + "\n")
    results = {
        "S": res.S,
        "S_start": res.S_start,
        "evaluations": res.evaluations,
        "converged": res.converged,
        "message": res.message,
        "params": [float(x) for x in res.params],
        "parameters": [{"pulse": p.pulse, "kind": p.kind, "lower": p.lower, "upper": p.upper} for p in params],
    }
    resolved = _resolved(cfg, method, seed=seed, pulses=pulses_to_json(seq))
    resolved["optimizer"]["parameters"] = results["parameters"]
    write_manifest(out, "optimize", resolved, results, [out / "trace.csv", out / "optimized.json"])
    print(f"S: {res.S_start:.6f} -> {res.S:.6f} after {res.evaluations} evaluations"
          f" ({'converged' if res.converged else 'not converged'})")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


DEFAULT_SWEEP_SCHEMES = ("linear-xyz", "circular", "circular-synchronized")


def temperature_grid(cfg):
    sw = cfg.get("sweep", {})
    lo = _opt_q(sw, "T_min", "temperature", "/sweep", 0.01)
    hi = _opt_q(sw, "T_max", "temperature", "/sweep", 10.0)
    if not 0 < lo <= hi:
        raise ConfigError("field /sweep: need 0 < T_min <= T_max")
    return np.geomspace(lo, hi, sw.get("points", 13))


def sweep_temperature(cfg, method="rwa", threads=1):
    """Rows ``(T, scheme, S, S_literal, status)``; failures become rows too."""
    system = subsystem_from(cfg)
    schemes = cfg.get("sweep", {}).get("schemes", list(DEFAULT_SWEEP_SCHEMES))
    temps = temperature_grid(cfg)
    kw = _propagation_kw(cfg, method)
    designed = {}
    for name in schemes:
        try:
            designed[name] = build_scheme(scheme_from(cfg, name), system, method=method)
        except (SearchHorizonError, PropagationError, ValueError) as exc:
            designed[name] = exc

    def point(job):
        name, T = job
        seq = designed[name]
        if isinstance(seq, Exception):
            return (T, name, float("nan"), float("nan"), f"design failed: {seq}")
        try:
            rep = final_selectivity(system, thermal_ensemble(system, T), seq, method=method, **kw)
        except (PropagationError, ValueError) as exc:
            return (T, name, float("nan"), float("nan"), f"failed: {exc}")
        return (T, name, rep.S, rep.S_literal, "ok")

    jobs = [(name, float(T)) for name in schemes for T in temps]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(point, jobs))
    else:
        rows = [point(j) for j in jobs]
    return rows, {n: s for n, s in designed.items() if not isinstance(s, Exception)}


def cmd_sweep_temperature(cfg, args, out: Path) -> int:
    method = _method(cfg, args)
    rows, designed = sweep_temperature(cfg, method, args.threads)
    write_csv(out / "sweep.csv", ["temperature_K", "scheme", "S", "S_literal", "status"], rows)
    for T, name, S, _, status in rows:
        print(f"T={T:.4g} K  {name:<22} S={S:.4f}  {status}")
    results = {
        "points": len(rows),
        "failed": sum(r[4] != "ok" for r in rows),
        "sequences": {n: pulses_to_json(s) for n, s in designed.items()},
    }
    write_manifest(out, "sweep-temperature", _resolved(cfg, method), results, [out / "sweep.csv"])
    return EXIT_OK if results["failed"] < len(rows) else EXIT_NUMERICAL


COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "sync": cmd_sync,
    "optimize": cmd_optimize,
    "sweep-temperature": cmd_sweep_temperature,
}


def _method(cfg, args):
    return args.propagator or cfg.get("propagation", {}).get("method", "rwa")


def _threads(value):
    if value is not None:
        return value
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        return max(1, n)
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="threewave", description="Enantiomer-selective microwave three-wave mixing.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path, help="JSON config or run manifest")
    p.add_argument("--out", type=Path, help="output directory (default: config output.dir or ./out)")
    p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.add_argument("--seed", type=int, help="optimizer seed (overrides the config)")
    p.add_argument("--propagator", choices=["full", "rwa"], help="overrides propagation.method")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.threads = _threads(args.threads)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = load_config(args.config)
        out = args.out or Path(cfg.get("output", {}).get("dir", "out"))
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args, out)
    except (PropagationError, SearchHorizonError, ResonanceError) as exc:
        where = ""
        if isinstance(exc, PropagationError):
            where = f" (pulse {exc.pulse_index}, t = {exc.time} us)"
        print(f"numerical error: {exc}{where}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
