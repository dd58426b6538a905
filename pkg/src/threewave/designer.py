"""Pulse timing, M-synchronization, scheme builders and sequence tuning.

Level roles: a three-level scheme is given as ``levels = (L0, L1, L2)``
with carriers ``w1 = L0<->L1``, ``w2 = L1<->L2`` and ``w3 = L0<->L2``.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import pi

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .coupling import RABI_PER_DEBYE_VM, Polarization, Subsystem, _as_pol, field_amplitude_from_intensity
from .dynamics import Envelope, Pulse, PulseSequence
from .ensemble import final_selectivity, uniform_level_ensemble

__all__ = [
    "ForbiddenTransitionError",
    "SchemeError",
    "SearchHorizonError",
    "TwoLevel",
    "SyncResult",
    "CycleSlot",
    "SchemeSpec",
    "FreeParameter",
    "SequenceTemplate",
    "OptimizationResult",
    "SCHEMES",
    "reference_rabi",
    "two_level_decomposition",
    "pulse_area_duration",
    "sync_search",
    "build_scheme",
    "sequential_pulses",
    "resolve_phases",
    "selectivity_objective",
    "optimize_sequence",
    "j01_cycles",
]

log = logging.getLogger(__name__)

SCHEMES = ("linear-xyz", "combined-3cycles", "circular", "circular-synchronized")
ROLES = ("half", "twist", "probe")
ROLE_AREA = {"half": pi / 2, "twist": pi, "probe": pi / 2}
ROLE_TARGET = {"half": 0.5, "twist": 1.0, "probe": 0.5}


class ForbiddenTransitionError(ValueError):
    """The requested (pair, M, polarization) has zero coupling."""


class SchemeError(ValueError):
    """A scheme is inconsistent with the selection rules of its levels."""


class SearchHorizonError(RuntimeError):
    """No synchronization point below the search horizon."""


# ---------------------------------------------------------------- Rabi data


@dataclass(frozen=True)
class TwoLevel:
    """One independent two-level system of a z or circular drive."""

    lower: int
    upper: int
    lower_M: int
    upper_M: int
    element: complex  # <upper| mu . e |lower> in Debye


def two_level_decomposition(system: Subsystem, pol, l1, l2):
    """Split a resonant pair into independent two-level systems.

    Only possible when every state couples to at most one partner, which
    holds for z and circular polarization. Returns ``TwoLevel`` items
    sorted by lower-state M.
    """
    pol = _as_pol(pol)
    lower, upper, _ = system.pair(l1, l2)
    blk = system.pair_block(pol, l1, l2)
    su, sl = system.level_slice(upper), system.level_slice(lower)
    nz = np.abs(blk) > 1e-12 * max(1.0, np.abs(blk).max(initial=0.0))
    if np.any(nz.sum(axis=0) > 1) or np.any(nz.sum(axis=1) > 1):
        raise ValueError(f"{pol.value} drive on {lower.label}<->{upper.label} does not split into two-level systems")
    out = []
    for i, j in zip(*np.nonzero(nz)):
        bu, bl = system.basis[su.start + i], system.basis[sl.start + j]
        out.append(TwoLevel(sl.start + j, su.start + i, bl.M, bu.M, complex(blk[i, j])))
    return sorted(out, key=lambda t: t.lower_M)


def reference_rabi(system: Subsystem, pol, l1, l2, E0: float) -> float:
    """RMS of the nonzero singular-value Rabi frequencies (rad/us).

    For z and circular drives the singular values are the per-M two-level
    Rabi frequencies, so this is the root-mean-square over M-subsystems.
    """
    om = system.pair_rabi(pol, l1, l2, E0)
    if om.size == 0:
        lower, upper, _ = system.pair(l1, l2)
        raise ForbiddenTransitionError(f"{_as_pol(pol).value} does not couple {lower.label} and {upper.label}")
    return float(np.sqrt(np.mean(om**2)))


def pulse_area_duration(system: Subsystem, pair, M, pol, E0: float, area: float, envelope: Envelope = None) -> float:
    """Duration (us) giving Rabi area ``area`` for lower-state ``M``.

    ``M=None`` uses :func:`reference_rabi`. The coupling strength of a
    lower state is the norm of its column in the pair block, which equals
    the two-level Rabi frequency for z and circular drives.
    """
    if not area > 0:
        raise ValueError("area must be positive")
    lower, upper, _ = system.pair(*pair)
    if M is None:
        om = reference_rabi(system, pol, *pair, E0)
    else:
        if abs(M) > lower.J:
            raise ValueError(f"M={M} outside level {lower.label}")
        blk = system.pair_block(pol, *pair)
        col = blk[:, M + lower.J]
        om = float(np.linalg.norm(col)) * E0 * RABI_PER_DEBYE_VM
        if om <= 1e-12 * max(1.0, E0 * RABI_PER_DEBYE_VM):
            raise ForbiddenTransitionError(
                f"{_as_pol(pol).value} transition {lower.label},M={M} -> {upper.label} is forbidden"
            )
    if om <= 0:
        raise ForbiddenTransitionError("zero Rabi frequency")
    frac = 1.0 if envelope is None else envelope.area_fraction()
    return area / om / frac


# ---------------------------------------------------------------- synchronization


@dataclass(frozen=True)
class SyncResult:
    epsilon: float
    duration: float
    target: float
    omegas: tuple  # rad/us per two-level system
    lower_M: tuple
    fractions: tuple  # transferred fraction per two-level system at ``duration``
    signs: tuple  # sign of the transfer amplitude factor per two-level system
    deviation: float

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "duration_us": self.duration,
            "target": self.target,
            "lower_M": list(self.lower_M),
            "omega_rad_per_us": list(self.omegas),
            "fractions": list(self.fractions),
            "signs": list(self.signs),
            "deviation": self.deviation,
        }


def _amp_sign(om, t, target):
    # sign of the amplitude factor that a later pulse interferes with:
    # sin(Omega t) for a 50/50 split, sin(Omega t / 2) for a transfer
    th = om * t / 2
    return np.sign(np.sin(2 * th) if target < 1 else np.sin(th))


def _deviation(om, t, target):
    return np.abs(np.sin(np.multiply.outer(t, om) / 2) ** 2 - target).max(axis=-1)


def sync_search(
    system: Subsystem,
    pair,
    pol,
    intensity: float = None,
    epsilon: float = 0.05,
    target="half",
    *,
    E0: float = None,
    sign_pattern=None,
    horizon_periods: float = 1e4,
    envelope: Envelope = None,
    chunk: int = 1 << 17,
) -> SyncResult:
    """Earliest pulse duration at which every M-subtransition is on target.

    Transferred fractions are ``sin^2(Omega_M t / 2)``. The returned time is
    the first local minimum of the worst deviation
    ``max_M |fraction_M - target|`` whose value is at most ``epsilon``; the
    minimum is bracketed on a grid of step ``1/(1000 max Omega)`` and
    polished with a bounded scalar search. With ``sign_pattern`` the
    amplitude signs (see :func:`_amp_sign`) must match the pattern up to a
    global sign; zero entries are unconstrained. ``target`` is ``"half"`` (0.5) or ``"full"`` (1.0).
    """
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    tgt = {"half": 0.5, "full": 1.0}.get(target, target)
    if tgt not in (0.5, 1.0):
        raise ValueError("target must be 'half' or 'full'")
    if E0 is None:
        if intensity is None:
            raise ValueError("give an intensity or a field amplitude")
        E0 = field_amplitude_from_intensity(intensity)
    pol = _as_pol(pol)
    if pol in (Polarization.X, Polarization.Y):
        raise ValueError("synchronization needs z or circular polarization")
    tls = two_level_decomposition(system, pol, *pair)
    if not tls:
        raise ForbiddenTransitionError("no coupled M-pair")
    om = np.array([abs(t.element) for t in tls]) * E0 * RABI_PER_DEBYE_VM
    pattern = None if sign_pattern is None else np.asarray(sign_pattern, dtype=float)
    if pattern is not None and pattern.shape != om.shape:
        raise ValueError("sign pattern must have one entry per two-level system")
    frac = 1.0 if envelope is None else envelope.area_fraction()

    dt = 1.0 / (1000.0 * om.max())
    t_max = horizon_periods * 2 * pi / om.min()
    g = lambda t: float(_deviation(om, np.atleast_1d(t), tgt)[0])

    def accept(t):
        if g(t) > epsilon:
            return False
        if pattern is None:
            return True
        s = (_amp_sign(om, t, tgt) * pattern)[pattern != 0]
        return bool(np.all(s > 0) or np.all(s < 0))

    # the deviation moves by at most max(Omega) dt / 2 between grid points
    slack = om.max() * dt
    k0 = 0
    prev = None
    while k0 * dt < t_max:
        k = np.arange(k0, k0 + chunk + 2)
        t = k * dt
        dev = _deviation(om, t, tgt)
        loc = np.nonzero((dev[1:-1] <= dev[:-2]) & (dev[1:-1] <= dev[2:]) & (dev[1:-1] <= epsilon + slack))[0] + 1
        for i in loc:
            if t[i] <= 0:
                continue
            res = minimize_scalar(g, bounds=(t[i - 1], t[i + 1]), method="bounded", options={"xatol": 1e-13 * t[i]})
            tb = res.x if res.fun <= dev[i] else t[i]
            if prev is not None and abs(tb - prev) < 1e-12 * tb:
                continue
            if accept(tb):
                fr = np.sin(om * tb / 2) ** 2
                return SyncResult(
                    float(epsilon), float(tb / frac), tgt, tuple(map(float, om)), tuple(x.lower_M for x in tls),
                    tuple(map(float, fr)), tuple(map(float, _amp_sign(om, tb, tgt))), g(tb),
                )
            prev = tb
        k0 += chunk
    raise SearchHorizonError(
        f"no synchronization within {horizon_periods:g} Rabi periods for epsilon={epsilon:g}"
    )


# ---------------------------------------------------------------- schemes


@dataclass(frozen=True)
class CycleSlot:
    """One field of a scheme: a level pair driven with one polarization.

    ``intensity`` in W/cm^2 (ignored when ``E0`` in V/m is given);
    ``area`` overrides the role's default Rabi area.
    """

    pair: tuple
    pol: Polarization
    role: str = "half"
    intensity: float = 10.0
    E0: float = None
    phase: float = 0.0
    area: float = None

    def __post_init__(self):
        object.__setattr__(self, "pol", _as_pol(self.pol))
        object.__setattr__(self, "pair", tuple(self.pair))
        if len(self.pair) != 2:
            raise ValueError("a slot drives exactly two levels")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")

    @property
    def field_amplitude(self) -> float:
        return self.E0 if self.E0 is not None else field_amplitude_from_intensity(self.intensity)

    @property
    def rabi_area(self) -> float:
        return self.area if self.area is not None else ROLE_AREA[self.role]

    def to_dict(self):
        return {
            "pair": list(self.pair), "pol": self.pol.value, "role": self.role, "intensity": self.intensity,
            "E0": self.E0, "phase": self.phase, "area": self.area,
        }


# Seven overlapping fields for the {0_00, 1_11, 1_10}-type subsystem, in
# reduced units: start and duration in 1/Omega_u, strength in Omega_u,
# phase in rad. Found by a seeded simplex search over rectangular pulses
# (scripts/search_combined_template.py).
COMBINED_TEMPLATE = (
    # (carrier, pol, start, duration, strength, phase)
    ("w1", "x", 0.0000, 1.0042, 1.5644, 1.5099),
    ("w1", "y", 3.6312, 2.1830, 1.7437, 1.1848),
    ("w1", "z", 2.2916, 1.2900, 1.2177, 4.5863),
    ("w2", "x", 0.6052, 0.3715, 4.2279, 3.7660),
    ("w2", "z", 3.5103, 1.8363, 2.5663, 3.7008),
    ("w3", "y", 0.9340, 1.1916, 2.6368, 0.4983),
    ("w3", "z", 4.0634, 0.6320, 3.6577, 3.3800),
)


@dataclass(frozen=True)
class SchemeSpec:
    """A named excitation scheme on three levels.

    ``timing`` (combined scheme only) holds per-slot
    ``(start, duration, strength, phase)`` in the reduced units of
    :data:`COMBINED_TEMPLATE`.
    """

    scheme: str
    levels: tuple
    slots: tuple
    epsilon: float = 0.05
    gap: float = 0.0
    envelope: Envelope = field(default_factory=Envelope)
    initial: str = None
    resolve_phase: bool = True
    timing: tuple = ()
    horizon_periods: float = 1e4

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise SchemeError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "slots", tuple(s if isinstance(s, CycleSlot) else CycleSlot(**s) for s in self.slots))
        if len(set(self.levels)) != 3:
            raise SchemeError("a scheme needs three distinct levels")
        if self.initial is None:
            object.__setattr__(self, "initial", self.levels[0])
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")

    def carrier(self, name):
        a, b, c = self.levels
        return {"w1": (a, b), "w2": (b, c), "w3": (a, c)}[name]

    @classmethod
    def default(cls, scheme: str, levels, intensity: float = 10.0, half_intensity: float = None, **kw):
        """Standard slot layout: half pulse on w3, twist on w1, probe on w2.

        ``combined-3cycles`` instead uses the seven fields of
        :data:`COMBINED_TEMPLATE`, all at ``intensity`` as the maximum.
        """
        levels = tuple(levels)
        tmp = cls(scheme, levels, (), **{k: v for k, v in kw.items() if k != "timing"})
        if scheme == "combined-3cycles":
            slots, timing = [], []
            for carrier, pol, t0, dur, amp, ph in COMBINED_TEMPLATE:
                slots.append(CycleSlot(tmp.carrier(carrier), pol, "half", intensity))
                timing.append((t0, dur, amp, ph))
            return replace(tmp, slots=tuple(slots), timing=kw.get("timing", tuple(timing)))
        circ = scheme.startswith("circular")
        hi = intensity if half_intensity is None else half_intensity
        slots = (
            CycleSlot(tmp.carrier("w3"), "z", "half", hi),
            CycleSlot(tmp.carrier("w1"), "sigma_minus" if circ else "x", "twist", intensity),
            CycleSlot(tmp.carrier("w2"), "sigma_plus" if circ else "y", "probe", intensity),
        )
        return replace(tmp, slots=slots)

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "levels": list(self.levels),
            "slots": [s.to_dict() for s in self.slots],
            "epsilon": self.epsilon,
            "gap_us": self.gap,
            "envelope": {"shape": self.envelope.shape, "ramp": self.envelope.ramp, "sigma": self.envelope.sigma},
            "initial": self.initial,
            "resolve_phase": self.resolve_phase,
            "timing": [list(t) for t in self.timing],
        }


def _pair_key(system, pair):
    lower, upper, _ = system.pair(*pair)
    return (lower.label, upper.label)


def _check_slots(spec: SchemeSpec, system: Subsystem):
    for lab in spec.levels:
        system.level(lab)
    for s in spec.slots:
        if not set(s.pair) <= set(spec.levels):
            raise SchemeError(f"slot pair {s.pair} is not inside the scheme levels {spec.levels}")
        if system.pair_rabi(s.pol, *s.pair, 1.0).size == 0:
            t = system.transition_type(*s.pair)
            raise SchemeError(
                f"{s.pol.value} polarization does not drive {s.pair[0]}<->{s.pair[1]} (type {t or 'forbidden'})"
            )
    pairs = {frozenset(p) for p in itertools.combinations(spec.levels, 2)}
    types = {frozenset(p): system.transition_type(*tuple(p)) for p in pairs}
    if sorted(t or "" for t in types.values()) != ["a", "b", "c"]:
        raise SchemeError(
            "levels " + ", ".join(spec.levels) + " do not form a closed a/b/c-type cycle: "
            + ", ".join(f"{'<->'.join(sorted(p))}={t}" for p, t in types.items())
        )


def _check_cycle(spec: SchemeSpec, system: Subsystem):
    if len(spec.slots) != 3:
        raise SchemeError(f"{spec.scheme} expects three slots, got {len(spec.slots)}")
    if {s.role for s in spec.slots} != set(ROLES):
        raise SchemeError("a cycle needs one half, one twist and one probe slot")
    if len({frozenset(s.pair) for s in spec.slots}) != 3:
        raise SchemeError("the three slots must drive the three different level pairs")
    vecs = [s.pol.vector for s in spec.slots]
    for i, j in itertools.combinations(range(3), 2):
        if abs(np.vdot(vecs[i], vecs[j])) > 1e-12:
            raise SchemeError(
                f"polarizations {spec.slots[i].pol.value} and {spec.slots[j].pol.value} are not orthogonal"
            )
    want_circ = spec.scheme.startswith("circular")
    if want_circ and not any(s.pol.circular for s in spec.slots):
        raise SchemeError(f"{spec.scheme} needs circularly polarized slots")
    if spec.scheme == "linear-xyz" and any(s.pol.circular for s in spec.slots):
        raise SchemeError("linear-xyz uses linear polarizations only")


def _closed_cycles(spec: SchemeSpec, system: Subsystem):
    """Per M-cycle: (two-level index in each slot, loop phase factor).

    Follows each half-pulse two-level system through the twist and
    probe; only defined for z/circular slots.
    """
    by_role = {s.role: s for s in spec.slots}
    dec = {r: two_level_decomposition(system, by_role[r].pol, *by_role[r].pair) for r in ROLES}
    start = system.level(spec.initial)
    out = []
    for ih, th in enumerate(dec["half"]):
        if system.basis[th.lower].level == start:
            s0, s_half = th.lower, th.upper
        elif system.basis[th.upper].level == start:
            s0, s_half = th.upper, th.lower
        else:
            continue
        tw = [(i, t) for i, t in enumerate(dec["twist"]) if s0 in (t.lower, t.upper)]
        if not tw:
            continue
        it, tt = tw[0]
        s_tw = tt.upper if tt.lower == s0 else tt.lower
        pr = [(i, t) for i, t in enumerate(dec["probe"]) if {t.lower, t.upper} == {s_tw, s_half}]
        if not pr:
            continue
        ip, tp = pr[0]
        # loop s0 -> s_half -> s_tw -> s0 with <b|X|a> = X[u,l] upward, conj downward
        step = lambda t, a: t.element if a == t.lower else np.conj(t.element)
        loop = step(th, s0) * step(tp, s_half) * step(tt, s_tw)
        out.append((ih, it, ip, loop))
    if not out:
        raise SchemeError("the slots do not close any M-cycle from the initial level")
    return out


def sequential_pulses(system: Subsystem, slots, envelope: Envelope = None, gap: float = 0.0, t0: float = 0.0):
    """Back-to-back pulses with areas from :func:`reference_rabi`."""
    envelope = envelope or Envelope()
    pulses = []
    t = t0
    for s in slots:
        E0 = s.field_amplitude
        lower, upper, f = system.pair(*s.pair)
        d = pulse_area_duration(system, s.pair, None, s.pol, E0, s.rabi_area, envelope)
        pulses.append(Pulse(s.pol, f, E0, t, d, s.phase, envelope, f"{s.role}:{lower.label}-{upper.label}:{s.pol.value}"))
        t += d + gap
    return PulseSequence(pulses)


def _synchronized(spec: SchemeSpec, system: Subsystem):
    cycles = _closed_cycles(spec, system)
    by_role = {s.role: s for s in spec.slots}
    res = {}
    kw = dict(epsilon=spec.epsilon, horizon_periods=spec.horizon_periods, envelope=spec.envelope)
    half = by_role["half"]
    res["half"] = sync_search(system, half.pair, half.pol, E0=half.field_amplitude, target="half", **kw)
    # the twist absorbs the half-pulse signs and the loop phase signs so that
    # every M-cycle interferes the same way; the probe is then locked uniformly
    ref = cycles[0][3]
    loop_sign = {ih: np.sign(np.real(lp * np.conj(ref))) or 1.0 for ih, _, _, lp in cycles}
    tw = by_role["twist"]
    n_tw = len(two_level_decomposition(system, tw.pol, *tw.pair))
    pattern = np.ones(n_tw)
    s_half = res["half"].signs
    used = set()
    for ih, it, _, _ in cycles:
        pattern[it] = s_half[ih] * loop_sign[ih]
        used.add(it)
    # two-level systems outside closed cycles are left unconstrained
    pattern = [p if i in used else 0.0 for i, p in enumerate(pattern)]
    res["twist"] = sync_search(system, tw.pair, tw.pol, E0=tw.field_amplitude, target="full", sign_pattern=pattern, **kw)
    pr = by_role["probe"]
    n_pr = len(two_level_decomposition(system, pr.pol, *pr.pair))
    used_p = {ip for _, _, ip, _ in cycles}
    pattern = [1.0 if i in used_p else 0.0 for i in range(n_pr)]
    res["probe"] = sync_search(system, pr.pair, pr.pol, E0=pr.field_amplitude, target="half", sign_pattern=pattern, **kw)
    return res


def _combined(spec: SchemeSpec, system: Subsystem):
    if len(spec.timing) != len(spec.slots):
        raise SchemeError("combined-3cycles needs one timing row per slot")
    E0max = max(s.field_amplitude for s in spec.slots)
    frac = spec.envelope.area_fraction()
    # per-slot V/m needed for one reduced strength unit
    need = []
    for s, (_, _, amp, _) in zip(spec.slots, spec.timing):
        d = reference_rabi(system, s.pol, *s.pair, 1.0)  # rad/us per V/m
        need.append(amp / d / frac)
    omega_u = E0max / max(need)
    pulses = []
    for s, n, (t0, dur, amp, ph) in zip(spec.slots, need, spec.timing):
        lower, upper, f = system.pair(*s.pair)
        pulses.append(
            Pulse(s.pol, f, n * omega_u, t0 / omega_u, dur / omega_u, ph + s.phase, spec.envelope,
                  f"{lower.label}-{upper.label}:{s.pol.value}")
        )
    return PulseSequence(pulses)


def build_scheme(spec: SchemeSpec, system: Subsystem, *, method: str = "rwa") -> PulseSequence:
    """Pulse sequence for ``spec`` on ``system``.

    Cycle schemes are back-to-back in slot order. When
    ``spec.resolve_phase`` is set, probe-slot phases are chosen from
    multiples of pi/2 by maximizing selectivity from the initial level.
    """
    _check_slots(spec, system)
    if spec.scheme == "combined-3cycles":
        return _combined(spec, system)
    _check_cycle(spec, system)
    if spec.scheme == "circular":
        _closed_cycles(spec, system)
    if spec.scheme == "circular-synchronized":
        res = _synchronized(spec, system)
        pulses, t = [], 0.0
        for s in spec.slots:
            lower, upper, f = system.pair(*s.pair)
            d = res[s.role].duration
            pulses.append(Pulse(s.pol, f, s.field_amplitude, t, d, s.phase, spec.envelope,
                                f"{s.role}:{lower.label}-{upper.label}:{s.pol.value}"))
            t += d + spec.gap
        seq = PulseSequence(pulses)
    else:
        seq = sequential_pulses(system, spec.slots, spec.envelope, spec.gap)
    if spec.resolve_phase:
        probes = [i for i, s in enumerate(spec.slots) if s.role == "probe"]
        seq = resolve_phases(system, seq, uniform_level_ensemble(system.level(spec.initial), system), probes, method=method)
    return seq


def resolve_phases(system, seq, ensemble, indices, candidates=(0.0, pi / 2, pi, 3 * pi / 2), method="rwa", **kw):
    """Add the candidate phase offsets to ``indices`` that maximize S.

    All combinations are evaluated; ties keep the earliest candidate.
    """
    best = None
    for combo in itertools.product(candidates, repeat=len(indices)):
        pulses = list(seq)
        for i, ph in zip(indices, combo):
            pulses[i] = replace(pulses[i], phase=float((pulses[i].phase + ph) % (2 * pi)))
        trial = PulseSequence(pulses)
        S = final_selectivity(system, ensemble, trial, method=method, **kw).S
        if best is None or S > best[0] + 1e-12:
            best = (S, trial)
    return best[1]


def j01_cycles(levels):
    """Slots of the three single cycles of a ``(0_00, 1_11, 1_10)``-type system.

    ``levels = (L0, L1, L2)``; the initial level is ``L1``. Returns a
    dict ``{"i": [...], "ii": [...], "iii": [...]}`` of slot lists.
    """
    a, b, c = levels
    w1, w2, w3 = (a, b), (b, c), (a, c)
    return {
        "i": [CycleSlot(w2, "x", "half"), CycleSlot(w1, "z", "twist"), CycleSlot(w3, "y", "probe")],
        "ii": [CycleSlot(w1, "y", "half"), CycleSlot(w3, "z", "twist"), CycleSlot(w2, "x", "probe")],
        "iii": [CycleSlot(w1, "x", "half"), CycleSlot(w3, "y", "twist"), CycleSlot(w2, "z", "probe")],
    }


# ---------------------------------------------------------------- optimization

PARAM_KINDS = ("duration", "amplitude", "phase", "start")


@dataclass(frozen=True)
class FreeParameter:
    """Scale (duration, amplitude) or offset (phase in rad, start in us)."""

    pulse: int
    kind: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise ValueError(f"parameter kind must be one of {PARAM_KINDS}")
        if not self.lower < self.upper:
            raise ValueError("empty parameter bounds")

    @property
    def neutral(self) -> float:
        return 1.0 if self.kind in ("duration", "amplitude") else 0.0


@dataclass(frozen=True)
class SequenceTemplate:
    """A base sequence with free parameters.

    With ``keep_order`` a change of duration also delays every pulse that
    started after the changed pulse ended, so back-to-back pulses stay
    back-to-back.
    """

    base: PulseSequence
    params: tuple
    keep_order: bool = True

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        for p in self.params:
            if not 0 <= p.pulse < len(self.base):
                raise ValueError(f"parameter refers to missing pulse {p.pulse}")

    @property
    def x0(self) -> np.ndarray:
        return np.array([min(max(p.neutral, p.lower), p.upper) for p in self.params])

    @property
    def bounds(self):
        return [(p.lower, p.upper) for p in self.params]

    def apply(self, x) -> PulseSequence:
        x = np.asarray(x, dtype=float)
        pulses = list(self.base)
        dur = [p.duration for p in pulses]
        amp = [p.E0 for p in pulses]
        ph = [p.phase for p in pulses]
        shift = [0.0] * len(pulses)
        for p, v in zip(self.params, x):
            if p.kind == "duration":
                dur[p.pulse] *= v
            elif p.kind == "amplitude":
                amp[p.pulse] *= v
            elif p.kind == "phase":
                ph[p.pulse] += v
            else:
                shift[p.pulse] += v
        base = list(self.base)
        out = []
        for j, q in enumerate(base):
            s = shift[j]
            if self.keep_order:
                tol = 1e-12 * max(1.0, abs(q.t_start))
                s += sum(dur[i] - base[i].duration for i in range(len(base)) if base[i].t_end <= q.t_start + tol and i != j)
            out.append(replace(q, t_start=q.t_start + s, duration=dur[j], E0=amp[j], phase=ph[j]))
        return PulseSequence(out)

    def to_dict(self):
        return {
            "base": self.base.to_list(),
            "params": [{"pulse": p.pulse, "kind": p.kind, "lower": p.lower, "upper": p.upper} for p in self.params],
            "keep_order": self.keep_order,
        }


@dataclass
class OptimizationResult:
    params: np.ndarray
    sequence: PulseSequence
    S: float
    S_start: float
    evaluations: int
    converged: bool
    trace: list  # (restart, evaluation, S, best S within restart)
    message: str = ""


def selectivity_objective(system, ensemble, method="rwa", **kw):
    """Callable returning the default-variant S at the end of a sequence."""

    def f(seq):
        return final_selectivity(system, ensemble, seq, method=method, **kw).S

    return f


def optimize_sequence(
    template: SequenceTemplate,
    objective,
    *,
    budget: int = 400,
    restarts: int = 4,
    seed: int = 0,
    threads: int = 1,
    spread: float = 0.15,
    xatol: float = 1e-4,
    fatol: float = 1e-6,
) -> OptimizationResult:
    """Bounded Nelder-Mead on ``-objective`` with seeded restarts.

    Restart 0 starts at the template's neutral point, later ones at seeded
    Gaussian perturbations of it (``spread`` of the box width). The
    evaluation budget is split evenly; restarts may run in threads, and the
    reduction (largest S, then lowest restart index) does not depend on
    completion order. The start point is always evaluated first, so the
    result is never worse than it.
    """
    n = len(template.params)
    if n == 0:
        raise ValueError("nothing to optimize: the template has no free parameters")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    lo = np.array([p.lower for p in template.params])
    hi = np.array([p.upper for p in template.params])
    to_x = lambda u: lo + np.clip(u, 0.0, 1.0) * (hi - lo)
    x0 = template.x0
    u0 = (x0 - lo) / (hi - lo)

    S0 = float(objective(template.apply(x0)))
    trace = [(0, 1, S0, S0)]
    if S0 >= 1.0 - 1e-12 or budget == 1:
        return OptimizationResult(
            x0, template.apply(x0), S0, S0, 1, S0 >= 1.0 - 1e-12, trace,
            "start point already optimal" if S0 >= 1.0 - 1e-12 else "budget exhausted",
        )
    rng = np.random.default_rng(seed)
    starts = [u0] + [np.clip(u0 + spread * rng.standard_normal(n), 0.0, 1.0) for _ in range(max(restarts, 1) - 1)]
    per = max(1, (budget - 1) // len(starts))

    def run(r):
        u_start = starts[r]
        local = []
        best = [-np.inf]

        def f(u):
            s = float(objective(template.apply(to_x(u))))
            best[0] = max(best[0], s)
            local.append((r, len(local) + 1, s, best[0]))
            return -s

        step = 0.1
        simplex = [u_start] + [np.clip(u_start + step * np.eye(n)[i] * (1 if u_start[i] + step <= 1 else -1), 0, 1) for i in range(n)]
        res = minimize(
            f, u_start, method="Nelder-Mead", bounds=[(0.0, 1.0)] * n,
            options={"maxfev": per, "xatol": xatol, "fatol": fatol, "initial_simplex": np.array(simplex), "adaptive": n > 4},
        )
        return r, res, local

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            runs = list(ex.map(run, range(len(starts))))
    else:
        runs = [run(r) for r in range(len(starts))]
    runs.sort(key=lambda t: t[0])
    evals = 1 + sum(len(loc) for _, _, loc in runs)
    for _, _, loc in runs:
        trace.extend((r, i + 1, s, b) for r, i, s, b in loc)

    best_r, best_res = None, None
    for r, res, _ in runs:
        if best_res is None or -res.fun > -best_res.fun + 1e-15:
            best_r, best_res = r, res
    if -best_res.fun <= S0:
        return OptimizationResult(x0, template.apply(x0), S0, S0, evals, False, trace, "no improvement over the start point")
    xb = to_x(best_res.x)
    converged = bool(best_res.success) and best_res.nfev < per
    return OptimizationResult(
        xb, template.apply(xb), float(-best_res.fun), S0, evals, converged, trace,
        f"restart {best_r}: {best_res.message}",
    )
