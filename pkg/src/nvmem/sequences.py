"""Correlation sequences built from conditional sensor gates, and their simulation.

A sensing block is a pair of C_mNOT_s gates (NOT on the sensor conditioned
on the memory state) around a free-evolution window. Between the gates the
sensor state differs between the two memory components, so a field on the
sensor writes a relative phase onto the memory. The sensor qubit uses
|0> = m_S 0 and |1> = m_S -1.

Simulation frame
----------------
States are kept in the interaction picture of the local terms (zero-field
splitting, Zeeman, bare target Larmor) and of the memory hyperfine term, so
ideal gates are plain matrices. Intervals with dissipation or RF driving are
propagated in a working frame related to this one by a diagonal unitary
evaluated at absolute times, which keeps the non-covariant dissipator exact.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy.linalg as sla

from . import constants as C
from .dynamics import (IlluminationModel, depolarizing_channel, illumination_channel,
                       liouvillian, unvec, vec)
from .physics import (MEMORY, MEMORY_IZ, SENSOR, TARGET_IZ, HamiltonianParams, nv_system,
                      sensor_sz, target_label)
from .quantum import (PAULI_X, PAULI_Y, DensityState, Operator, embed, embed_many,
                      product_state, qubit_rotation, reduced_matrix)


class EventKind(str, enum.Enum):
    FREE = "free_evolution"
    CMNOT = "cmnot_s"
    RF_PI = "rf_pi_target"
    MEMORY_HALF_PI = "rf_half_pi_memory"
    RF_HALF_PI = "rf_half_pi_target"
    LASER = "laser_segment"
    CHARGE = "charge_switch"


class Segment(str, enum.Enum):
    """Role of an event inside a sequence."""

    PREP = "prep"
    SENSING = "sensing"
    STORAGE = "storage"
    CORRELATION = "correlation"
    READOUT = "readout"


@dataclass(frozen=True)
class SequenceEvent:
    """One timed step.

    ``rabi`` defaults to the value that makes the pulse a pi (or pi/2)
    rotation over ``duration``. ``cycled`` marks memory pulses whose phase is
    alternated by pi between two runs (classical-storage phase cycling).
    Timed events may carry an ``illumination`` model to keep the laser on.
    """

    kind: EventKind
    duration: float = 0.0
    condition: int | None = None
    frequency: float | None = None
    rabi: float | None = None
    phase: float = 0.0
    illumination: IlluminationModel | None = None
    charge: str | None = None
    segment: Segment = Segment.STORAGE
    cycled: bool = False

    def __post_init__(self):
        kind = EventKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "segment", Segment(self.segment))
        if not self.duration >= 0:
            raise ValueError("event duration must be >= 0")
        if kind is EventKind.CMNOT and self.condition not in (0, 1):
            raise ValueError("cmnot_s needs condition 0 or 1")
        if kind in (EventKind.RF_PI, EventKind.RF_HALF_PI):
            if self.frequency is None or not self.duration > 0:
                raise ValueError(f"{kind.value} needs a frequency and a duration > 0")
            if self.rabi is None:
                quarter = 2 if kind is EventKind.RF_PI else 4
                object.__setattr__(self, "rabi", 1 / (quarter * self.duration))
        if kind is EventKind.LASER and self.illumination is None:
            raise ValueError("laser_segment needs an illumination model")
        if kind is EventKind.CHARGE and self.charge not in ("nv0", "nvm"):
            raise ValueError("charge_switch needs charge 'nv0' or 'nvm'")
        if kind in (EventKind.CMNOT, EventKind.MEMORY_HALF_PI, EventKind.CHARGE) and self.duration:
            raise ValueError(f"{kind.value} is an ideal instantaneous event")

    @property
    def is_rf(self) -> bool:
        return self.kind in (EventKind.RF_PI, EventKind.RF_HALF_PI)

    @property
    def laser_on(self) -> bool:
        return self.illumination is not None and self.illumination.laser_power > 0

    def to_record(self) -> dict:
        rec = {"kind": self.kind.value, "duration": self.duration, "segment": self.segment.value}
        for key in ("condition", "frequency", "rabi", "charge"):
            val = getattr(self, key)
            if val is not None:
                rec[key] = val
        if self.phase:
            rec["phase"] = self.phase
        if self.cycled:
            rec["cycled"] = True
        if self.illumination is not None:
            rec["illumination"] = asdict(self.illumination)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "SequenceEvent":
        rec = dict(rec)
        if "illumination" in rec:
            rec["illumination"] = IlluminationModel(**rec["illumination"])
        return cls(**rec)


@dataclass(frozen=True)
class SequenceSchedule:
    events: tuple
    tau_segments: tuple
    t_c: float
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "tau_segments", tuple(float(t) for t in self.tau_segments))
        sensing = sum(e.duration for e in self.events if e.segment is Segment.SENSING)
        tau = sum(self.tau_segments)
        if abs(sensing - tau) > 1e-12 * max(tau, 1e-300) + 1e-18:
            raise ValueError(f"sensing windows add up to {sensing:g} s but tau segments to {tau:g} s")

    @property
    def tau(self) -> float:
        return sum(self.tau_segments)

    @property
    def total_time(self) -> float:
        return sum(e.duration for e in self.events)

    def to_records(self) -> list:
        return [e.to_record() for e in self.events]

    @classmethod
    def from_records(cls, records, tau_segments, t_c, name="custom") -> "SequenceSchedule":
        return cls(tuple(SequenceEvent.from_record(r) for r in records), tau_segments, t_c, name)


def dqma_block(first_condition: int, sensor_in: int, tau: float, second_condition: int | None = None):
    """Sensing block: C_mNOT_s, free evolution ``tau``, C_mNOT_s.

    Returns
    -------
    events : list of SequenceEvent
    phase_target : int
        Memory component whose sensor sits in m_S = -1 during ``tau``.
    sensor_out : int
        Sensor state after the block (unchanged for identical conditions,
        flipped for differing ones).
    """
    if second_condition is None:
        second_condition = first_condition
    if first_condition not in (0, 1) or second_condition not in (0, 1) or sensor_in not in (0, 1):
        raise ValueError("conditions and sensor state must be 0 or 1")
    events = [
        SequenceEvent(EventKind.CMNOT, condition=first_condition, segment=Segment.SENSING),
        SequenceEvent(EventKind.FREE, duration=tau, segment=Segment.SENSING),
        SequenceEvent(EventKind.CMNOT, condition=second_condition, segment=Segment.SENSING),
    ]
    phase_target = first_condition ^ sensor_in
    sensor_out = sensor_in if second_condition == first_condition else 1 - sensor_in
    return events, phase_target, sensor_out


def block_for(phase_target: int, sensor_in: int, sensor_out: int, tau: float):
    """Sensing block with a prescribed phase target and sensor transition."""
    c1 = phase_target ^ sensor_in
    c2 = c1 if sensor_out == sensor_in else 1 - c1
    return dqma_block(c1, sensor_in, tau, c2)[0]


@dataclass(frozen=True)
class CorrelationSpec:
    """Parameters of a correlation-spectroscopy sequence.

    ``kind`` is ``this_work`` (four sensing blocks of tau/4 with broadband
    target pi pulses in the outer storage steps) or ``prior_work`` (two
    blocks of tau/2 around the correlation time). ``rf_pi_durations`` holds
    the outer broadband pulse length and the central pulse length (None: the
    whole correlation time). ``payload`` chooses the central operation:
    ``pi``, ``ramsey`` or ``none``. ``tc_mode`` is ``dark``, ``illuminated``
    or ``nv0``.
    """

    tau: float
    t_c: float
    rf_center: float
    rf_frequency: float | None = None
    rf_pi_durations: tuple = (40e-6, None)
    sensor_state_during_tc: int = 1
    classical_storage: bool = False
    kind: str = "this_work"
    payload: str = "pi"
    ramsey_pulse_duration: float = 20e-6
    ramsey_phase: float = 0.0
    tc_mode: str = "dark"
    illumination: IlluminationModel | None = None

    @property
    def outer_pi_duration(self) -> float:
        return self.rf_pi_durations[0]

    @property
    def central_pi_duration(self) -> float:
        d = self.rf_pi_durations[1] if len(self.rf_pi_durations) > 1 else None
        return self.t_c if d is None else d

    @property
    def central_frequency(self) -> float:
        return self.rf_center if self.rf_frequency is None else self.rf_frequency


# memory pulse phases: prepare +x, convert -y -> +z, restore, read x -> -z
PREP_PHASE = np.pi / 2
CONVERT_PHASE = np.pi
RESTORE_PHASE = 0.0
READ_PHASE_CLASSICAL = np.pi / 2
READ_PHASE_QUANTUM = 3 * np.pi / 2


def _central_events(spec: CorrelationSpec):
    seg = Segment.CORRELATION
    laser = spec.illumination if spec.tc_mode == "illuminated" else None
    t_c = spec.t_c
    f = spec.central_frequency

    def pad(d):
        if d <= 0:
            return []
        kind = EventKind.LASER if laser is not None else EventKind.FREE
        return [SequenceEvent(kind, duration=d, illumination=laser, segment=seg)]

    if spec.payload == "none":
        core = pad(t_c)
    elif spec.payload == "pi":
        d = spec.central_pi_duration
        if d > t_c * (1 + 1e-12):
            raise ValueError("central pi pulse is longer than the correlation time")
        gap = max(t_c - d, 0.0) / 2
        core = pad(gap) + [SequenceEvent(EventKind.RF_PI, duration=d, frequency=f,
                                         illumination=laser, segment=seg)] + pad(gap)
    elif spec.payload == "ramsey":
        p = spec.ramsey_pulse_duration
        if 2 * p > t_c:
            raise ValueError("Ramsey pulses do not fit into the correlation time")
        core = ([SequenceEvent(EventKind.RF_HALF_PI, duration=p, frequency=f, illumination=laser, segment=seg)]
                + pad(t_c - 2 * p)
                + [SequenceEvent(EventKind.RF_HALF_PI, duration=p, frequency=f, phase=spec.ramsey_phase,
                                 illumination=laser, segment=seg)])
    else:
        raise ValueError(f"unknown payload {spec.payload!r}")
    if spec.tc_mode == "nv0":
        core = ([SequenceEvent(EventKind.CHARGE, charge="nv0", segment=seg)] + core
                + [SequenceEvent(EventKind.CHARGE, charge="nvm", segment=seg)])
    return core


def compose_correlation_sequence(spec: CorrelationSpec) -> SequenceSchedule:
    """Build the correlation sequence described by ``spec``."""
    if not (spec.tau > 0 and spec.t_c > 0):
        raise ValueError("tau and t_c must be > 0")
    if spec.tc_mode not in ("dark", "illuminated", "nv0"):
        raise ValueError(f"unknown tc_mode {spec.tc_mode!r}")
    s_tc = spec.sensor_state_during_tc
    if s_tc not in (0, 1):
        raise ValueError("sensor_state_during_tc must be 0 or 1")
    if spec.tc_mode != "dark":
        if s_tc != 0 or not spec.classical_storage:
            raise ValueError("illuminated or NV0 correlation times need classical storage "
                             "and the sensor returned to m_S = 0")
        if spec.tc_mode == "illuminated" and spec.illumination is None:
            raise ValueError("tc_mode 'illuminated' needs an illumination model")
    ev = [SequenceEvent(EventKind.MEMORY_HALF_PI, phase=PREP_PHASE, segment=Segment.PREP)]
    central = _central_events(spec)
    if spec.classical_storage:
        central = ([SequenceEvent(EventKind.MEMORY_HALF_PI, phase=CONVERT_PHASE, cycled=True)] + central
                   + [SequenceEvent(EventKind.MEMORY_HALF_PI, phase=RESTORE_PHASE)])
    if spec.kind == "this_work":
        q = spec.tau / 4
        outer = spec.outer_pi_duration
        if not outer > 0:
            raise ValueError("outer pi-pulse duration must be > 0")

        def flip():
            return [SequenceEvent(EventKind.RF_PI, duration=outer, frequency=spec.rf_center)]

        ev += block_for(0, 0, 0, q) + flip() + block_for(1, 0, s_tc, q)
        ev += central
        ev += block_for(0, s_tc, 0, q) + flip() + block_for(1, 0, 0, q)
        segs = (q, q, q, q)
    elif spec.kind == "prior_work":
        h = spec.tau / 2
        ev += block_for(0, 0, s_tc, h) + central + block_for(1, s_tc, 0, h)
        segs = (h, h)
    else:
        raise ValueError(f"unknown sequence kind {spec.kind!r}")
    read = READ_PHASE_CLASSICAL if spec.classical_storage else READ_PHASE_QUANTUM
    ev.append(SequenceEvent(EventKind.MEMORY_HALF_PI, phase=read, segment=Segment.READOUT))
    return SequenceSchedule(tuple(ev), segs, spec.t_c, name=spec.kind)


# Sensitivity function ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SensitivityFunction:
    """Piecewise-constant field weighting f(t) in {-1, 0, +1}."""

    breakpoints: np.ndarray
    values: np.ndarray
    total_time: float

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.size != v.size + 1 or np.any(np.diff(b) < 0):
            raise ValueError("need n+1 non-decreasing breakpoints for n values")
        if np.any(np.abs(v) > 1):
            raise ValueError("|f| must be <= 1")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def integral(self) -> float:
        return float(np.sum(self.values * np.diff(self.breakpoints)))

    def fourier(self, omega) -> np.ndarray:
        """Exact transform  int f(t) exp(i omega t) dt  (omega in rad/s, omega != 0)."""
        w = np.atleast_1d(np.asarray(omega, dtype=float))[:, None]
        e = np.exp(1j * w * self.breakpoints[None, :])
        return ((e[:, 1:] - e[:, :-1]) @ self.values) / (1j * w[:, 0])

    def __call__(self, t):
        idx = np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1, 0, self.values.size - 1)
        return self.values[idx]


def sensitivity_function(schedule: SequenceSchedule) -> SensitivityFunction:
    """Field weighting from the gate bookkeeping of ``schedule``.

    f = s_0 - s_1, where s_c is the sensor qubit state paired with memory
    component c; positive f adds phase to component 0.
    """
    s = [0, 0]
    t = 0.0
    bps, vals = [0.0], []
    for e in schedule.events:
        if e.kind is EventKind.CMNOT:
            s[e.condition] ^= 1
            continue
        if e.duration == 0:
            continue
        f = s[0] - s[1]
        if f and e.segment is not Segment.SENSING:
            raise ValueError(f"sensor is entangled with the memory during a {e.segment.value} event")
        t += e.duration
        if vals and vals[-1] == f:
            bps[-1] = t
        else:
            bps.append(t)
            vals.append(f)
    if not vals:
        vals, bps = [0], [0.0, 0.0]
    return SensitivityFunction(np.array(bps), np.array(vals, dtype=float), t)


# Simulation ----------------------------------------------------------------

@dataclass(frozen=True)
class Dissipation:
    """Sensor relaxation settings used by :func:`simulate_sequence`.

    Dissipation acts during correlation-time events, and during all events
    when ``during_sensing`` is set. ``t1_sensor = None`` switches off the
    dark depolarizer.
    """

    t1_sensor: float | None = C.T1_SENSOR
    t1_nv0: float = C.T1_NV0
    recovery_fidelity: float = C.RECOVERY_FIDELITY
    during_sensing: bool = False


@dataclass(frozen=True, eq=False)
class SequenceResult:
    memory_iz: float
    memory_phase: float
    stored_iz: float
    signal_loss: float
    storage_sensor_coherence: float
    final_state: np.ndarray


class _Simulator:
    """Frame bookkeeping for one parameter set; reused across runs."""

    def __init__(self, params: HamiltonianParams, dissipation: Dissipation | None, detuning: float):
        self.params = params
        self.diss = dissipation
        self.detuning = detuning
        self.n_t = len(params.A_par_targets)
        self.systems = {d: nv_system(self.n_t, memory=True, sensor_dim=d) for d in (2, 3, 5)}
        self._diag = {}
        self._prop_cache = {}

    def diag(self, d):
        if d not in self._diag:
            sys = self.systems[d]
            sz = np.real(np.diag(embed(sensor_sz(d), sys, SENSOR).matrix))
            im = np.real(np.diag(embed(MEMORY_IZ, sys, MEMORY).matrix))
            its = [np.real(np.diag(embed(TARGET_IZ, sys, target_label(k)).matrix)) for k in range(self.n_t)]
            hf = self.params.A_par_memory * sz * im
            sig = self.detuning * sz
            for a, it in zip(self.params.A_par_targets, its):
                sig = sig + a * sz * it
            it_sum = np.sum(its, axis=0) if its else np.zeros(sys.dim)
            ix = sum((embed(PAULI_X / 2, sys, target_label(k)).matrix
                      for k in range(self.n_t)), np.zeros((sys.dim, sys.dim), complex))
            iy = sum((embed(PAULI_Y / 2, sys, target_label(k)).matrix for k in range(self.n_t)),
                     np.zeros((sys.dim, sys.dim), complex))
            self._diag[d] = dict(sz=sz, im=im, hf=hf, sig=sig, it=it_sum, ix=ix, iy=iy)
        return self._diag[d]

    # frame helpers: the interaction frame differs from the working frame
    # by exp(-i 2 pi K t) with diagonal K
    @staticmethod
    def conj(rho, k, t):
        ph = np.exp(-2j * np.pi * k * t)
        return ph[:, None] * rho * ph.conj()[None, :]

    def to_semi(self, rho, d, t):
        return self.conj(rho, self.diag(d)["hf"], t)

    def from_semi(self, rho, d, t):
        return self.conj(rho, -self.diag(d)["hf"], t)

    def channels(self, d, event, kind):
        if self.diss is None:
            return []
        active = event.segment is Segment.CORRELATION or self.diss.during_sensing
        if not active:
            return []
        sys = self.systems[d]
        out = []
        if kind == "nv0":
            out.append(depolarizing_channel(self.diss.t1_nv0, sys))
        else:
            if self.diss.t1_sensor is not None:
                out.append(depolarizing_channel(self.diss.t1_sensor, sys, levels=(0, 1, 2)))
            if d == 5:
                out.append(illumination_channel(event.illumination, sys))
        return out

    def propagate(self, rho, d, event, kind, t0):
        g = self.diag(d)
        k = g["hf"].copy()
        h = g["sig"].copy()
        drive = None
        if event.is_rf:
            off = self.params.larmor_target - event.frequency
            k = k + off * g["it"]
            drive = event.rabi * (np.cos(event.phase) * g["ix"] + np.sin(event.phase) * g["iy"])
        h = h + k
        chans = self.channels(d, event, kind)
        dt = event.duration
        t1 = t0 + dt
        rho_w = self.conj(rho, k, t0)
        key = (d, kind, event.kind, dt, event.frequency, event.rabi, event.phase, bool(chans),
               event.illumination)
        if chans:
            P = self._prop_cache.get(key)
            if P is None:
                H = np.diag(h).astype(complex) + (drive if drive is not None else 0)
                L = liouvillian(Operator(self.systems[d], H), chans)
                P = sla.expm(L * dt)
                self._prop_cache[key] = P
            rho_w = unvec(P @ vec(rho_w), rho.shape[0])
        elif drive is None:
            ph = np.exp(-2j * np.pi * h * dt)
            rho_w = ph[:, None] * rho_w * ph.conj()[None, :]
        else:
            U = self._prop_cache.get(key)
            if U is None:
                U = sla.expm(-2j * np.pi * (np.diag(h) + drive) * dt)
                self._prop_cache[key] = U
            rho_w = U @ rho_w @ U.conj().T
        return self.conj(rho_w, -k, t1)


def _sensor_split(rho, ds):
    dr = rho.shape[0] // ds
    return rho.reshape(ds, dr, ds, dr), dr


def _cmnot(d, condition):
    xs = np.eye(d, dtype=complex)
    z, m = C.LEVEL_ZERO, C.LEVEL_MINUS
    xs[[z, m], :] = xs[[m, z], :]
    return xs, condition


def simulate_sequence(schedule: SequenceSchedule, params: HamiltonianParams,
                      dissipation: Dissipation | None = None, initial: DensityState | None = None,
                      *, sensor_detuning: float = 0.0, init_fidelity: float = 1.0) -> SequenceResult:
    """Run ``schedule`` on sensor, memory and the targets of ``params``.

    ``memory_iz`` is the ensemble memory <sigma_z> (m_I=0 minus m_I=+1) after
    readout; runs lost to ionization or failed charge recovery contribute
    zero. With phase-cycled memory pulses the two runs are combined as
    (S_1 - S_2)/2, which isolates the classically stored component.
    ``memory_phase`` is arg <0|rho_mem|1> before readout (quantum phase).
    ``stored_iz`` is <sigma_z> of the memory right after the cycled pulse.
    """
    sim = _Simulator(params, dissipation, sensor_detuning)
    if initial is not None and initial.system != sim.systems[3]:
        raise ValueError("initial state does not match the sensor/memory/target system")
    cycled = any(e.cycled for e in schedule.events)
    r1 = _run(sim, schedule, initial, init_fidelity, flip=False)
    if not cycled:
        return r1
    r2 = _run(sim, schedule, initial, init_fidelity, flip=True)
    return replace(r1, memory_iz=(r1.memory_iz - r2.memory_iz) / 2,
                   signal_loss=(r1.signal_loss + r2.signal_loss) / 2)


def _initial(sim, init_fidelity):
    sys = sim.systems[3]
    p = (1 - init_fidelity) / 2
    locals_ = {SENSOR: np.diag([p, init_fidelity, p]), MEMORY: np.diag([1.0, 0.0])}
    return product_state(sys, locals_).matrix


def _run(sim: _Simulator, schedule, initial, init_fidelity, flip):
    rho = initial.matrix.copy() if initial is not None else _initial(sim, init_fidelity)
    d, kind, weight, t = 3, "nvm", 1.0, 0.0
    phase = np.nan
    stored = np.nan
    storage_coh = 0.0
    for e in schedule.events:
        if e.segment is Segment.READOUT and np.isnan(phase):
            phase = _memory_phase(rho, sim, d)
        if e.kind is EventKind.CMNOT:
            if kind != "nvm":
                raise ValueError("C_mNOT_s needs the negatively charged sensor")
            xs, c = _cmnot(3, e.condition)
            proj = np.diag([1.0, 0.0]) if c == 0 else np.diag([0.0, 1.0])
            U = (embed_many({SENSOR: xs, MEMORY: proj}, sim.systems[3]).matrix
                 + embed_many({MEMORY: np.eye(2) - proj}, sim.systems[3]).matrix)
            rho = U @ rho @ U.conj().T
        elif e.kind is EventKind.MEMORY_HALF_PI:
            ph = e.phase + (np.pi if (flip and e.cycled) else 0.0)
            U = embed(qubit_rotation(np.pi / 2, ph), sim.systems[d], MEMORY).matrix
            rho = U @ rho @ U.conj().T
            if e.cycled and not flip and np.isnan(stored):
                stored = _memory_iz(rho, sim, d)
        elif e.kind is EventKind.CHARGE:
            rho, d, kind, weight = _charge_switch(sim, rho, d, kind, weight, e.charge, t)
        else:
            if e.laser_on and kind != "nvm":
                raise ValueError("illumination is only modeled for the negatively charged sensor")
            if e.laser_on:
                rho = _pad(rho, 3, 5)
                rho = sim.propagate(rho, 5, e, kind, t)
                rho, w = _leave_illumination(sim, rho, t + e.duration, e.illumination.p_branching)
                weight *= w
            else:
                rho = sim.propagate(rho, d, e, kind, t)
            t += e.duration
            if e.segment is not Segment.SENSING and e.duration > 0:
                s = _sensor_block(rho, d)
                storage_coh = max(storage_coh, float(np.abs(s - np.diag(np.diag(s))).max()))
    if np.isnan(phase):
        phase = _memory_phase(rho, sim, d)
    iz = weight * _memory_iz(rho, sim, d)
    return SequenceResult(float(iz), float(phase), float(stored), float(1 - weight),
                          storage_coh, rho)


def _memory_reduced(rho, sim, d):
    return reduced_matrix(rho, sim.systems[d], {MEMORY})


def _memory_phase(rho, sim, d):
    return float(np.angle(_memory_reduced(rho, sim, d)[0, 1]))


def _memory_iz(rho, sim, d):
    m = _memory_reduced(rho, sim, d)
    return float(np.real(m[0, 0] - m[1, 1]))


def _sensor_block(rho, d):
    t, _ = _sensor_split(rho, d)
    return np.einsum("ajbj->ab", t)


def _pad(rho, d_from, d_to):
    t, dr = _sensor_split(rho, d_from)
    out = np.zeros((d_to, dr, d_to, dr), dtype=complex)
    out[:d_from, :, :d_from, :] = t
    return out.reshape(d_to * dr, d_to * dr)


def _leave_illumination(sim, rho5, t, p_b):
    """Drop the laser: metastable population decays, ionized runs are lost."""
    semi = sim.to_semi(rho5, 5, t)
    T, dr = _sensor_split(semi, 5)
    out = T[:3, :, :3, :].copy()
    ms = T[C.LEVEL_METASTABLE, :, C.LEVEL_METASTABLE, :]
    out[C.LEVEL_ZERO, :, C.LEVEL_ZERO, :] += p_b * ms
    out[C.LEVEL_PLUS, :, C.LEVEL_PLUS, :] += (1 - p_b) / 2 * ms
    out[C.LEVEL_MINUS, :, C.LEVEL_MINUS, :] += (1 - p_b) / 2 * ms
    rho3 = out.reshape(3 * dr, 3 * dr)
    kept = float(np.real(np.trace(rho3)))
    if kept <= 0:
        raise ValueError("sensor fully ionized during illumination")
    return sim.from_semi(rho3 / kept, 3, t), kept


def _charge_switch(sim, rho, d, kind, weight, to, t):
    if to == kind:
        warnings.warn(f"charge_switch to the current charge state {to!r} ignored")
        return rho, d, kind, weight
    semi = sim.to_semi(rho, d, t)
    T, dr = _sensor_split(semi, d)
    rest = np.einsum("ajak->jk", T)
    if to == "nv0":
        new, d_new = np.kron(np.eye(2) / 2, rest), 2
    else:
        s0 = np.zeros((3, 3))
        s0[C.LEVEL_ZERO, C.LEVEL_ZERO] = 1
        new, d_new = np.kron(s0, rest), 3
        f = sim.diss.recovery_fidelity if sim.diss is not None else C.RECOVERY_FIDELITY
        weight *= f
    return sim.from_semi(new, d_new, t), d_new, to, weight


def rf_pulse_profile(duration: float, rabi: float, detuning):
    """Flip probability of a square pulse (Rabi formula)."""
    if not (duration > 0 and rabi > 0):
        raise ValueError("duration and rabi must be > 0")
    det = np.asarray(detuning, dtype=float)
    w2 = rabi**2 + det**2
    return rabi**2 / w2 * np.sin(np.pi * np.sqrt(w2) * duration) ** 2


def profile_half_width(duration: float, rabi: float | None = None) -> float:
    """Detuning at which a pi pulse's flip probability falls to one half, Hz."""
    from scipy.optimize import brentq
    rabi = 1 / (2 * duration) if rabi is None else rabi
    p0 = rf_pulse_profile(duration, rabi, 0.0)
    return brentq(lambda x: rf_pulse_profile(duration, rabi, x) - p0 / 2, 0, rabi * 1.6)
