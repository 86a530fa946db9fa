"""Lindblad dissipation of the sensor and target-coherence dynamics.

The master equation is

    d rho/dt = -i 2 pi [H, rho] + sum_j (L_j rho L_j^+ - 1/2 {L_j^+ L_j, rho})

with H in Hz and jump operators carrying the square root of their rate.
Superoperators act on column-stacked density matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import curve_fit

from . import constants as C
from .physics import SENSOR, MEMORY, HamiltonianParams, build_hamiltonian, nv_system, target_label
from .quantum import PAULI_X, PAULI_Y, CompositeSystem, DensityState, Operator, embed, product_state


class IntegrationError(RuntimeError):
    """Raised when propagation loses trace or produces non-finite values."""


@dataclass(frozen=True)
class LindbladChannel:
    """A set of jump operators (amplitudes in sqrt(Hz))."""

    jump_operators: tuple = ()
    name: str = ""

    def __post_init__(self):
        ops = tuple(self.jump_operators)
        if ops:
            sys = ops[0].system
            if any(op.system != sys for op in ops):
                raise ValueError("jump operators live on different systems")
        object.__setattr__(self, "jump_operators", ops)


def depolarizing_channel(t1: float, system: CompositeSystem, label: str = SENSOR,
                         levels=None) -> LindbladChannel:
    """Isotropic depolarizer with lifetime ``t1`` on ``levels`` of one subsystem.

    Uses the d^2 operators (d T1)^(-1/2) |m><n|, which give the map
    rho -> (1 - dt/T1) rho + (dt/T1) 1/d over a short step.
    """
    if not t1 > 0:
        raise ValueError("t1 must be > 0")
    dim = system.dim_of(label)
    levels = tuple(range(dim)) if levels is None else tuple(levels)
    d = len(levels)
    amp = 1 / np.sqrt(d * t1)
    ops = []
    for m in levels:
        for n in levels:
            local = np.zeros((dim, dim), dtype=complex)
            local[m, n] = amp
            ops.append(embed(local, system, label))
    return LindbladChannel(tuple(ops), name=f"depolarizing(T1={t1:g})")


@dataclass(frozen=True)
class IlluminationModel:
    """Optical pumping, metastable shelving and ionization of the sensor.

    laser_power in uW; c_exc in 1/(s uW); c_ion in s (ionization rate per
    squared excitation rate); rates in 1/s.
    """

    laser_power: float = 0.0
    c_exc: float = C.C_EXC
    c_ion: float = C.C_ION
    p_branching: float = C.P_BRANCHING
    t1_nv0: float = C.T1_NV0
    metastable_rate: float = C.METASTABLE_RATE
    ms0_excitation_ratio: float = C.MS0_EXCITATION_RATIO

    def __post_init__(self):
        if not 0 <= self.p_branching <= 1:
            raise ValueError(f"p_branching must lie in [0, 1], got {self.p_branching}")
        for name in ("laser_power", "c_exc", "c_ion", "metastable_rate", "ms0_excitation_ratio"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.t1_nv0 > 0:
            raise ValueError("t1_nv0 must be > 0")

    @property
    def gamma_exc(self) -> float:
        return self.laser_power * self.c_exc

    @property
    def gamma_ion(self) -> float:
        return self.gamma_exc**2 * self.c_ion

    def at_power(self, power: float) -> "IlluminationModel":
        from dataclasses import replace
        return replace(self, laser_power=power)


def illumination_channel(model: IlluminationModel, system: CompositeSystem,
                         label: str = SENSOR) -> LindbladChannel:
    """Jump operators of the reduced optical level scheme.

    The sensor subsystem must have five levels ordered
    (m_S=+1, 0, -1, metastable, ionized).
    """
    if system.dim_of(label) != 5:
        raise ValueError("illumination needs a sensor with metastable and ionized levels (dim 5)")
    g = model.gamma_exc
    if g == 0:
        return LindbladChannel((), name="illumination(off)")
    P, Z, M1 = C.LEVEL_PLUS, C.LEVEL_ZERO, C.LEVEL_MINUS
    MS, ION = C.LEVEL_METASTABLE, C.LEVEL_IONIZED
    kM = model.metastable_rate
    rates = [
        (MS, P, g), (MS, M1, g), (MS, Z, g * model.ms0_excitation_ratio),
        (Z, MS, kM * model.p_branching),
        (P, MS, kM * (1 - model.p_branching) / 2),
        (M1, MS, kM * (1 - model.p_branching) / 2),
    ]
    rates += [(ION, n, model.gamma_ion) for n in (P, Z, M1, MS)]
    ops = []
    for to, frm, rate in rates:
        if rate > 0:
            local = np.zeros((5, 5), dtype=complex)
            local[to, frm] = np.sqrt(rate)
            ops.append(embed(local, system, label))
    return LindbladChannel(tuple(ops), name=f"illumination(P={model.laser_power:g} uW)")


def liouvillian(H: Operator, channels=()) -> np.ndarray:
    """Generator of the master equation on column-stacked density matrices."""
    h = H.matrix
    d = h.shape[0]
    eye = np.eye(d)
    L = -2j * np.pi * (np.kron(eye, h) - np.kron(h.T, eye))
    for ch in channels:
        for op in ch.jump_operators:
            if op.system != H.system:
                raise ValueError(f"channel {ch.name!r} does not match the Hamiltonian's system")
            a = op.matrix
            ada = a.conj().T @ a
            L += np.kron(a.conj(), a) - 0.5 * np.kron(eye, ada) - 0.5 * np.kron(ada.T, eye)
    return L


def vec(rho: np.ndarray) -> np.ndarray:
    return rho.reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return v.reshape(d, d, order="F")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Density matrices ``states[i]`` at ``times[i]``."""

    system: CompositeSystem
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)

    def state(self, i: int) -> DensityState:
        return DensityState(self.system, self.states[i], atol=1e-8)


def integrate_master(H: Operator, channels, rho0: DensityState, times,
                     trace_tol: float = 1e-8) -> Trajectory:
    """Propagate ``rho0`` (given at ``times[0]``) with exact step propagators.

    One matrix exponential is computed per distinct step length.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be a non-empty, strictly increasing grid")
    if rho0.system != H.system:
        raise ValueError("initial state and Hamiltonian live on different systems")
    L = liouvillian(H, channels)
    d = H.system.dim
    states = np.empty((times.size, d, d), dtype=complex)
    states[0] = rho0.matrix
    v = vec(rho0.matrix)
    cache = {}
    for i in range(1, times.size):
        dt = times[i] - times[i - 1]
        key = round(dt / max(abs(times[-1]), 1e-300), 12)
        if key not in cache:
            cache[key] = sla.expm(L * dt)
        v = cache[key] @ v
        rho = unvec(v, d)
        tr = np.trace(rho)
        if not np.all(np.isfinite(rho)) or abs(tr - 1) > trace_tol:
            raise IntegrationError(f"propagation failed at t = {times[i]:.6g} s (trace {tr:.3g})")
        states[i] = rho
    return Trajectory(H.system, times, states)


# Coherence observables -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoherenceSeries:
    """Complex target coherence <sigma_x> + i <sigma_y> and signal loss."""

    times: np.ndarray
    values: np.ndarray
    signal_loss: np.ndarray

    @property
    def real(self) -> np.ndarray:
        return self.values.real


def _loss_projector(system: CompositeSystem) -> np.ndarray | None:
    if system.dim_of(SENSOR) != 5:
        return None
    local = np.zeros((5, 5), dtype=complex)
    local[C.LEVEL_IONIZED, C.LEVEL_IONIZED] = 1
    return embed(local, system, SENSOR).matrix


def coherence_series(traj: Trajectory, label: str) -> CoherenceSeries:
    """Coherence of one spin-1/2 (or memory qubit) subsystem along a trajectory.

    Population in the ionized sensor level carries no coherence; it is
    dropped from the trace and reported as ``signal_loss``.
    """
    sys = traj.system
    if sys.dim_of(label) != 2:
        raise ValueError(f"subsystem {label!r} is not two-dimensional")
    sp = embed(PAULI_X + 1j * PAULI_Y, sys, label).matrix
    loss_p = _loss_projector(sys)
    keep = sp if loss_p is None else (np.eye(sys.dim) - loss_p) @ sp
    vals = np.einsum("ij,tji->t", keep, traj.states)
    if loss_p is None:
        loss = np.zeros(traj.times.size)
    else:
        loss = np.real(np.einsum("ij,tji->t", loss_p, traj.states))
    return CoherenceSeries(traj.times, vals, loss)


# Decay-time estimation -----------------------------------------------------

@dataclass(frozen=True)
class DecayFitResult:
    """Fit of a cos(2 pi delta t + phi) exp(-t / T2*) + c."""

    t2star: float
    frequency: float
    amplitude: float
    phase: float
    offset: float
    residual_norm: float
    stderr: dict = field(default_factory=dict)
    converged: bool = True


def _decay_model(t, a, t2, f, phi, c):
    return a * np.cos(2 * np.pi * f * t + phi) * np.exp(-t / t2) + c


def _exp_model(t, a, t2, c):
    return a * np.exp(-t / t2) + c


def _fit(model, tt, y, p0, lo, hi, maxfev=20000):
    popt, pcov = curve_fit(model, tt, y, p0=p0, bounds=(lo, hi), maxfev=maxfev)
    return popt, pcov, float(np.linalg.norm(y - model(tt, *popt)))


def extract_t2star(series, times) -> DecayFitResult:
    """Least-squares decay-time estimate from a real time series.

    Both a plain exponential and a decaying cosine (seeded from the FFT peak
    and from slow trial frequencies) are fitted; the cosine is kept when it
    at least halves the residual norm.
    """
    y = np.real(np.asarray(series, dtype=complex))
    t = np.asarray(times, dtype=float)
    if y.size != t.size or y.size < 8:
        raise ValueError("need at least 8 samples with matching times")
    t0 = t[0]
    tt = t - t0
    span = tt[-1]
    tail = max(2, y.size // 10)
    c0 = float(np.mean(y[-tail:]))
    dev = y - c0
    a0 = float(dev[0]) if dev[0] != 0 else float(np.max(np.abs(dev)))
    # integral of |dev| is T for an exponential; a fair start for a cosine too
    t2_0 = float(np.clip(np.trapezoid(np.abs(dev), tt) / max(abs(a0), 1e-300), span / 50, 10 * span))
    dt = np.median(np.diff(tt))
    nfft = 8 * 2 ** int(np.ceil(np.log2(y.size)))
    spec = np.abs(np.fft.rfft(dev, nfft))
    freqs = np.fft.rfftfreq(nfft, dt)
    f_pk = float(freqs[np.argmax(spec)])

    exp_fit = osc_fit = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            exp_fit = _fit(_exp_model, tt, y, [a0, t2_0, c0], [-np.inf, span * 1e-4, -np.inf],
                           [np.inf, span * 1e4, np.inf])
        except (RuntimeError, ValueError):
            pass
        lo = [0, span * 1e-4, 0, -np.inf, -np.inf]
        hi = [np.inf, span * 1e4, 0.5 / dt, np.inf, np.inf]
        scale = float(np.linalg.norm(dev)) + 1e-300
        # an exponential that already fits to 0.1% needs no oscillating candidate
        seeds = [] if exp_fit is not None and exp_fit[2] < 1e-3 * scale else sorted({f_pk, 0.25 / span,
                                                                                    0.5 / span, 1.0 / span})
        for f_seed in seeds:
            if not 0 < f_seed < 0.5 / dt:
                continue
            for ph in (0.0, np.pi / 2, np.pi, -np.pi / 2):
                try:
                    cand = _fit(_decay_model, tt, y, [abs(a0), t2_0, f_seed, ph, c0], lo, hi, 1000)
                except (RuntimeError, ValueError):
                    continue
                if osc_fit is None or cand[2] < osc_fit[2]:
                    osc_fit = cand
    if exp_fit is None and osc_fit is None:
        warnings.warn("decay fit did not converge; returning initial estimate")
        return DecayFitResult(t2_0, f_pk, abs(a0), 0.0, c0, float(np.linalg.norm(dev)), {}, False)
    use_osc = osc_fit is not None and (exp_fit is None or (exp_fit[2] > 1e-9 * scale
                                                            and osc_fit[2] < 0.5 * exp_fit[2]))
    if use_osc:
        popt, pcov, res = osc_fit
        a, t2, f, phi, c = popt
        names = ("amplitude", "t2star", "frequency", "phase", "offset")
    else:
        popt, pcov, res = exp_fit
        a, t2, c = popt
        f, phi = 0.0, 0.0
        if a < 0:
            a, phi = -a, np.pi
        names = ("amplitude", "t2star", "offset")
    err = np.sqrt(np.clip(np.diag(pcov), 0, np.inf))
    stderr = {k: float(v) for k, v in zip(names, err)}
    converged = bool(np.all(np.isfinite(err)))
    if not converged:
        warnings.warn("decay fit covariance is undefined; parameters are best effort")
    # refer the phase back to the original time origin
    phi = float(np.angle(np.exp(1j * (phi - 2 * np.pi * f * t0))))
    amp = float(a * np.exp(t0 / t2))
    return DecayFitResult(float(t2), float(f), amp, phi, float(c), res, stderr, converged)


def decay_modes(L: np.ndarray, obs: np.ndarray, rho0: np.ndarray):
    """Eigen-decomposition of Tr(O e^{Lt} rho0) = sum_k w_k exp(lambda_k t).

    Returns eigenvalues and complex weights, with numerically degenerate
    eigenvalues merged so weights stay finite near exceptional points.
    """
    lam, vl, vr = sla.eig(L, left=True, right=True)
    o = vec(obs.T)
    r = vec(rho0)
    norm = np.einsum("ij,ij->j", vl.conj(), vr)
    w = (o @ vr) * (vl.conj().T @ r) / norm
    order = np.argsort(lam.real + 1e-3j * lam.imag)
    lam, w = lam[order], w[order]
    groups_l, groups_w = [], []
    for li, wi in zip(lam, w):
        if groups_l and abs(li - groups_l[-1]) <= 1e-6 * (abs(li) + abs(groups_l[-1])) + 1e-9:
            groups_w[-1] += wi
        else:
            groups_l.append(li)
            groups_w.append(wi)
    return np.array(groups_l), np.array(groups_w)


def spectral_decay_time(L, obs, rho0, weight_floor: float = 1e-3) -> float:
    """Decay time 1/|Re lambda| of the slowest mode that carries signal.

    Modes whose weight is below ``weight_floor`` times the largest weight are
    ignored. Returns ``inf`` if a non-decaying mode carries weight.
    """
    lam, w = decay_modes(L, obs, rho0)
    mag = np.abs(w)
    sig = mag >= weight_floor * mag.max()
    rates = -lam.real[sig]
    scale = np.abs(lam).max()
    if np.any(rates <= 1e-12 * scale):
        return np.inf
    return float(1 / rates.min())


def mode_series(L, obs, rho0, times) -> np.ndarray:
    """Tr(O e^{Lt} rho0) on a time grid via the eigen-decomposition."""
    lam, w = decay_modes(L, obs, rho0)
    return np.exp(np.outer(times, lam)) @ w


# Standard coherence problems -----------------------------------------------

@dataclass(frozen=True, eq=False)
class CoherenceProblem:
    """Hamiltonian, channels, initial state and observable of one decay study.

    ``observable`` is the coherence operator sigma_x + i sigma_y of the probed
    spin, restricted to the non-ionized part of the sensor space.
    ``survival`` projects onto the non-ionized levels (None if irrelevant).
    """

    H: Operator
    channels: tuple
    rho0: DensityState
    observable: np.ndarray
    probe: str
    survival: np.ndarray | None = None

    @property
    def L(self) -> np.ndarray:
        return liouvillian(self.H, self.channels)


def _target_problem(a_par, sensor_dim, sensor_rho, channels_fn):
    params = HamiltonianParams(D=0.0, B_z=0.0, A_par_memory=0.0, A_par_targets=(a_par,))
    sys = nv_system(1, memory=False, sensor_dim=sensor_dim)
    H = build_hamiltonian(params, sys)
    plus = np.full((2, 2), 0.5, dtype=complex)
    rho0 = product_state(sys, {SENSOR: sensor_rho, target_label(0): plus})
    obs = embed(PAULI_X + 1j * PAULI_Y, sys, target_label(0)).matrix
    survival = None
    if sensor_dim == 5:
        local = np.eye(5, dtype=complex)
        local[C.LEVEL_IONIZED, C.LEVEL_IONIZED] = 0
        survival = embed(local, sys, SENSOR).matrix
        obs = survival @ obs
    return CoherenceProblem(H, tuple(channels_fn(sys)), rho0, obs, target_label(0), survival)


def dark_nvm_problem(a_par: float, t1: float = C.T1_SENSOR, init_fidelity: float = 1.0):
    """Target coupled to the dark NV- triplet, sensor starting in m_S = 0."""
    p = np.diag([(1 - init_fidelity) / 2, init_fidelity, (1 - init_fidelity) / 2]).astype(complex)
    return _target_problem(a_par, 3, p, lambda s: [depolarizing_channel(t1, s)])


def dark_nv0_problem(a_par: float, t1_nv0: float = C.T1_NV0):
    """Target coupled to the S=1/2 neutral charge state (sensor unpolarized)."""
    return _target_problem(a_par, 2, np.eye(2) / 2, lambda s: [depolarizing_channel(t1_nv0, s)])


def illuminated_problem(a_par: float, model: IlluminationModel, t1: float = C.T1_SENSOR,
                        init_fidelity: float = 1.0):
    """Target coupled to the continuously illuminated sensor."""
    p = np.zeros((5, 5), dtype=complex)
    p[C.LEVEL_PLUS, C.LEVEL_PLUS] = p[C.LEVEL_MINUS, C.LEVEL_MINUS] = (1 - init_fidelity) / 2
    p[C.LEVEL_ZERO, C.LEVEL_ZERO] = init_fidelity

    def channels(s):
        return [depolarizing_channel(t1, s, levels=(0, 1, 2)), illumination_channel(model, s)]

    return _target_problem(a_par, 5, p, channels)


def memory_problem(a_par_memory: float = C.A_PAR_MEMORY, t1: float = C.T1_SENSOR):
    """Memory qubit in superposition next to the dark sensor in m_S = 0."""
    params = HamiltonianParams(D=0.0, B_z=0.0, A_par_memory=a_par_memory)
    sys = nv_system(0, memory=True)
    H = build_hamiltonian(params, sys)
    rho0 = product_state(sys, {SENSOR: np.diag([0, 1, 0]), MEMORY: np.full((2, 2), 0.5)})
    obs = embed(PAULI_X + 1j * PAULI_Y, sys, MEMORY).matrix
    return CoherenceProblem(H, (depolarizing_channel(t1, sys),), rho0, obs, MEMORY)


@dataclass(frozen=True)
class DecayEstimate:
    """Ensemble decay time and the decay time of the surviving population."""

    t2star: float
    t2star_surviving: float
    survival_time: float
    method: str


def coherence_decay_time(problem: CoherenceProblem, method: str = "spectral") -> DecayEstimate:
    """T2* of the probed coherence.

    ``spectral``: 1/|Re lambda| of the slowest signal-carrying Liouvillian
    mode. ``fit``: decaying-cosine fit of the exact series on [0, 4 T].
    """
    L = problem.L
    rho0 = problem.rho0.matrix
    t_spec = spectral_decay_time(L, problem.observable, rho0)
    if problem.survival is not None:
        t_surv = spectral_decay_time(L, problem.survival, rho0)
    else:
        t_surv = np.inf
    if method == "spectral":
        t2 = t_spec
    elif method == "fit":
        if not np.isfinite(t_spec):
            t2 = np.inf
        else:
            times = np.linspace(0, 4 * t_spec, 400)
            y = mode_series(L, problem.observable, rho0, times)
            t2 = extract_t2star(y.real, times).t2star
    else:
        raise ValueError(f"unknown method {method!r}")
    rate = 1 / t2 - (1 / t_surv if np.isfinite(t_surv) else 0.0)
    t2_surv = 1 / rate if rate > 0 else np.inf
    return DecayEstimate(float(t2), float(t2_surv), float(t_surv), method)
