"""Ramsey-signal synthesis, zero-filled FFT, complex Lorentzian fits and RF sweeps.

Spectra use X(f) = dt * sum_n x_n exp(-i 2 pi f t_n), which approximates the
continuous transform. A decaying cosine a cos(2 pi delta t + phi) e^{-t/T}
then produces near f = delta the line

    A e^{i theta} / (1 + i (f - f0) / (Delta f / 2)),  Delta f = 1 / (pi T).
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .physics import HamiltonianParams
from .sequences import CorrelationSpec, Dissipation, compose_correlation_sequence, simulate_sequence


@dataclass(frozen=True, eq=False)
class TimeSignal:
    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size != v.size or t.size < 2:
            raise ValueError("times and values must be 1-D arrays of equal length >= 2")
        d = np.diff(t)
        if np.any(d <= 0) or np.abs(d - d.mean()).max() > 1e-9 * d.mean():
            raise ValueError("time grid must be uniform")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))


def synthesize_ramsey(t2star: float, detuning: float, phase: float = 0.0, grid=None,
                      noise_sigma: float = 0.0, amplitude: float = 1.0, offset: float = 0.0,
                      rng: np.random.Generator | int | None = 0) -> TimeSignal:
    """a cos(2 pi delta t + phi) exp(-t / T2*) + c plus Gaussian noise.

    ``grid`` defaults to 512 points over 3 T2*.
    """
    if not t2star > 0:
        raise ValueError("t2star must be > 0")
    t = np.linspace(0, 3 * t2star, 512, endpoint=False) if grid is None else np.asarray(grid, float)
    y = amplitude * np.cos(2 * np.pi * detuning * t + phase) * np.exp(-t / t2star) + offset
    if noise_sigma > 0:
        rng = np.random.default_rng(rng)
        y = y + rng.normal(0, noise_sigma, t.size)
    meta = dict(t2star=t2star, detuning=detuning, phase=phase, noise_sigma=noise_sigma)
    return TimeSignal(t, y, meta)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Two-sided complex spectrum on an ascending frequency grid (Hz).

    ``acquisition_time`` is the length of the underlying record (None if
    unknown); the line fit uses it to model truncation.
    """

    frequencies: np.ndarray
    values: np.ndarray
    acquisition_time: float | None = None

    def one_sided(self) -> "Spectrum":
        keep = self.frequencies >= 0
        return Spectrum(self.frequencies[keep], self.values[keep], self.acquisition_time)

    @property
    def df(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])


def zero_fill_fft(signal: TimeSignal, factor: int = 8) -> Spectrum:
    """DFT of the signal padded with zeros to ``factor`` times its length."""
    if int(factor) != factor or factor < 1:
        raise ValueError("zero-fill factor must be an integer >= 1")
    n = signal.values.size * int(factor)
    dt = signal.dt
    X = np.fft.fft(signal.values, n) * dt
    f = np.fft.fftfreq(n, dt)
    # account for a time origin different from zero
    if signal.times[0] != 0:
        X = X * np.exp(-2j * np.pi * f * signal.times[0])
    order = np.argsort(f)
    return Spectrum(f[order], X[order], signal.values.size * dt)


@dataclass(frozen=True)
class SpectrumFitResult:
    center: float
    fwhm: float
    amplitude: float
    phase: float
    baseline: complex
    stderr: dict
    residual_norm: float
    converged: bool = True


def _line(a, th, f0, w, f, t_acq):
    line = a * np.exp(1j * th) / (1 + 1j * (f - f0) / (w / 2))
    if t_acq is not None:
        # transform of a decay cut off after t_acq
        line = line * (1 - np.exp(-(np.pi * w + 2j * np.pi * (f - f0)) * t_acq))
    return line


def _lorentz(p, f, t_acq=None, mirror=False):
    a, th, f0, w, br, bi = p
    out = _line(a, th, f0, w, f, t_acq) + (br + 1j * bi)
    if mirror:
        # a real signal also has the conjugate line at -f0
        out = out + _line(a, -th, -f0, w, f, t_acq)
    return out


def fit_complex_lorentzian(spectrum: Spectrum, window_fwhm: float = 6.0,
                           truncation: bool = True, real_signal: bool = True) -> SpectrumFitResult:
    """Joint least-squares fit of Re and Im to a complex Lorentzian plus offset.

    The fit uses the non-negative frequencies within ``window_fwhm`` initial
    line widths of the strongest peak. With ``truncation`` and a known
    acquisition time the line is multiplied by 1 - exp(-(pi w + 2 pi i
    (f - f0)) T_acq), the exact effect of ending the record at T_acq; it
    tends to 1 for records much longer than the decay. With ``real_signal``
    the conjugate line at -f0 is included, unless the peak sits within one
    line width of zero where the two lines merge.
    """
    sp = spectrum.one_sided()
    f, X = sp.frequencies, sp.values
    mag = np.abs(X)
    if f.size < 8 or not np.any(mag > 0):
        raise ValueError("degenerate spectrum: no peak to fit")
    k = int(np.argmax(mag))
    peak = mag[k]
    if peak < 3 * np.median(mag):
        raise ValueError("degenerate spectrum: no resolvable peak above the background")
    # half-power crossing on each side gives the starting width
    half = peak / np.sqrt(2)
    lo = k
    while lo > 0 and mag[lo] > half:
        lo -= 1
    hi = k
    while hi < f.size - 1 and mag[hi] > half:
        hi += 1
    w0 = max(f[hi] - f[lo], 2 * sp.df) if k > 0 else max(2 * (f[hi] - f[k]), 2 * sp.df)
    sel = np.abs(f - f[k]) <= window_fwhm * w0
    fs, xs = f[sel], X[sel]
    if fs.size < 7:
        raise ValueError("degenerate spectrum: line narrower than the frequency grid")
    p0 = [peak, float(np.angle(X[k])), float(f[k]), float(w0), 0.0, 0.0]
    scale = np.array([peak, 1.0, w0, w0, peak, peak])

    t_acq = sp.acquisition_time if truncation else None
    mirror = real_signal and f[k] > w0

    def resid(p):
        r = _lorentz(p, fs, t_acq, mirror) - xs
        return np.concatenate([r.real, r.imag])

    res = least_squares(resid, p0, x_scale=scale, method="lm", max_nfev=20000)
    p = res.x.copy()
    if p[0] < 0:
        p[0], p[1] = -p[0], p[1] + np.pi
    p[3] = abs(p[3])
    dof = max(2 * fs.size - p.size, 1)
    s2 = np.sum(res.fun**2) / dof
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * s2
        err = np.sqrt(np.clip(np.diag(cov), 0, np.inf))
    except np.linalg.LinAlgError:
        err = np.full(p.size, np.nan)
    converged = bool(res.success) and p[3] > 0
    if not converged:
        warnings.warn(f"Lorentzian fit did not converge: {res.message}")
    names = ("amplitude", "phase", "center", "fwhm", "baseline_re", "baseline_im")
    return SpectrumFitResult(float(p[2]), float(p[3]), float(p[0]),
                             float(np.angle(np.exp(1j * p[1]))), complex(p[4], p[5]),
                             {n: float(e) for n, e in zip(names, err)},
                             float(np.linalg.norm(res.fun)), converged)


# Frequency sweeps ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SweepTable:
    axis: str
    grid: np.ndarray
    signal: np.ndarray
    signal_loss: np.ndarray


def _pool_map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def sweep_spectrum(params: HamiltonianParams, spec: CorrelationSpec, rf_frequencies,
                   dissipation: Dissipation | None = Dissipation(), threads: int = 1,
                   init_fidelity: float = 1.0) -> SweepTable:
    """Memory signal versus the frequency of the central RF pulse."""
    freqs = np.asarray(rf_frequencies, dtype=float)

    def one(fr):
        sch = compose_correlation_sequence(replace(spec, rf_frequency=float(fr)))
        r = simulate_sequence(sch, params, dissipation, init_fidelity=init_fidelity)
        return r.memory_iz, r.signal_loss

    out = np.array(_pool_map(one, freqs, threads))
    return SweepTable("rf_frequency_hz", freqs, out[:, 0], out[:, 1])


def sweep_tau(params: HamiltonianParams, spec: CorrelationSpec, taus,
              dissipation: Dissipation | None = Dissipation(), threads: int = 1) -> SweepTable:
    """Memory signal versus the total sensing time tau."""
    taus = np.asarray(taus, dtype=float)

    def one(tau):
        r = simulate_sequence(compose_correlation_sequence(replace(spec, tau=float(tau))),
                              params, dissipation)
        return r.memory_iz, r.signal_loss

    out = np.array(_pool_map(one, taus, threads))
    return SweepTable("tau_s", taus, out[:, 0], out[:, 1])


def resonance_positions(grid, signal, n: int | None = None, rel_prominence: float = 0.3):
    """Positions of the resonances, i.e. extrema of |signal - median|."""
    dev = np.abs(np.asarray(signal) - np.median(signal))
    if dev.max() == 0:
        return np.array([])
    idx, props = find_peaks(np.concatenate([[0], dev, [0]]), prominence=rel_prominence * dev.max())
    idx = idx - 1
    order = np.argsort(props["prominences"])[::-1]
    if n is not None:
        order = order[:n]
    return np.sort(np.asarray(grid)[idx[order]])


def resonance_fwhm(grid, signal) -> float:
    """Full width at half maximum of the strongest resonance (linear interpolation)."""
    g = np.asarray(grid, float)
    dev = np.abs(np.asarray(signal) - np.median(signal))
    k = int(np.argmax(dev))
    half = dev[k] / 2
    i = k
    while i > 0 and dev[i] > half:
        i -= 1
    j = k
    while j < dev.size - 1 and dev[j] > half:
        j += 1
    if dev[i] > half or dev[j] > half:
        raise ValueError("resonance is not contained in the sweep range")
    left = np.interp(half, [dev[i], dev[i + 1]], [g[i], g[i + 1]])
    right = np.interp(half, [dev[j], dev[j - 1]], [g[j], g[j - 1]])
    return float(right - left)


def oscillation_period(grid, signal) -> float:
    """Period from a least-squares sinusoid fit seeded by the FFT peak."""
    x = np.asarray(grid, float)
    y = np.asarray(signal, float)
    n = 16 * x.size
    dx = x[1] - x[0]
    spec = np.abs(np.fft.rfft(y - y.mean(), n))
    fr = np.fft.rfftfreq(n, dx)
    f0 = fr[1 + np.argmax(spec[1:])]

    def resid(p):
        c, a, b, f = p
        return c + a * np.cos(2 * np.pi * f * x) + b * np.sin(2 * np.pi * f * x) - y

    res = least_squares(resid, [y.mean(), y.std(), 0.0, f0])
    return float(1 / abs(res.x[3]))
