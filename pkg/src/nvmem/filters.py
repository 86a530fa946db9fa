"""Filter functions of sensing sequences and the noise-induced decay exponent.

Convention: F(omega t) = (omega^2 / 2) |f~(omega)|^2 with
f~(omega) = int f(t) exp(i omega t) dt, so a Ramsey window gives
F = 2 sin^2(omega t / 2). The decay exponent is

    chi(t) = (1 / pi) int_0^inf S(omega) F(omega t) / omega^2 d omega.

For correlation sequences ``t`` is the full duration from the first to the
last gate, including the outer storage steps and the correlation time;
``eta_tau = tau / t`` and ``eta_tc = T_c / t``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .sequences import SensitivityFunction, SequenceSchedule, sensitivity_function

KINDS = ("this_work", "prior_work", "ramsey", "spin_echo", "cpmg", "pdd")


@dataclass(frozen=True)
class FilterSpec:
    t: float
    eta_tau: float = 1.0
    eta_tc: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("total time t must be > 0")
        if self.eta_tau < 0 or self.eta_tc < 0 or self.eta_tau + self.eta_tc > 1 + 1e-12:
            raise ValueError("need eta_tau, eta_tc >= 0 and eta_tau + eta_tc <= 1")

    @classmethod
    def from_schedule(cls, schedule: SequenceSchedule) -> "FilterSpec":
        t = schedule.total_time
        return cls(t, schedule.tau / t, schedule.t_c / t)


def filter_closed_form(kind: str, spec: FilterSpec, omega_t, n: int = 1):
    """Analytic filter function at the dimensionless argument ``omega_t``.

    ``n`` is the pulse number for ``cpmg`` and ``pdd``.
    """
    x = np.asarray(omega_t, dtype=float)
    et, ec = spec.eta_tau, spec.eta_tc
    s, c = np.sin, np.cos
    if kind == "this_work":
        return 32 * s(et * x / 8) ** 2 * s((2 - et - 2 * ec) * x / 8) ** 2 * c((1 + ec) * x / 4) ** 2
    if kind == "prior_work":
        return 8 * s(et * x / 4) ** 2 * s((2 - et) * x / 4) ** 2
    if kind == "ramsey":
        return 2 * s(x / 2) ** 2
    if kind == "spin_echo":
        return 8 * s(x / 4) ** 4
    if n < 1:
        raise ValueError("pulse number must be >= 1")
    if kind == "cpmg":
        tail = s(x / 2) ** 2 if n % 2 == 0 else c(x / 2) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 8 * s(x / (4 * n)) ** 4 * tail / c(x / (2 * n)) ** 2
        # removable singularities where cos(x / 2n) = 0
        bad = ~np.isfinite(out) | (np.abs(c(x / (2 * n))) < 1e-6)
        if np.any(bad):
            out = _fill_numeric(out, bad, x, "cpmg", n)
        return out
    if kind == "pdd":
        tail = s(x / 2) ** 2 if n % 2 == 1 else c(x / 2) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 2 * np.tan(x / (2 * (n + 1))) ** 2 * tail
        bad = ~np.isfinite(out) | (np.abs(c(x / (2 * (n + 1)))) < 1e-6)
        if np.any(bad):
            out = _fill_numeric(out, bad, x, "pdd", n)
        return out
    raise ValueError(f"unknown sequence kind {kind!r}; choose from {KINDS}")


def _fill_numeric(out, bad, x, kind, n):
    out = np.array(out, dtype=float, copy=True)
    xb = np.atleast_1d(x)[np.atleast_1d(bad)]
    vals = filter_numeric(pulse_train(kind, 1.0, n), xb)
    if out.ndim == 0:
        return vals[0]
    out[bad] = vals
    return out


def pulse_train(kind: str, t: float, n: int = 1) -> SensitivityFunction:
    """Sensitivity function of a textbook sequence of length ``t``.

    ``cpmg``: pi pulses at t (2j - 1) / 2n; ``pdd``: at t j / (n + 1).
    """
    if kind == "ramsey":
        flips = []
    elif kind == "spin_echo":
        flips = [0.5]
    elif kind == "cpmg":
        flips = [(2 * j - 1) / (2 * n) for j in range(1, n + 1)]
    elif kind == "pdd":
        flips = [j / (n + 1) for j in range(1, n + 1)]
    else:
        raise ValueError(f"no pulse train for {kind!r}")
    bps = np.array([0.0] + flips + [1.0]) * t
    vals = np.array([(-1.0) ** k for k in range(len(flips) + 1)])
    return SensitivityFunction(bps, vals, t)


def filter_numeric(f: SensitivityFunction, omega) -> np.ndarray:
    """F(omega t) = (omega^2 / 2) |f~(omega)|^2 from the exact segment transform."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(w == 0):
        raise ValueError("omega = 0 is not allowed")
    ft = f.fourier(w)
    return 0.5 * w**2 * np.abs(ft) ** 2


# Noise spectra -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NoiseSpectrum:
    """Single-sided noise spectral density S(omega), omega in rad/s.

    kinds: ``white`` (S0), ``lorentzian`` (S0 / (1 + (omega / cutoff)^2)),
    ``one_over_f`` (amplitude / omega^exponent), ``tabulated`` (linear
    interpolation of ``values`` on ``omega_grid``, zero outside).
    """

    kind: str
    S0: float = 0.0
    cutoff: float = 1.0
    amplitude: float = 0.0
    exponent: float = 1.0
    omega_grid: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("white", "lorentzian", "one_over_f", "tabulated"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.S0 < 0 or self.amplitude < 0 or not self.cutoff > 0:
            raise ValueError("noise parameters must give S(omega) >= 0")
        if self.kind == "tabulated":
            g = np.asarray(self.omega_grid, float)
            v = np.asarray(self.values, float)
            if g.size < 2 or g.size != v.size or np.any(np.diff(g) <= 0) or np.any(v < 0):
                raise ValueError("tabulated spectrum needs an increasing grid and S >= 0")

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        if self.kind == "white":
            return np.full_like(w, self.S0)
        if self.kind == "lorentzian":
            return self.S0 / (1 + (w / self.cutoff) ** 2)
        if self.kind == "one_over_f":
            with np.errstate(divide="ignore"):
                return self.amplitude / w**self.exponent
        return np.interp(w, self.omega_grid, self.values, left=0.0, right=0.0)

    @property
    def is_zero(self) -> bool:
        if self.kind == "white" or self.kind == "lorentzian":
            return self.S0 == 0
        if self.kind == "one_over_f":
            return self.amplitude == 0
        return not np.any(self.values)


@dataclass(frozen=True)
class ChiResult:
    chi: float
    W: float
    abs_error: float
    converged: bool


def _loglog_slope(g, x1, x2):
    g1, g2 = g(np.array([x1]))[0], g(np.array([x2]))[0]
    if g1 <= 0 or g2 <= 0:
        return -np.inf if g1 <= 0 and g2 <= 0 else np.nan
    return np.log(g2 / g1) / np.log(x2 / x1)


def chi_decay(S: NoiseSpectrum, F: Callable, t: float, *, n_periods: int = 2000,
              rtol: float = 1e-4) -> ChiResult:
    """Decay exponent chi(t) and W = exp(-chi) for filter ``F(omega t)``.

    The integral is taken in x = omega t: one adaptive panel on [0, 2 pi],
    Gauss-Legendre panels of length 2 pi up to ``n_periods`` periods, and an
    analytic tail with F replaced by its period average.

    Raises
    ------
    ValueError
        If the integrand diverges at low or high frequency.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    if S.is_zero:
        return ChiResult(0.0, 1.0, 0.0, True)

    def g(x):
        x = np.asarray(x, dtype=float)
        return S(x / t) * np.asarray(F(x), dtype=float) / x**2

    # low-frequency behaviour decides integrability at 0
    slope = _loglog_slope(g, 1e-7, 1e-6)
    if np.isfinite(slope) and slope <= -1 + 1e-3:
        raise ValueError(f"chi integral diverges at low frequency (integrand ~ x^{slope:.2f})")
    x_hi = 2 * np.pi * n_periods
    s_slope = _loglog_slope(lambda x: S(x / t) / x**2, x_hi, 10 * x_hi)
    if np.isfinite(s_slope) and s_slope >= -1 - 1e-3:
        raise ValueError("chi integral diverges at high frequency")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        low, low_err = integrate.quad(lambda x: float(g(x)), 0, 2 * np.pi, limit=400,
                                      points=[1e-6, 1e-4, 1e-2, 1.0])
    nodes, weights = np.polynomial.legendre.leggauss(64)
    edges = 2 * np.pi * np.arange(1, n_periods + 1)
    a, b = edges[:-1], edges[1:]
    xs = (0.5 * (b - a)[:, None] * nodes[None, :] + 0.5 * (a + b)[:, None])
    ws = 0.5 * (b - a)[:, None] * weights[None, :]
    panels = np.sum(g(xs) * ws, axis=1)
    mid = float(np.sum(panels))
    # mean of F over the last periods gives the asymptotic weight of the tail
    n_avg = min(50, n_periods // 4)
    f_bar = float(np.sum(np.asarray(F(xs[-n_avg:]), float) * ws[-n_avg:]) / (2 * np.pi * n_avg))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        tail, tail_err = integrate.quad(lambda x: float(S(x / t)) * f_bar / x**2, x_hi, np.inf)
    total = low + mid + tail
    chi = t / np.pi * total
    # tail approximation error is bounded by the oscillating remainder ~ 1/x_hi^2
    err = t / np.pi * (low_err + tail_err + abs(panels[-1]) * 1e-3 + abs(tail) * 1e-2)
    converged = err <= max(rtol * abs(chi), 1e-300)
    if not converged:
        warnings.warn(f"chi quadrature not converged: chi = {chi:.6g} +- {err:.2g}")
    return ChiResult(float(max(chi, 0.0)), float(np.exp(-max(chi, 0.0))), float(err), bool(converged))


def sensitivity_spectrum_plotdata(source, omega_grid, kind: str | None = None, n: int = 1):
    """Table of (omega, F(omega t) 2 / omega^2).

    ``source`` is a :class:`SequenceSchedule` (numeric filter of its
    sensitivity function) or a :class:`FilterSpec` together with ``kind``.
    """
    w = np.asarray(omega_grid, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega grid must be strictly positive")
    if isinstance(source, SequenceSchedule):
        F = filter_numeric(sensitivity_function(source), w)
    elif isinstance(source, SensitivityFunction):
        F = filter_numeric(source, w)
    elif isinstance(source, FilterSpec):
        if kind is None:
            raise ValueError("a FilterSpec needs a sequence kind")
        F = filter_closed_form(kind, source, w * source.t, n)
    else:
        raise TypeError("source must be a schedule, a sensitivity function or a FilterSpec")
    return np.column_stack([w, 2 * F / w**2])
