"""Laser-power sweeps, optimal repumping and T2*(A_par) scaling curves."""

from __future__ import annotations

import enum
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar

from . import constants as C
from .dynamics import (IlluminationModel, coherence_decay_time, dark_nv0_problem,
                       dark_nvm_problem, illuminated_problem)

#: Minimum fraction of non-ionized runs left after 3 T2* for a usable point.
RETAINED_THRESHOLD = 0.1


class Method(str, enum.Enum):
    DARK_NVM = "dark_nvm"
    DARK_NV0 = "dark_nv0"
    REPUMP_OPTIMAL = "repump_optimal"


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


@dataclass(frozen=True, eq=False)
class PowerSweepResult:
    """T2* versus laser power at one coupling.

    ``t2star`` is the ensemble signal-decay time (ionized runs count as lost
    signal); ``t2star_surviving`` is the coherence decay of the runs that
    stay in NV-. ``signal_retained`` is the non-ionized fraction after
    3 T2*; points below :data:`RETAINED_THRESHOLD` are not ``usable``.
    """

    a_par: float
    powers: np.ndarray
    t2star: np.ndarray
    t2star_surviving: np.ndarray
    signal_retained: np.ndarray
    usable: np.ndarray
    optimum: tuple

    @property
    def interior_maximum(self) -> bool:
        ok = np.flatnonzero(self.usable)
        if ok.size < 3:
            return False
        k = ok[np.argmax(self.t2star[ok])]
        return bool(ok[0] < k < ok[-1])

    def local_maxima(self) -> int:
        """Number of strict interior local maxima of the usable curve."""
        y = self.t2star[self.usable]
        return int(np.sum((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])))


def _power_point(a_par, model, power, t1_sensor, init_fidelity, estimator):
    try:
        est = coherence_decay_time(illuminated_problem(a_par, model.at_power(power), t1_sensor, init_fidelity),
                                   estimator)
    except (ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
        warnings.warn(f"T2* estimate failed at {power:g} uW: {exc}")
        return np.nan, np.nan, 0.0
    retained = float(np.exp(-3 * est.t2star / est.survival_time)) if np.isfinite(est.t2star) else 0.0
    return est.t2star, est.t2star_surviving, retained


def sweep_power(a_par: float, powers, model: IlluminationModel = IlluminationModel(), *,
                t1_sensor: float = C.T1_SENSOR, init_fidelity: float = 1.0,
                estimator: str = "spectral", threads: int = 1) -> PowerSweepResult:
    """T2* of a target with coupling ``a_par`` under continuous illumination."""
    powers = np.asarray(powers, dtype=float)
    if powers.size == 0:
        raise ValueError("power grid is empty")
    rows = _map(lambda p: _power_point(a_par, model, p, t1_sensor, init_fidelity, estimator), powers, threads)
    t2, t2s, ret = (np.array(c, dtype=float) for c in zip(*rows))
    usable = np.isfinite(t2) & (ret >= RETAINED_THRESHOLD)
    if np.any(usable):
        k = np.flatnonzero(usable)[np.argmax(t2[usable])]
        optimum = (float(powers[k]), float(t2[k]))
    else:
        optimum = (np.nan, np.nan)
    return PowerSweepResult(float(a_par), powers, t2, t2s, ret, usable, optimum)


@dataclass(frozen=True)
class OptimalPower:
    power: float
    t2star: float
    gamma_exc: float
    grid_power: float
    grid_t2star: float


def optimal_power(a_par: float, model: IlluminationModel = IlluminationModel(), *,
                  p_range=(1e-3, 1e2), points_per_decade: int = 10, t1_sensor: float = C.T1_SENSOR,
                  init_fidelity: float = 1.0, estimator: str = "spectral",
                  xtol: float = 1e-4) -> OptimalPower:
    """Laser power that maximizes T2*: coarse log grid, then golden-section search."""
    if not a_par > 0:
        raise ValueError("a_par must be > 0")
    lo, hi = np.log10(p_range[0]), np.log10(p_range[1])
    n = int(round((hi - lo) * points_per_decade)) + 1
    grid = np.logspace(lo, hi, n)
    sw = sweep_power(a_par, grid, model, t1_sensor=t1_sensor, init_fidelity=init_fidelity, estimator=estimator)
    if not np.any(sw.usable):
        raise ValueError(f"no usable power in {p_range} uW at A = {a_par:g} Hz")
    p_best, t_best = sw.optimum
    k = int(np.flatnonzero(grid == p_best)[0])
    if k == 0 or k == grid.size - 1 or not (sw.usable[k - 1] and sw.usable[k + 1]):
        warnings.warn(f"optimum at the edge of the power range at A = {a_par:g} Hz")
        return OptimalPower(p_best, t_best, p_best * model.c_exc, p_best, t_best)

    def neg(logp):
        t2, _, ret = _power_point(a_par, model, 10**logp, t1_sensor, init_fidelity, estimator)
        return -t2 if np.isfinite(t2) and ret >= RETAINED_THRESHOLD else 0.0

    res = minimize_scalar(neg, bracket=(np.log10(grid[k - 1]), np.log10(grid[k]), np.log10(grid[k + 1])),
                          method="golden", options={"xtol": xtol})
    p, t2 = 10 ** float(res.x), -float(res.fun)
    if t2 < t_best:
        p, t2 = p_best, t_best
    return OptimalPower(p, t2, p * model.c_exc, p_best, t_best)


@dataclass(frozen=True, eq=False)
class ScalingCurve:
    couplings: np.ndarray
    t2star: np.ndarray
    method: Method
    powers: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.couplings, float)
        t = np.asarray(self.t2star, float)
        if a.size != t.size or np.any(np.diff(a) <= 0):
            raise ValueError("couplings must be strictly ascending and match t2star")
        if np.any(~(t > 0)):
            raise ValueError("t2star values must be > 0")
        object.__setattr__(self, "couplings", a)
        object.__setattr__(self, "t2star", t)
        object.__setattr__(self, "method", Method(self.method))


def coupling_scan(method, a_grid, *, t1_sensor: float = C.T1_SENSOR, t1_nv0: float = C.T1_NV0,
                  model: IlluminationModel = IlluminationModel(), estimator: str = "spectral",
                  threads: int = 1) -> ScalingCurve:
    """T2* over a coupling grid for one decoupling method."""
    method = Method(method)
    a_grid = np.asarray(a_grid, dtype=float)
    if np.any(np.diff(a_grid) <= 0):
        raise ValueError("coupling grid must be sorted ascending")
    powers = None
    if method is Method.DARK_NVM:
        t2 = _map(lambda a: coherence_decay_time(dark_nvm_problem(a, t1_sensor), estimator).t2star, a_grid, threads)
    elif method is Method.DARK_NV0:
        t2 = _map(lambda a: coherence_decay_time(dark_nv0_problem(a, t1_nv0), estimator).t2star, a_grid, threads)
    else:
        opts = _map(lambda a: optimal_power(a, model, t1_sensor=t1_sensor, estimator=estimator), a_grid, threads)
        t2 = [o.t2star for o in opts]
        powers = np.array([o.power for o in opts])
    return ScalingCurve(a_grid, np.array(t2), method, powers)


def log_grid(start: float, stop: float, points_per_decade: int = 10) -> np.ndarray:
    """Logarithmic grid that hits every power of ten between the ends."""
    lo, hi = np.log10(start), np.log10(stop)
    n = int(round((hi - lo) * points_per_decade)) + 1
    return np.round(np.logspace(lo, hi, n), 12)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    stderr: float
    prefactor: float
    n_points: int


def fit_power_law(curve: ScalingCurve, window) -> PowerLawFit:
    """Least-squares slope of log T2* versus log A_par inside ``window``."""
    lo, hi = window
    sel = (curve.couplings >= lo * (1 - 1e-12)) & (curve.couplings <= hi * (1 + 1e-12))
    if sel.sum() < 4:
        raise ValueError(f"need at least 4 points in {window}, have {int(sel.sum())}")
    r = stats.linregress(np.log(curve.couplings[sel]), np.log(curve.t2star[sel]))
    return PowerLawFit(float(r.slope), float(r.stderr), float(np.exp(r.intercept)), int(sel.sum()))


def find_intercept(curve_a: ScalingCurve, curve_b: ScalingCurve):
    """Crossing of two scaling curves by log-log interpolation.

    Returns
    -------
    (coupling, t2star)
    """
    lo = max(curve_a.couplings[0], curve_b.couplings[0])
    hi = min(curve_a.couplings[-1], curve_b.couplings[-1])
    if not lo < hi:
        raise ValueError("curves do not overlap in coupling")
    grid = np.union1d(curve_a.couplings, curve_b.couplings)
    grid = grid[(grid >= lo) & (grid <= hi)]
    lg = np.log(grid)
    ya = np.interp(lg, np.log(curve_a.couplings), np.log(curve_a.t2star))
    yb = np.interp(lg, np.log(curve_b.couplings), np.log(curve_b.t2star))
    d = ya - yb
    if np.all(np.abs(d) < 1e-12):
        raise ValueError("curves coincide; no unique crossing")
    s = np.sign(np.where(np.abs(d) < 1e-12, 0, d))
    nz = np.flatnonzero(s)
    idx = [i for i, j in zip(nz[:-1], nz[1:]) if s[i] != s[j]]
    if not idx:
        raise ValueError("curves do not cross in their common coupling range")
    if len(idx) > 1:
        raise ValueError(f"curves cross {len(idx)} times; no unique crossing")
    i = idx[0]
    j = nz[nz > i][0]
    # zero of the interpolated difference between grid points i and j
    x = lg[i] - d[i] * (lg[j] - lg[i]) / (d[j] - d[i])
    y = np.interp(x, lg, ya)
    return float(np.exp(x)), float(np.exp(y))
