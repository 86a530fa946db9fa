import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from conftest import random_density
from nvmem import constants as C
from nvmem.dynamics import (IlluminationModel, IntegrationError, LindbladChannel, coherence_decay_time,
                            coherence_series, dark_nv0_problem, dark_nvm_problem, depolarizing_channel,
                            extract_t2star, illuminated_problem, illumination_channel,
                            integrate_master, liouvillian, memory_problem, unvec, vec)
from nvmem.quantum import CompositeSystem, DensityState, Operator, embed

QUBIT = CompositeSystem((("q", 2),))
SENSOR5 = CompositeSystem((("sensor", 5),))


def telegraph_time(a, t1, levels):
    """Slowest decay of <exp(-i 2 pi a int m dt)> for a depolarized classical spin."""
    m = np.asarray(levels, float)
    d = m.size
    M = -2j * np.pi * a * np.diag(m) + np.ones((d, d)) / (d * t1) - np.eye(d) / t1
    return 1 / np.min(-np.linalg.eigvals(M).real)


@given(st.integers(0, 2**31 - 1))
def test_liouvillian_preserves_trace_and_hermiticity(seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    sys = CompositeSystem((("s", 3),))
    H = Operator(sys, (h + h.conj().T) * 100)
    ops = [Operator(sys, rng.normal(size=(3, 3)) * 10) for _ in range(2)]
    L = liouvillian(H, [LindbladChannel(tuple(ops))])
    # trace functional is a left null vector
    np.testing.assert_allclose(vec(np.eye(3)) @ L, 0, atol=1e-9)
    rho = random_density(rng, 3)
    out = unvec(sla.expm(L * 1e-3) @ vec(rho), 3)
    np.testing.assert_allclose(out, out.conj().T, atol=1e-12)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_vec_round_trip():
    a = np.arange(9).reshape(3, 3) + 0j
    np.testing.assert_array_equal(unvec(vec(a), 3), a)


def test_integrate_master_rabi_oracle():
    # H = f X / 2 gives P(1) = sin^2(pi f t)
    f = 1e3
    H = Operator(QUBIT, f * np.array([[0, 0.5], [0.5, 0]]))
    t = np.linspace(0, 2e-3, 41)
    traj = integrate_master(H, (), DensityState(QUBIT, np.diag([1.0, 0.0])), t)
    np.testing.assert_allclose(traj.states[:, 1, 1].real, np.sin(np.pi * f * t) ** 2, atol=1e-12)


def test_depolarizer_relaxes_to_mixed_state():
    t1 = 1e-3
    ch = depolarizing_channel(t1, QUBIT, "q")
    t = np.array([0.0, 0.5e-3, 5e-3, 50e-3])
    traj = integrate_master(Operator(QUBIT, np.zeros((2, 2))), [ch], DensityState(QUBIT, np.diag([1.0, 0])), t)
    p = traj.states[:, 0, 0].real
    # population relaxes as 1/2 + 1/2 exp(-t/T1)
    np.testing.assert_allclose(p, 0.5 + 0.5 * np.exp(-t / t1), atol=1e-12)


def test_integrate_master_rejects_bad_grid_and_reports_failure():
    H = Operator(QUBIT, np.zeros((2, 2)))
    rho = DensityState(QUBIT, np.eye(2) / 2)
    with pytest.raises(ValueError):
        integrate_master(H, (), rho, [0.0, 1.0, 0.5])
    # a non-finite generator is caught with the offending time
    Hbad = Operator(QUBIT, np.array([[0, np.nan], [np.nan, 0]]))
    with pytest.raises(IntegrationError, match="t = "):
        integrate_master(Hbad, (), rho, [0.0, 1e-3])


def test_illumination_model_validation():
    with pytest.raises(ValueError, match="p_branching"):
        IlluminationModel(p_branching=1.3)
    with pytest.raises(ValueError):
        IlluminationModel(laser_power=-1)
    m = IlluminationModel(laser_power=2.0)
    assert m.gamma_exc == pytest.approx(2 * C.C_EXC)
    assert m.gamma_ion == pytest.approx((2 * C.C_EXC) ** 2 * C.C_ION)
    assert illumination_channel(IlluminationModel(), SENSOR5).jump_operators == ()
    with pytest.raises(ValueError):
        illumination_channel(m, CompositeSystem((("sensor", 3),)))


def test_illumination_steady_state_oracle():
    # classical rate equations solved independently
    m = IlluminationModel(laser_power=1.0, c_ion=0.0)
    g, k, pb, r0 = m.gamma_exc, m.metastable_rate, m.p_branching, m.ms0_excitation_ratio
    W = np.zeros((4, 4))  # [+1, 0, -1, M]
    W[3, 0] = W[3, 2] = g
    W[3, 1] = g * r0
    W[1, 3] = k * pb
    W[0, 3] = W[2, 3] = k * (1 - pb) / 2
    W -= np.diag(W.sum(axis=0))
    ns = sla.null_space(W)[:, 0]
    ns /= ns.sum()
    ch = illumination_channel(m, SENSOR5)
    H = Operator(SENSOR5, np.zeros((5, 5)))
    traj = integrate_master(H, [ch], DensityState(SENSOR5, np.eye(5) / 5 * 0 + np.diag([1 / 3, 1 / 3, 1 / 3, 0, 0])),
                            [0.0, 1.0])
    np.testing.assert_allclose(np.diag(traj.states[-1]).real[:4], ns, atol=1e-9)


def test_ionization_is_absorbing():
    m = IlluminationModel(laser_power=5.0)
    ch = illumination_channel(m, SENSOR5)
    H = Operator(SENSOR5, np.zeros((5, 5)))
    t = np.linspace(0, 1e-2, 11)
    traj = integrate_master(H, [ch], DensityState(SENSOR5, np.diag([0, 1.0, 0, 0, 0])), t)
    ion = traj.states[:, 4, 4].real
    assert np.all(np.diff(ion) > 0) and ion[-1] > 0.5


@pytest.mark.parametrize("a", [1.0, 30.0, 300.0, 1e4])
def test_dark_nvm_matches_telegraph_oracle(a):
    est = coherence_decay_time(dark_nvm_problem(a))
    assert est.t2star == pytest.approx(telegraph_time(a, C.T1_SENSOR, [1, 0, -1]), rel=1e-8)


@pytest.mark.parametrize("a", [10.0, 1e3, 1e6])
def test_dark_nv0_matches_telegraph_oracle(a):
    est = coherence_decay_time(dark_nv0_problem(a))
    assert est.t2star == pytest.approx(telegraph_time(a, C.T1_NV0, [0.5, -0.5]), rel=1e-8)


def test_dark_limits():
    t1 = C.T1_SENSOR
    # motional narrowing: rate = (2 pi A)^2 <m^2> T1 with <m^2> = 2/3
    assert coherence_decay_time(dark_nvm_problem(1.0)).t2star == pytest.approx(
        1 / ((2 * np.pi) ** 2 * 2 / 3 * t1), rel=0.01)
    # strong coupling: only the m=0 branch survives, lifetime 3/2 T1
    assert coherence_decay_time(dark_nvm_problem(1e5)).t2star == pytest.approx(1.5 * t1, rel=1e-4)
    assert coherence_decay_time(dark_nv0_problem(1e6)).t2star == pytest.approx(2 * C.T1_NV0, rel=1e-4)


def test_spectral_and_fit_estimators_agree():
    # regimes where one mode dominates the decay
    for prob in (dark_nvm_problem(1e3), dark_nvm_problem(1.0), dark_nv0_problem(1e3), memory_problem()):
        s = coherence_decay_time(prob, "spectral").t2star
        f = coherence_decay_time(prob, "fit").t2star
        assert f == pytest.approx(s, rel=0.02)
    with pytest.raises(ValueError):
        coherence_decay_time(memory_problem(), "bogus")


def test_memory_plateau_from_trajectory():
    prob = memory_problem()
    t = np.linspace(0, 40e-3, 401)
    cs = coherence_series(integrate_master(prob.H, prob.channels, prob.rho0, t), prob.probe)
    assert extract_t2star(cs.real, t).t2star == pytest.approx(1.5 * C.T1_SENSOR, rel=0.01)


def test_illuminated_zero_power_equals_dark():
    dark = coherence_decay_time(dark_nvm_problem(2800.0)).t2star
    lit = coherence_decay_time(illuminated_problem(2800.0, IlluminationModel())).t2star
    assert lit == pytest.approx(dark, rel=1e-6)


def test_surviving_time_exceeds_ensemble_time():
    est = coherence_decay_time(illuminated_problem(2800.0, IlluminationModel(laser_power=6.3)))
    assert est.t2star < est.t2star_surviving
    assert est.t2star <= est.survival_time


def test_coherence_series_reports_ionization_loss():
    prob = illuminated_problem(2800.0, IlluminationModel(laser_power=5.0))
    t = np.linspace(0, 5e-3, 6)
    cs = coherence_series(integrate_master(prob.H, prob.channels, prob.rho0, t), prob.probe)
    assert cs.signal_loss[0] == 0 and np.all(np.diff(cs.signal_loss) > 0)
    with pytest.raises(ValueError):
        coherence_series(integrate_master(prob.H, prob.channels, prob.rho0, t), "sensor")


# a fraction of a cycle is indistinguishable from a pure exponential
@given(st.floats(1e-3, 1.0), st.one_of(st.just(0.0), st.floats(0.3, 50.0)), st.floats(-3, 3))
def test_extract_t2star_recovers_synthetic(t2, cycles, phi):
    t = np.linspace(0, 3 * t2, 300)
    f = cycles / t2
    y = 0.8 * np.cos(2 * np.pi * f * t + phi) * np.exp(-t / t2) + 0.1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = extract_t2star(y, t)
    assert r.t2star == pytest.approx(t2, rel=1e-3)


def test_extract_t2star_rejects_short_series():
    with pytest.raises(ValueError):
        extract_t2star(np.ones(5), np.arange(5.0))
