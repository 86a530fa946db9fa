import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvmem.filters import (FilterSpec, NoiseSpectrum, chi_decay, filter_closed_form, filter_numeric,
                           pulse_train, sensitivity_spectrum_plotdata)
from nvmem.physics import HamiltonianParams
from nvmem.sequences import CorrelationSpec, compose_correlation_sequence, sensitivity_function

F0 = HamiltonianParams().larmor_target
X = np.linspace(1e-3, 60, 4001)


def _rel(a, b):
    return float(np.max(np.abs(a - b) / (np.abs(a) + 1e-12)))


@given(st.floats(20e-6, 1e-3), st.floats(1e-4, 5e-3))
def test_this_work_closed_form_matches_numeric(tau, t_c):
    sch = compose_correlation_sequence(CorrelationSpec(tau=tau, t_c=t_c, rf_center=F0))
    spec = FilterSpec.from_schedule(sch)
    a = filter_closed_form("this_work", spec, X)
    b = filter_numeric(sensitivity_function(sch), X / spec.t)
    assert _rel(a, b) < 1e-6


def test_this_work_without_gaps_reduces_to_simple_form():
    x = np.linspace(0.01, 50, 500)
    f = filter_closed_form("this_work", FilterSpec(1.0, 1.0, 0.0), x)
    np.testing.assert_allclose(f, 32 * np.sin(x / 8) ** 4 * np.cos(x / 4) ** 2, atol=1e-13)


@pytest.mark.parametrize("kind", ["ramsey", "spin_echo"])
def test_textbook_closed_forms(kind):
    a = filter_closed_form(kind, FilterSpec(1.0), X)
    b = filter_numeric(pulse_train(kind, 1.0), X)
    assert _rel(a, b) < 1e-8


@pytest.mark.parametrize("kind", ["cpmg", "pdd"])
@pytest.mark.parametrize("n", range(1, 7))
def test_pulse_trains_match_numeric(kind, n):
    a = filter_closed_form(kind, FilterSpec(1.0), X, n)
    b = filter_numeric(pulse_train(kind, 1.0, n), X)
    np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-10)


def test_cpmg1_is_spin_echo():
    np.testing.assert_allclose(filter_closed_form("cpmg", FilterSpec(1.0), X, 1),
                               filter_closed_form("spin_echo", FilterSpec(1.0), X), atol=1e-12)


def test_prior_work_equals_echo_when_tau_fills_window():
    f = filter_closed_form("prior_work", FilterSpec(1.0, 1.0, 0.0), X)
    np.testing.assert_allclose(f, 8 * np.sin(X / 4) ** 4, atol=1e-13)


def test_filter_errors():
    with pytest.raises(ValueError):
        FilterSpec(0.0)
    with pytest.raises(ValueError):
        FilterSpec(1.0, 0.7, 0.5)
    with pytest.raises(ValueError, match="unknown"):
        filter_closed_form("hahn", FilterSpec(1.0), X)
    with pytest.raises(ValueError):
        filter_closed_form("cpmg", FilterSpec(1.0), X, 0)
    with pytest.raises(ValueError):
        filter_numeric(pulse_train("ramsey", 1.0), [0.0, 1.0])
    with pytest.raises(ValueError):
        pulse_train("this_work", 1.0)


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseSpectrum("pink")
    with pytest.raises(ValueError):
        NoiseSpectrum("white", S0=-1.0)
    with pytest.raises(ValueError):
        NoiseSpectrum("tabulated", omega_grid=(2.0, 1.0), values=(1.0, 1.0))
    s = NoiseSpectrum("tabulated", omega_grid=(1.0, 3.0), values=(2.0, 4.0))
    np.testing.assert_allclose(s(np.array([0.5, 2.0, 5.0])), [0.0, 3.0, 0.0])


@given(st.floats(0.1, 100.0), st.floats(1e-5, 1e-1))
def test_chi_white_ramsey(S0, t):
    r = chi_decay(NoiseSpectrum("white", S0=S0), lambda x: filter_closed_form("ramsey", FilterSpec(1.0), x), t)
    assert r.chi == pytest.approx(S0 * t / 2, rel=1e-3)
    assert r.W == pytest.approx(np.exp(-r.chi))


def test_chi_white_spin_echo():
    # the integral of sin^4(a x) / x^2 is pi a / 4, giving the same S0 t / 2
    r = chi_decay(NoiseSpectrum("white", S0=2.0), lambda x: filter_closed_form("spin_echo", FilterSpec(1.0), x), 1e-3)
    assert r.chi == pytest.approx(1e-3, rel=1e-3)


@pytest.mark.parametrize("c, t", [(1e3, 1e-3), (1e4, 2e-4), (50.0, 1e-2)])
def test_chi_lorentzian_ramsey(c, t):
    S0 = 5.0
    r = chi_decay(NoiseSpectrum("lorentzian", S0=S0, cutoff=c),
                  lambda x: filter_closed_form("ramsey", FilterSpec(1.0), x), t)
    want = S0 / 2 * (t - (1 - np.exp(-c * t)) / c)
    assert r.chi == pytest.approx(want, rel=1e-3)


def test_one_over_f_divergence():
    s = NoiseSpectrum("one_over_f", amplitude=1.0, exponent=1.0)
    with pytest.raises(ValueError, match="diverges"):
        chi_decay(s, lambda x: filter_closed_form("ramsey", FilterSpec(1.0), x), 1e-3)
    r = chi_decay(s, lambda x: filter_closed_form("spin_echo", FilterSpec(1.0), x), 1e-3)
    assert np.isfinite(r.chi) and r.chi > 0


def test_zero_noise_gives_full_contrast():
    r = chi_decay(NoiseSpectrum("white", S0=0.0), lambda x: filter_closed_form("ramsey", FilterSpec(1.0), x), 1e-3)
    assert r.chi == 0 and r.W == 1


def test_plotdata_sources_agree():
    sch = compose_correlation_sequence(CorrelationSpec(tau=200e-6, t_c=500e-6, rf_center=F0))
    spec = FilterSpec.from_schedule(sch)
    w = np.linspace(1e2, 1e5, 300)
    a = sensitivity_spectrum_plotdata(sch, w)
    b = sensitivity_spectrum_plotdata(spec, w, kind="this_work")
    assert a.shape == (300, 2)
    np.testing.assert_allclose(a[:, 1], b[:, 1], rtol=1e-6, atol=1e-18)
    with pytest.raises(ValueError):
        sensitivity_spectrum_plotdata(spec, w)
    with pytest.raises(ValueError):
        sensitivity_spectrum_plotdata(sch, [0.0, 1.0])
    with pytest.raises(TypeError):
        sensitivity_spectrum_plotdata("x", w)
