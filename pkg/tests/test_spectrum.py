import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corrsteady import cumulant as cu
from corrsteady import spectrum as sp
from corrsteady import twolevel as tl
from corrsteady.models import f1_model, two_level_model


def _result(poles, weights, omega):
    poles, weights = np.asarray(poles, complex), np.asarray(weights, complex)
    res = sp.SpectrumResult(poles, weights, omega, sp.lorentzian_sum(omega, poles, weights))
    res.peaks = sp.extract_peaks(res)
    return res


@given(st.floats(-20, 20), st.floats(0.2, 5), st.floats(0.1, 10))
def test_single_lorentzian_recovered(center, hw, amp):
    omega = np.linspace(center - 60, center + 60, 24001)
    res = _result([-hw + 1j * center], [amp], omega)
    (pk,) = res.peaks
    dw = omega[1] - omega[0]
    assert pk.center == pytest.approx(center, abs=1e-12)
    assert pk.fwhm == pytest.approx(2 * hw)
    assert pk.height == pytest.approx(sp.NORM * amp / hw)
    assert abs(pk.grid_fwhm - pk.fwhm) < dw
    assert pk.dominant


def test_parseval():
    res = _result([-1 + 3j, -0.5 - 2j], [1.0 + 0.1j, 0.4 - 0.1j], np.linspace(-30, 30, 2001))
    c0 = np.real(res.correlator(0.0))[0]
    assert sp.parseval_integral(res) == pytest.approx(np.sqrt(2 * np.pi) * c0, rel=1e-6)


def test_overlapping_poles_merged():
    res = _result([-1 + 0j, -1 + 0.5j], [1.0, 1.0], np.linspace(-20, 20, 4001))
    assert len(res.peaks) == 1 and res.peaks[0].merged


def test_coarse_grid_warning():
    with pytest.warns(sp.CoarseGridWarning):
        _result([-0.01 + 0j], [1.0], np.linspace(-10, 10, 11))


def test_spectrum_real_and_nonnegative_two_level():
    N = 1e4
    model = two_level_model(N, 0.3 * N, gamma_plus=0.2, nu=50.0)
    eqs = cu.build_moment_system(model)
    st_ = cu.steady_state(model)
    res = sp.compute_spectrum(sp.linearized_qrt_system(eqs, st_))
    assert np.isrealobj(res.S)
    assert res.S.min() >= -1e-9 * res.S.max()
    assert np.all(res.poles.real < 0)


def test_frozen_linewidth_equals_moment_formula():
    N = 1e6
    p = tl.TwoLevelParams(N=N, w_plus=0.4 * N, gamma_plus=0.1)
    m = tl.gen_steady(p)
    model = two_level_model(N, p.w_plus, 0.0, 1.0, 0.1, nu=50.0)
    eqs = cu.build_moment_system(model)
    # the regression system only needs rho1 and the pair matrix; build them from (sz, spsm)
    pe = (1 + m.sz) / 2
    r1 = np.diag([1 - pe, pe]).astype(complex)
    M = np.kron(r1, r1)
    M[1, 2] += m.spsm
    M[2, 1] += m.spsm
    state = cu.MomentState(r1, M)
    qrt = sp.linearized_qrt_system(eqs, state, stationary_tol=1e-3)
    res = sp.compute_spectrum(qrt)
    assert res.dominant.fwhm == pytest.approx(tl.gen_linewidth(p, m), rel=1e-6)


def test_nonstationary_input_rejected():
    model = two_level_model(100.0, 30.0)
    eqs = cu.build_moment_system(model)
    with pytest.raises(ValueError):
        sp.linearized_qrt_system(eqs, cu.pumped_state(model.space))


def test_qrt_correlator_matches_propagation():
    model = f1_model(1e3, 0.1, 50.0, 10.0)
    eqs = cu.build_moment_system(model)
    st_ = cu.steady_state(model)
    qrt = sp.linearized_qrt_system(eqs, st_)
    e = qrt.emitters[0]
    ev, w = qrt.modes(e)
    for tau in (0.0, 0.01, 0.05):
        assert np.sum(w * np.exp(ev * tau)) == pytest.approx(qrt.correlator(tau, e), rel=1e-8, abs=1e-10)


def test_unknown_scheme():
    model = two_level_model(100.0, 30.0)
    eqs = cu.build_moment_system(model)
    with pytest.raises(ValueError):
        sp.linearized_qrt_system(eqs, cu.steady_state(model), scheme="full")
