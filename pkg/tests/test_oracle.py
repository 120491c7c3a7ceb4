import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import model_specs
from corrsteady import cumulant as cu
from corrsteady import oracle as orc
from corrsteady import spectrum as sp
from corrsteady.models import f1_model, two_level_model


@given(model_specs(max_d=3))
@settings(max_examples=15)
def test_liouvillian_preserves_trace(model):
    L, dim = orc.liouvillian(model, 2)
    tr = orc._vec(np.eye(dim))
    assert np.max(np.abs(tr @ L.toarray())) < 1e-12 * max(1, abs(L).max())


@given(model_specs(max_d=3))
@settings(max_examples=15)
def test_exact_steady_is_density_matrix(model):
    ex = orc.exact_steady(model, 2)
    chk = ex.check()
    assert chk["trace"] < 1e-10 and chk["hermitian"] < 1e-10 and chk["min_eig"] > -1e-10
    assert ex.residual < 1e-10
    P = orc.swap_operator(2, model.d, 0, 1)
    if ex.degeneracy == 1:
        assert np.allclose(P @ ex.rho @ P, ex.rho, atol=1e-10)


def test_single_atom_populations():
    # N = 1, pump up at w+ and down at w- + g-: p_e = w+ / (w+ + w- + g-)
    model = two_level_model(2, 3.0, 0.5, 1.0)
    ex = orc.exact_steady(model, N=1)
    assert ex.rho[1, 1].real == pytest.approx(3.0 / 4.5)


def test_size_cap():
    model = f1_model(10, 0.2, 1.0, 1.0)
    with pytest.raises(orc.OracleSizeError):
        orc.liouvillian(model, 6, cap=100)


def test_reduced_density_partial_traces():
    model = two_level_model(3, 2.0, 0.3, 1.0, 0.1)
    ex = orc.exact_steady(model, 3)
    r2 = orc.reduced_density(ex, 2)
    assert np.allclose(cu.ptrace2(r2, 2), orc.reduced_density(ex, 1))
    with pytest.raises(ValueError):
        orc.reduced_density(ex, 4)


@pytest.mark.parametrize("model", [two_level_model(2, 1.3, 0.2, 1.0, 0.3, nu=2.0),
                                   f1_model(2, 0.4, 2.0, 0.5)])
def test_moment_engine_exact_at_two_atoms(model):
    ex = orc.exact_steady(model, 2)
    st_ = cu.steady_state(model)
    assert np.allclose(st_.rho2, ex.rho, atol=1e-9)
    res_pair = sp.compute_spectrum(sp.linearized_qrt_system(cu.build_moment_system(model), st_, "pair"),
                                   np.linspace(-40, 40, 801))
    res_ex = orc.exact_spectrum(model, res_pair.omega, ex)
    assert np.allclose(res_pair.S, res_ex.S, atol=1e-8 * res_ex.S.max())


def test_exact_spectrum_parseval():
    model = two_level_model(2, 1.3, 0.2, 1.0, 0.3, nu=2.0)
    res = orc.exact_spectrum(model, np.linspace(-20, 20, 401))
    c0 = np.real(res.correlator(0.0))[0]
    assert sp.parseval_integral(res) == pytest.approx(np.sqrt(2 * np.pi) * c0, rel=1e-6)
    assert res.info["exact_modes"]
