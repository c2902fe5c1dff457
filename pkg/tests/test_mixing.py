import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaseref.fisher import derivative_state, qfim_factored, qfim_pure, qfim_sectors
from phaseref.fock import FactoredDensity, FockSpace
from phaseref.mixing import MixingForm, _jy_matrix, mixing_form
from phaseref.optics import GeneratorConvention, LossModel, generators, input_state, probe_state
from phaseref.states import InputParams, dephase_common

CONVENTIONS = list(GeneratorConvention)


def direct(params, tau, convention, loss=None, dephase=None):
    state = probe_state(params, tau, loss)
    gens = generators(convention, state.space)
    if hasattr(state, "amplitudes"):
        if dephase is None:
            return qfim_pure(state, *(derivative_state(state, g) for g in gens)).matrix
        return qfim_sectors(state, gens, state.space.total_number(dephase)).matrix
    if dephase is not None:
        state = dephase_common(state, dephase)
    return qfim_factored(state, gens).matrix


def test_jy_matches_ladder_operators():
    space = FockSpace((3, 2))
    from phaseref.fock import annihilation_op
    a = annihilation_op(space, 0).full(dense=True)
    b = annihilation_op(space, 1).full(dense=True)
    ref = (a.conj().T @ b - a @ b.conj().T) / 2j
    assert np.allclose(_jy_matrix(space.dims).toarray(), ref)


@given(st.floats(0.0, 1.0), st.sampled_from(CONVENTIONS))
def test_pure_form_matches_direct(tau, convention):
    p = InputParams(alpha=0.8, r=0.3)
    form = mixing_form(input_state(p))
    assert np.allclose(form.fisher(tau, convention).matrix, direct(p, tau, convention), rtol=1e-10, atol=1e-11)


@given(st.floats(0.0, 1.0))
def test_dephased_form_matches_direct(tau):
    p = InputParams(alpha=0.6, r=0.4)
    form = mixing_form(input_state(p), (0, 1))
    for conv in CONVENTIONS:
        ref = direct(p, tau, conv, dephase=(0, 1))
        assert np.allclose(form.fisher(tau, conv).matrix, ref, rtol=1e-10, atol=1e-11)


@pytest.mark.parametrize("tau", [0.0, 0.25, 0.5, 0.9])
def test_lossy_form_matches_direct(tau):
    p = InputParams(alpha=0.7, r=0.3)
    loss = LossModel(0.75)
    lossy = mixing_form(input_state(p, loss))
    deph = mixing_form(input_state(p, loss), (0, 1))
    for conv in CONVENTIONS:
        assert np.allclose(lossy.fisher(tau, conv).matrix, direct(p, tau, conv, loss), rtol=1e-9, atol=1e-10)
        assert np.allclose(deph.fisher(tau, conv).matrix, direct(p, tau, conv, loss, (0, 1)),
                           rtol=1e-9, atol=1e-10)


def test_reference_mode_form_matches_direct():
    p = InputParams(alpha=0.5, r=0.2, beta=0.8)
    form = mixing_form(input_state(p), (0, 1, 2))
    ref = direct(p, 0.4, GeneratorConvention.TWO_PARAM, dephase=(0, 1, 2))
    assert np.allclose(form.fisher(0.4, GeneratorConvention.TWO_PARAM).matrix, ref, rtol=1e-9, atol=1e-10)


def test_form_is_symmetric_psd():
    form = mixing_form(input_state(InputParams(alpha=1.0, r=0.5)))
    assert np.allclose(form.form, form.form.T)
    assert np.linalg.eigvalsh(form.form)[0] > -1e-9


def test_dephasing_must_cover_both_arms():
    with pytest.raises(ValueError):
        mixing_form(input_state(InputParams(alpha=0.5, r=0.2)), (0,))


def test_coefficients_validate_tau():
    with pytest.raises(ValueError):
        MixingForm.coefficients(1.5, ((0.0, 1.0),))


def test_accepts_factored_input():
    p = InputParams(alpha=0.5, r=0.2)
    vec = input_state(p)
    a = mixing_form(vec).form
    b = mixing_form(FactoredDensity.from_vector(vec)).form
    assert np.allclose(a, b)
