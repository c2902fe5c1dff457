import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaseref.closed_forms import (
    ClosedFormInputs,
    fq_i,
    fq_ii,
    fq_rho_balanced,
    frak_F,
    qfim_analytic,
)
from phaseref.fisher import from_plus_minus

inputs = st.builds(ClosedFormInputs, st.floats(0.0, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_coherent_only_anchors(alpha):
    half, full = ClosedFormInputs(alpha, 0.0, 0.5), ClosedFormInputs(alpha, 0.0, 1.0)
    assert np.isclose(fq_i(half), 2 * alpha**2, rtol=1e-12)
    assert np.isclose(fq_ii(half), alpha**2, rtol=1e-12)
    assert np.isclose(fq_i(full), 4 * alpha**2, rtol=1e-12)
    assert np.isclose(fq_ii(full), alpha**2, rtol=1e-12)


def test_squeezed_vacuum_only():
    # with no coherent light and no mixing, only the upper-arm squeezing counts
    x = ClosedFormInputs(0.0, 0.7, 0.0)
    assert np.isclose(fq_i(x), 2 * np.sinh(1.4) ** 2)
    assert np.isclose(fq_ii(x), 0.5 * np.sinh(1.4) ** 2)


@given(inputs)
def test_minus_entry_is_symmetric_convention(x):
    assert np.isclose(qfim_analytic(x)["phi-", "phi-"], fq_ii(x), rtol=1e-12)


@given(inputs)
def test_upper_arm_entry_is_convention_i(x):
    # phi1 = (phi+ + phi-)/2 carries the upper-arm phase
    f12 = from_plus_minus(qfim_analytic(x))
    assert np.isclose(f12["phi1", "phi1"], fq_i(x), rtol=1e-12, atol=1e-12)


@given(st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_balanced_point_maximises_mixing_term(alpha, r):
    half = ClosedFormInputs(alpha, r, 0.5)
    assert np.isclose(frak_F(half), fq_rho_balanced(half), rtol=1e-12)
    assert np.isclose(fq_ii(half), fq_rho_balanced(half), rtol=1e-12)
    for t in (0.1, 0.3, 0.7):
        assert frak_F(ClosedFormInputs(alpha, r, t)) <= fq_rho_balanced(half) * (1 + 1e-12)


@given(inputs)
def test_qfim_is_positive_semidefinite(x):
    assert np.linalg.eigvalsh(qfim_analytic(x).matrix)[0] >= -1e-9


def test_balanced_qfim_is_diagonal():
    m = qfim_analytic(ClosedFormInputs(1.0, 0.5, 0.5)).matrix
    assert m[0, 1] == 0.0


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        ClosedFormInputs(-1.0, 0.0)
    with pytest.raises(ValueError):
        ClosedFormInputs(1.0, 0.0, 1.5)
    assert np.isclose(ClosedFormInputs(1.0, 0.5).n_bar, 1 + np.sinh(0.5) ** 2)
