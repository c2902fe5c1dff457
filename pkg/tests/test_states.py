import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from phaseref.fock import CutoffPolicy, FactoredDensity, FockSpace
from phaseref.states import (
    CutoffError,
    InputParams,
    coherent_amplitudes,
    coherent_cutoff,
    coherent_deficit,
    coherent_state,
    dephase_common,
    interferometer_input,
    interferometer_space,
    squeezed_amplitudes,
    squeezed_cutoff,
    squeezed_deficit,
    squeezed_vacuum,
)


def coherent_series_mp(alpha, n_max):
    mpmath.mp.dps = 40
    a = mpmath.mpc(alpha.real, alpha.imag)
    pref = mpmath.exp(-abs(a) ** 2 / 2)
    return np.array([complex(pref * a**n / mpmath.sqrt(mpmath.factorial(n))) for n in range(n_max + 1)])


def squeeze_expm(r, cutoff):
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1)
    gen = 0.5 * (np.conj(r) * a @ a - r * a.T @ a.T)
    vac = np.zeros(cutoff + 1)
    vac[0] = 1.0
    return expm(gen) @ vac


@pytest.mark.parametrize("alpha", [0.3, 1.0 + 0.5j, -2.0j, 3.1])
def test_coherent_matches_bigfloat_series(alpha):
    amps = coherent_amplitudes(alpha, 40)
    assert np.allclose(amps, coherent_series_mp(alpha, 40), atol=1e-14, rtol=1e-12)


@pytest.mark.parametrize("r", [0.2, 0.7, 1.0 * np.exp(0.4j), 1.2])
def test_squeezed_matches_matrix_exponential(r):
    ref = squeeze_expm(r, 160)
    amps = squeezed_amplitudes(r, 40)
    assert np.allclose(amps, ref[:41], atol=1e-12)


def test_squeezed_odd_amplitudes_vanish():
    amps = squeezed_amplitudes(0.8, 21)
    assert np.all(amps[1::2] == 0)


def test_mean_photon_numbers():
    assert np.isclose(coherent_state(1.7).mean_number(), 1.7**2, rtol=1e-10)
    assert np.isclose(squeezed_vacuum(0.9).mean_number(), np.sinh(0.9) ** 2, rtol=1e-10)


@given(st.floats(0.0, 3.0), st.floats(0.0, 1.3))
def test_policy_cutoffs_meet_the_deficit(alpha, r):
    policy = CutoffPolicy()
    c_coh, c_sq = coherent_cutoff(complex(alpha), policy), squeezed_cutoff(complex(r), policy)
    assert coherent_deficit(alpha, c_coh) < policy.deficit_tol
    assert squeezed_deficit(r, c_sq) < policy.deficit_tol
    assert abs(coherent_state(alpha).deficit - coherent_deficit(alpha, c_coh)) < 1e-13
    assert abs(squeezed_vacuum(r).deficit - squeezed_deficit(r, c_sq)) < 1e-13


def test_second_moment_tail_is_controlled():
    # the cutoff bounds the (n+1)^2-weighted tail, not just the norm
    r = 1.0
    c = squeezed_cutoff(complex(r)) - CutoffPolicy().guard
    full = squeezed_amplitudes(r, 1200)
    n = np.arange(full.size)
    tail = np.sum((n[c + 1:] + 1.0) ** 2 * np.abs(full[c + 1:]) ** 2)
    assert tail < 1e-10


def test_guard_band_is_added():
    tight = CutoffPolicy(guard=0)
    assert coherent_cutoff(1.5, CutoffPolicy(guard=7)) == coherent_cutoff(1.5, tight) + 7
    assert squeezed_cutoff(0.5, CutoffPolicy(guard=7)) == squeezed_cutoff(0.5, tight) + 7


def test_unreachable_cutoff_raises():
    with pytest.raises(CutoffError):
        squeezed_cutoff(6.0)


def test_from_budget_splits_photons():
    p = InputParams.from_budget(3.0, 0.25)
    assert np.isclose(abs(p.alpha) ** 2, 2.25)
    assert np.isclose(np.sinh(p.r) ** 2, 0.75)
    assert np.isclose(p.n_bar, 3.0)
    with pytest.raises(ValueError):
        InputParams.from_budget(1.0, 1.5)


def test_optimal_phase_uses_magnitudes():
    p = InputParams(alpha=1j, r=-0.4)
    assert p.alpha_value == 1.0 and p.r_value == 0.4
    q = InputParams(alpha=1j, r=-0.4, optimal_phase=False)
    assert q.alpha_value == 1j and q.r_value == -0.4


def test_swap_moves_squeezing_to_mode_b():
    p = InputParams(alpha=0.5, r=0.3, swap=True)
    psi = interferometer_input(p)
    assert np.isclose(psi.mean_number([0]), 0.25, rtol=1e-8)
    assert np.isclose(psi.mean_number([1]), np.sinh(0.3) ** 2, rtol=1e-8)


def test_interferometer_space_is_closed_under_mixing():
    p = InputParams(alpha=1.0, r=0.5, beta=2.0)
    space = interferometer_space(p)
    cuts = p.input_cutoffs()
    assert space.cutoffs[:2] == (cuts[0] + cuts[1],) * 2
    assert space.cutoffs[2] == cuts[2]
    psi = interferometer_input(p)
    assert psi.space == space
    assert abs(psi.norm_squared() - (1 - p.truncation_deficit())) < 1e-14


def phase_quadrature(rho, modes, points=256):
    """(1/M) sum_k U(phi_k) rho U(phi_k)^dag with U = exp(-i phi N_modes)."""
    n = rho.space.total_number(modes)
    out = np.zeros_like(rho.matrix)
    for phi in 2 * np.pi * np.arange(points) / points:
        u = np.exp(-1j * phi * n)
        out += u[:, None] * rho.matrix * u.conj()[None, :]
    return out / points


def test_dephasing_matches_phase_quadrature():
    p = InputParams(alpha=0.8, r=0.4)
    psi = interferometer_input(p)
    rho = psi.projector()
    ref = phase_quadrature(rho, (0, 1))
    assert np.allclose(dephase_common(psi, (0, 1)).matrix, ref, atol=1e-14)
    assert np.allclose(dephase_common(rho, (0, 1)).matrix, ref, atol=1e-14)
    fac = dephase_common(FactoredDensity.from_vector(psi), (0, 1))
    assert np.allclose(fac.dense().matrix, ref, atol=1e-14)


def test_dephasing_single_mode_kills_coherences():
    psi = coherent_state(1.0, FockSpace((8,)))
    rho = dephase_common(psi, (0,))
    assert np.allclose(rho.matrix, np.diag(np.diag(rho.matrix)))


def test_dephasing_needs_modes():
    with pytest.raises(ValueError):
        dephase_common(coherent_state(1.0), ())
