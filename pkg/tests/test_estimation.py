import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaseref.closed_forms import ClosedFormInputs, fq_rho_balanced
from phaseref.estimation import (
    CountingModel,
    FlatLikelihoodError,
    golden_section_max,
    mle_estimate,
    outcome_distribution,
    run_estimation,
    sample,
)
from phaseref.optics import GeneratorConvention, LossModel
from phaseref.states import InputParams


@pytest.mark.parametrize("alpha,r", [(1.0, 0.0), (1.0, 0.4)])
def test_balanced_counting_reaches_dephased_qfi(alpha, r):
    cfi = outcome_distribution(InputParams(alpha=alpha, r=r), 0.5, 0.3).fisher().value
    assert np.isclose(cfi, fq_rho_balanced(ClosedFormInputs(alpha, r)), rtol=1e-6)


def test_derivative_table_matches_finite_difference():
    model = CountingModel(InputParams(alpha=0.8, r=0.3), 0.4)
    h = 1e-5
    fd = (model.probabilities(0.3 + h) - model.probabilities(0.3 - h)) / (2 * h)
    assert np.allclose(model.distribution(0.3).derivative.ravel(), fd, atol=1e-8)


def test_distribution_is_normalised_and_nonnegative():
    dist = outcome_distribution(InputParams(alpha=1.0, r=0.4), 0.5, 0.3, loss=LossModel(0.7))
    assert np.isclose(dist.total, 1.0, atol=1e-9)
    assert dist.probabilities.min() >= 0.0
    assert abs(dist.derivative.sum()) < 1e-9


def test_conventions_agree_on_information():
    # the two single-phase generators differ by a multiple of N, invisible to counting
    p = InputParams(alpha=0.9, r=0.3)
    fi = outcome_distribution(p, 0.5, 0.2, GeneratorConvention.UPPER_ONLY).fisher().value
    fii = outcome_distribution(p, 0.5, 0.2, GeneratorConvention.SYMMETRIC).fisher().value
    assert np.isclose(fi, fii, rtol=1e-10)


def test_two_param_convention_rejected():
    with pytest.raises(ValueError):
        CountingModel(InputParams(alpha=1.0, r=0.0), 0.5, GeneratorConvention.TWO_PARAM)


def test_sampling_is_reproducible():
    dist = outcome_distribution(InputParams(alpha=1.0, r=0.2), 0.5, 0.3)
    a, b = sample(dist, 1000, seed=5, trial=3), sample(dist, 1000, seed=5, trial=3)
    assert np.array_equal(a, b)
    assert a.sum() == 1000 and a.shape == dist.probabilities.shape
    assert not np.array_equal(a, sample(dist, 1000, seed=5, trial=4))
    assert not np.array_equal(a, sample(dist, 1000, seed=6, trial=3))


@given(st.floats(-3.0, 3.0))
def test_golden_section_finds_parabola_peak(x0):
    x, fx = golden_section_max(lambda x: -(x - x0) ** 2, -4.0, 4.0)
    assert abs(x - x0) < 1e-6 and fx <= 0.0


def test_mle_on_exact_expected_counts():
    # the expected count table is maximised exactly at the true phase
    model = CountingModel(InputParams(alpha=1.0, r=0.3), 0.5)
    counts = 1e6 * model.probabilities(0.3)
    assert abs(mle_estimate(counts, model, 0.25) - 0.3) < 1e-5


def test_flat_likelihood_detected():
    model = CountingModel(InputParams(alpha=0.0, r=0.0), 0.5)
    with pytest.raises(FlatLikelihoodError):
        mle_estimate(10 * model.probabilities(0.3), model, 0.3)


def test_results_do_not_depend_on_workers():
    p = InputParams(alpha=1.0, r=0.0)
    one = run_estimation(p, k=2000, trials=6, seed=11)
    two = run_estimation(p, k=2000, trials=6, seed=11, workers=2)
    assert np.array_equal(one.estimates, two.estimates)


def test_small_run_is_near_the_bound():
    run = run_estimation(InputParams(alpha=1.0, r=0.0), k=20_000, trials=60, seed=3)
    assert np.isclose(run.fisher, 1.0, rtol=1e-6)
    assert 0.7 < run.std_ratio < 1.3
    assert abs(run.bias) < 4 * run.crb
