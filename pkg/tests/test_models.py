"""Softmax assignment models and Gaussian expert density."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixipw import (
    InputError,
    MixtureParams,
    ModelParams,
    ParameterError,
    expert_logdensity,
    gating_probs,
    treatment_probs,
)
from mixipw.models import softmax

# hand-computed constants used as oracles
SIGMOID_2 = 0.8807970779778823          # e^2 / (1 + e^2)
HALF_LOG_2PI = 0.9189385332046727       # (1/2) log(2 pi)
LOGDENS_SIGMA2_Y2 = -2.112085713764618  # -(1/2) log(8 pi) - 1/2


def test_treatment_probs_uniform_for_zero_coefficients():
    coefs = np.zeros((3, 4))
    probs = treatment_probs(np.array([0.3, -1.2, 5.0]), coefs)
    assert np.allclose(probs, 1.0 / 3.0, atol=1e-15)


def test_treatment_probs_zero_slope_two_arms():
    coefs = np.zeros((2, 2))
    probs = treatment_probs(np.array([7.0]), coefs)
    assert np.allclose(probs, 0.5, atol=1e-15)


def test_treatment_probs_hand_value():
    coefs = np.array([[0.0, 0.0], [0.0, 2.0]])
    probs = treatment_probs(np.array([1.0]), coefs)
    assert probs[1] == pytest.approx(SIGMOID_2, abs=1e-14)
    assert probs[0] == pytest.approx(1.0 - SIGMOID_2, abs=1e-14)


def test_treatment_probs_rejects_nonfinite_input():
    with pytest.raises(InputError):
        treatment_probs(np.array([np.nan]), np.zeros((2, 2)))


def test_gating_probs_uniform_and_degenerate():
    assert np.allclose(gating_probs(np.array([1.0, 2.0]), np.zeros((2, 3))), 0.5)
    single = gating_probs(np.array([1.0, 2.0]), np.zeros((1, 3)))
    assert single.shape == (1,)
    assert single[0] == 1.0


def test_gating_probs_shift_invariance():
    rng = np.random.default_rng(3)
    eta = rng.normal(size=(3, 5))
    eta[0] = 0.0
    shift = rng.normal(size=5)
    x = rng.normal(size=4)
    base = gating_probs(x, eta)
    shifted = gating_probs(x, eta + shift[None, :])
    assert np.max(np.abs(base - shifted)) < 1e-12


def test_expert_logdensity_at_mean_and_one_sigma():
    beta = np.array([0.5, -1.0, 2.0])
    x = np.array([0.3, 0.4])
    mean = beta[0] + beta[1] * x[0] + beta[2] * x[1]
    assert expert_logdensity(mean, x, beta, 1.0) == pytest.approx(-HALF_LOG_2PI, abs=1e-14)
    sigma = 0.7
    expected = -0.5 * np.log(2.0 * np.pi * sigma**2) - 0.5
    assert expert_logdensity(mean + sigma, x, beta, sigma) == pytest.approx(expected, abs=1e-14)


def test_expert_logdensity_hand_value():
    val = expert_logdensity(2.0, np.array([1.0]), np.array([0.0, 0.0]), 2.0)
    assert val == pytest.approx(LOGDENS_SIGMA2_Y2, abs=1e-14)


def test_expert_logdensity_rejects_nonpositive_scale():
    with pytest.raises(ParameterError):
        expert_logdensity(0.0, np.array([1.0]), np.array([0.0, 0.0]), 0.0)
    with pytest.raises(ParameterError):
        expert_logdensity(0.0, np.array([1.0]), np.array([0.0, 0.0]), -1.0)


def test_expert_density_integrates_to_one():
    beta = np.array([0.4, 1.3])
    x = np.array([-0.8])
    for sigma in (0.5, 1.0, 3.0):
        mean = beta[0] + beta[1] * x[0]
        grid = np.linspace(mean - 12 * sigma, mean + 12 * sigma, 20001)
        dens = np.exp([expert_logdensity(y, x, beta, sigma) for y in grid])
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-4)


def test_extreme_logits_stay_finite():
    coefs = np.array([[0.0, 0.0], [0.0, 700.0]])
    probs = treatment_probs(np.array([1.0]), coefs)
    assert np.all(np.isfinite(probs))
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    probs = treatment_probs(np.array([-1.0]), coefs)
    assert np.all(np.isfinite(probs))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 6))
def test_probability_vectors_positive_and_normalized(seed, classes, p):
    rng = np.random.default_rng(seed)
    coefs = rng.normal(scale=3.0, size=(classes, p + 1))
    coefs[0] = 0.0
    x = rng.normal(size=p)
    for probs in (treatment_probs(x, coefs), gating_probs(x, coefs)):
        assert np.all(probs > 0.0)
        assert abs(probs.sum() - 1.0) < 1e-12


def test_softmax_matches_direct_computation():
    logits = np.array([0.1, -0.4, 2.2])
    direct = np.exp(logits) / np.exp(logits).sum()
    assert np.allclose(softmax(logits), direct, atol=1e-15)


def test_model_params_requires_zero_reference_rows():
    with pytest.raises(ParameterError):
        ModelParams(
            np.array([[0.0, 1.0], [0.0, 0.0]]),
            (
                MixtureParams(np.zeros((1, 2)), np.zeros((1, 2)), np.ones(1)),
                MixtureParams(np.zeros((1, 2)), np.zeros((1, 2)), np.ones(1)),
            ),
        )
