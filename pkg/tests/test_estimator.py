import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from zo_saddle.estimator import (estimate_gradient, sample_ball, sample_sphere, smooth_gradient_oracle,
                                 smooth_value, two_point_gradient)
from zo_saddle.noise import NoiseModel
from zo_saddle.problems import XiLaw, abs_problem_1d, linear_problem, random_ball_game


def test_sphere_d1_is_fair_sign(rng):
    e = sample_sphere(1, rng, 10_000)[:, 0]
    assert set(np.unique(e)) == {-1.0, 1.0}
    counts = [np.sum(e > 0), np.sum(e < 0)]
    assert stats.chisquare(counts).pvalue > 0.01


@given(st.integers(1, 300), st.integers(0, 2 ** 32 - 1))
def test_sphere_unit_norm(d, seed):
    e = sample_sphere(d, np.random.default_rng(seed), 50)
    assert np.allclose(np.linalg.norm(e, axis=1), 1.0, atol=1e-12, rtol=0)


def test_sphere_inner_product_bound(rng):
    r = np.array([1.0, 0.0, 0.0, 0.0])
    e = sample_sphere(4, rng, 1_000_000)
    assert np.mean(np.abs(e @ r)) <= 0.5


def test_ball_samples(rng):
    b = sample_ball(5, rng, 10_000)
    assert np.all(np.linalg.norm(b, axis=1) <= 1.0)
    assert np.mean(np.abs(sample_ball(1, rng, 1_000_000))) == pytest.approx(0.5, abs=0.01)
    assert np.mean(np.linalg.norm(sample_ball(2, rng, 1_000_000), axis=1)) == pytest.approx(2 / 3, abs=0.01)


def test_abs_two_point_example():
    p = abs_problem_1d()
    tau = 0.2
    est = two_point_gradient(p, NoiseModel.none(1), [0.5 * tau], tau, [1.0])
    assert est.g[0] == pytest.approx(0.5, abs=1e-14)


def test_linear_estimate_is_unbiased(rng):
    c = np.array([0.3, -1.2, 0.5])
    p = linear_problem(c, 1.0)
    est = estimate_gradient(p, NoiseModel.none(3), np.array([0.1, 0.2, -0.3]), 0.05, rng, 1_000_000)
    mean = est.g.mean(axis=0)
    se = est.g.std(axis=0) / np.sqrt(len(est.g))
    assert np.all(np.abs(mean - c) <= 3 * se)


def test_bounded_noise_on_constant_function(rng):
    p = linear_problem(np.zeros(4), 1.0)
    delta, tau = 0.05, 0.01
    m = NoiseModel.bounded(delta, 4, wavelength=tau, seed=1)
    est = estimate_gradient(p, m, np.zeros(4), tau, rng, 10_000)
    assert np.all(np.linalg.norm(est.g, axis=1) <= 4 * delta / tau + 1e-12)


def test_y_block_sign_flip(rng):
    p = random_ball_game(3, 2, seed=1, xi_law=XiLaw("uniform", 1.0))
    est = estimate_gradient(p, NoiseModel.none(5), p.sample_point(rng), 0.1, rng, 200)
    assert np.allclose(est.g[:, :3], est.coef[:, None] * est.e[:, :3], rtol=0, atol=1e-15)
    assert np.allclose(est.g[:, 3:], -est.coef[:, None] * est.e[:, 3:], rtol=0, atol=1e-15)


def test_same_xi_in_both_calls():
    # a payoff depending on xi only through a constant shift must cancel exactly
    p = random_ball_game(2, 2, seed=3, xi_law=XiLaw("uniform", 5.0))
    z = np.zeros(4)
    e = np.array([0.0, 0.0, 0.0, 1.0])
    a = two_point_gradient(p, NoiseModel.none(4), z, 0.1, e, xi=3.0).g
    # at x = 0 the xi-term x^T E y is zero on both sides, so xi has no effect
    b = two_point_gradient(p, NoiseModel.none(4), z, 0.1, e, xi=-4.0).g
    assert np.array_equal(a, b)


def test_smooth_value_examples(rng):
    p = abs_problem_1d()
    assert smooth_value(p, [0.3], 0.0, 10, rng) == (0.3, 0.0)
    tau = 0.2
    mean, se = smooth_value(p, [0.0], tau, 1_000_000, rng)
    assert abs(mean - tau / 2) <= 3 * se
    lin = linear_problem([1.0, -2.0], 1.0)
    z = np.array([0.2, 0.1])
    mean, se = smooth_value(lin, z, 0.3, 200_000, rng)
    assert abs(mean - float(lin.value(z))) <= 3 * se + 1e-12


def test_smoothing_gap_bound(rng):
    p = random_ball_game(2, 2, seed=5)
    tau = 0.1
    for z in p.sample_point(rng, 5):
        mean, se = smooth_value(p, z, tau, 100_000, rng)
        assert abs(mean - float(p.value(z))) <= tau * p.M2 + 3 * se


def test_smooth_gradient_oracle_examples(rng):
    lin = linear_problem([0.5, -0.25, 1.0], 1.0)
    g, se = smooth_gradient_oracle(lin, np.zeros(3), 0.1, 1_000_000, rng)
    assert np.all(np.abs(g - [0.5, -0.25, 1.0]) <= 3 * se)
    p = abs_problem_1d()
    tau = 0.2
    g, se = smooth_gradient_oracle(p, [0.0], tau, 1_000_000, rng)
    assert abs(g[0]) <= 3 * se[0]
    g, se = smooth_gradient_oracle(p, [0.5 * tau], tau, 1_000_000, rng)
    assert abs(g[0] - 0.5) <= 3 * se[0]


def test_zero_noise_unbiasedness(rng):
    # the two-point estimate and the smoothed-gradient oracle agree in mean
    for k in range(10):
        p = random_ball_game(2, 2, seed=k, xi_law=XiLaw("uniform", 1.0))
        z = p.sample_point(rng)
        tau = float(rng.uniform(0.05, 0.3))
        est = estimate_gradient(p, NoiseModel.none(4), z, tau, rng, 100_000).g
        signs = np.array([1.0, 1.0, -1.0, -1.0])
        ref, se_ref = smooth_gradient_oracle(p, z, tau, 100_000, rng)
        se = est.std(axis=0) / np.sqrt(len(est))
        assert np.all(np.abs(est.mean(axis=0) - signs * ref) <= 3 * np.sqrt(se ** 2 + se_ref ** 2))


def test_second_moment_scale_sphere(rng):
    # for p = 2, ||e||_2^4 = 1 exactly
    e = sample_sphere(16, rng, 1000)
    assert np.allclose(np.sum(e ** 2, axis=1) ** 2, 1.0)
