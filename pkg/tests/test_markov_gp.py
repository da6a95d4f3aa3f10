import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import dense_loglik, dense_predict, random_grid, random_spec
from lintel.errors import OutOfOrderError
from lintel.kernel_gp import GPDataset, gp_log_marginal_likelihood
from lintel.kernels import kernel_eval, matern12, matern32, matern52, sum_of, to_state_space
from lintel.markov_gp import (
    GaussianState,
    filter_series,
    init_state,
    predict_state,
    predictive,
    stream_loglik,
    update_state,
)


def test_init_ou():
    state = init_state(to_state_space(matern12(3.0, 1.0)))
    np.testing.assert_array_equal(state.m, [0.0])
    np.testing.assert_array_equal(state.P, [[3.0]])
    assert state.t_last is None


def test_init_sum_is_block_diagonal():
    a, b = matern32(1.0, 2.0), matern52(0.5, 1.0)
    state = init_state(to_state_space(sum_of(a, b)))
    np.testing.assert_allclose(state.P[:2, :2], to_state_space(a).Pinf)
    np.testing.assert_allclose(state.P[2:, 2:], to_state_space(b).Pinf)
    assert np.all(state.P[:2, 2:] == 0)


@pytest.mark.parametrize("spec", [matern12(2.0, 1.0), matern52(0.7, 3.0), sum_of(matern32(1, 1), matern52(2, 5))])
def test_prior_variance_type_invariant(spec):
    ssm = to_state_space(spec)
    assert ssm.h @ init_state(ssm).P @ ssm.h == pytest.approx(kernel_eval(spec, 0.0), rel=1e-14)


def test_zero_step_leaves_state():
    ssm = to_state_space(matern52(1.0, 1.0))
    state = GaussianState(np.array([0.3, -1.0, 2.0]), np.eye(3) * 0.2, 5.0)
    after = predict_state(state, ssm, 5.0)
    np.testing.assert_array_equal(after.m, state.m)
    np.testing.assert_array_equal(after.P, state.P)


def test_long_step_reverts_to_prior():
    spec = matern32(1.5, 2.0)
    ssm = to_state_space(spec)
    state = GaussianState(np.array([3.0, -1.0]), np.eye(2) * 0.01, 0.0)
    after = predict_state(state, ssm, 50 * 2.0)
    np.testing.assert_allclose(after.m, 0.0, atol=1e-6)
    np.testing.assert_allclose(after.P, ssm.Pinf, atol=1e-6)


def test_predict_rejects_going_back():
    ssm = to_state_space(matern12(1.0, 1.0))
    with pytest.raises(OutOfOrderError):
        predict_state(GaussianState(np.zeros(1), np.eye(1), 2.0), ssm, 1.0)


def test_conditional_matches_dense_after_gap(rng):
    spec, noise, mean = matern32(1.0, 1.5), 0.1, 0.4
    ssm = to_state_space(spec)
    times = random_grid(rng, 12)
    values = rng.normal(size=12)
    state = filter_series(ssm, noise, mean, times, values).state
    t = times[-1] + 0.4
    m, v = predictive(predict_state(state, ssm, t), ssm, noise, mean)
    m_ref, v_ref = dense_predict(spec, noise, mean, times, values, t)
    assert m == pytest.approx(m_ref, rel=1e-9)
    assert v == pytest.approx(v_ref, rel=1e-9)


def test_fresh_predictive_is_prior():
    spec = sum_of(matern52(1.0, 8.0), matern32(0.5, 1.0))
    ssm = to_state_space(spec)
    m, v = predictive(predict_state(init_state(ssm), ssm, 3.0), ssm, 0.09, 1.25)
    assert m == 1.25
    assert v == pytest.approx(1.5 + 0.09)


def test_noiseless_observation_pins_mean():
    ssm = to_state_space(matern52(1.0, 1.0))
    state = predict_state(init_state(ssm), ssm, 0.0)
    state = update_state(state, ssm, 1e-12, 0.0, 2.3)
    assert predictive(state, ssm, 0.0, 0.0).mean == pytest.approx(2.3, abs=1e-9)


def test_zero_innovation_keeps_mean():
    ssm = to_state_space(matern32(1.0, 1.0))
    prior = GaussianState(np.array([0.5, 0.2]), np.array([[0.4, 0.1], [0.1, 0.3]]), 1.0)
    y = predictive(prior, ssm, 0.2, 1.0).mean
    post = update_state(prior, ssm, 0.2, 1.0, y)
    np.testing.assert_array_equal(post.m, prior.m)
    assert post.P[0, 0] < prior.P[0, 0]


def test_huge_noise_means_no_gain():
    ssm = to_state_space(matern32(1.0, 1.0))
    prior = GaussianState(np.array([0.5, 0.2]), np.array([[0.4, 0.1], [0.1, 0.3]]), 1.0)
    post = update_state(prior, ssm, 1e12, 0.0, 5.0)
    np.testing.assert_allclose(post.m, prior.m, atol=1e-11)
    np.testing.assert_allclose(post.P, prior.P, atol=1e-12)


def test_stepwise_api_matches_compiled_loop(rng):
    ssm = to_state_space(sum_of(matern52(1.0, 3.0), matern12(0.5, 0.7)))
    times = random_grid(rng, 30)
    values = rng.normal(size=30)
    res = filter_series(ssm, 0.2, 0.1, times, values)
    state = init_state(ssm)
    for i, (t, y) in enumerate(zip(times, values)):
        state = predict_state(state, ssm, t)
        m, v = predictive(state, ssm, 0.2, 0.1)
        assert m == pytest.approx(res.means[i], rel=1e-12, abs=1e-14)
        assert v == pytest.approx(res.variances[i], rel=1e-12)
        state = update_state(state, ssm, 0.2, 0.1, y)
    np.testing.assert_allclose(state.m, res.state.m, rtol=1e-12, atol=1e-14)


def test_filter_matches_dense_prefix_predictive(rng):
    spec, noise, mean = sum_of(matern52(1.0, 8.0), matern32(0.5, 1.0)), 0.09, 0.3
    times = random_grid(rng, 200)
    values = rng.normal(size=200)
    res = filter_series(to_state_space(spec), noise, mean, times, values)
    for n in range(200):
        m_ref, v_ref = dense_predict(spec, noise, mean, times[:n], values[:n], times[n])
        assert res.means[n] == pytest.approx(m_ref, rel=1e-6, abs=1e-9)
        assert res.variances[n] == pytest.approx(v_ref, rel=1e-6)


def test_filter_can_resume():
    ssm = to_state_space(matern32(1.0, 2.0))
    times = np.arange(10.0)
    values = np.sin(times)
    whole = filter_series(ssm, 0.1, 0.0, times, values)
    first = filter_series(ssm, 0.1, 0.0, times[:4], values[:4])
    rest = filter_series(ssm, 0.1, 0.0, times[4:], values[4:], state=first.state)
    np.testing.assert_allclose(np.r_[first.means, rest.means], whole.means, rtol=1e-13)


def test_filter_rejects_unsorted():
    with pytest.raises(OutOfOrderError):
        filter_series(to_state_space(matern12(1, 1)), 0.1, 0.0, [0.0, 2.0, 1.0], [0.0, 0.0, 0.0])


def test_loglik_empty_and_single():
    ssm = to_state_space(matern52(2.0, 1.0))
    assert stream_loglik(ssm, 0.5, 1.0, GPDataset((), ())) == 0.0
    got = stream_loglik(ssm, 0.5, 1.0, GPDataset([4.0], [2.0]))
    assert got == pytest.approx(-0.5 * (math.log(2 * math.pi * 2.5) + 1.0 / 2.5), rel=1e-14)


def test_loglik_matches_dense(rng):
    spec = matern32(1.3, 2.0)
    times = random_grid(rng, 50)
    values = rng.normal(size=50) + 0.7
    got = stream_loglik(to_state_space(spec), 0.2, 0.7, GPDataset(times, values))
    assert got == pytest.approx(dense_loglik(spec, 0.2, 0.7, times, values), rel=1e-9)
    assert got == pytest.approx(gp_log_marginal_likelihood(spec, 0.2, GPDataset(times, values, 0.7)), rel=1e-9)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_oracle_equivalence_property(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    noise = float(rng.uniform(0.01, 0.5))
    times = random_grid(rng, 40, mean_gap=float(rng.uniform(0.1, 3.0)))
    values = rng.normal(size=40)
    res = filter_series(to_state_space(spec), noise, 0.0, times, values)
    for n in range(0, 40, 7):
        m_ref, v_ref = dense_predict(spec, noise, 0.0, times[:n], values[:n], times[n])
        assert res.means[n] == pytest.approx(m_ref, rel=1e-6, abs=1e-9)
        assert res.variances[n] == pytest.approx(v_ref, rel=1e-6)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_covariance_stays_psd(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    times = np.cumsum(rng.choice([1e-9, 1e-3, 1.0, 100.0], 1000))
    res = filter_series(to_state_space(spec), float(rng.uniform(1e-6, 1.0)), 0.0, times, rng.normal(size=1000),
                        store_covariances=True)
    covs = res.covariances
    np.testing.assert_array_equal(covs, np.swapaxes(covs, 1, 2))
    assert np.min(np.linalg.eigvalsh(covs)) >= -1e-12 * spec.total_variance
    assert np.all(res.variances > 0)
