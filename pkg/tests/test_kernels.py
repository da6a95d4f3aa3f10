import math

import mpmath
import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from lintel.errors import InvalidSpecError
from lintel.kernels import (
    KernelSpec,
    discretize,
    expm,
    kernel_eval,
    matern12,
    matern32,
    matern52,
    stationary_covariance,
    sum_of,
    to_state_space,
)

leaf_makers = st.sampled_from([matern12, matern32, matern52])
variances = st.floats(0.05, 5.0)
lengthscales = st.floats(0.2, 20.0)


@st.composite
def specs(draw):
    leaf = lambda: draw(leaf_makers)(draw(variances), draw(lengthscales))  # noqa: E731
    if draw(st.booleans()):
        return sum_of(leaf(), leaf())
    return leaf()


def test_kernel_at_zero_is_variance():
    assert kernel_eval(matern52(2.0, 1.0), 0.0) == pytest.approx(2.0, abs=1e-15)


def test_matern12_closed_form():
    assert kernel_eval(matern12(1.0, 1.0), 1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)


def test_matern52_high_precision():
    mpmath.mp.dps = 50
    r, ell = mpmath.mpf("0.3"), mpmath.mpf("0.5")
    z = mpmath.sqrt(5) * r / ell
    expected = (1 + z + z**2 / 3) * mpmath.exp(-z)
    assert kernel_eval(matern52(1.0, 0.5), 0.3) == pytest.approx(float(expected), rel=1e-14)


def test_kernel_is_symmetric_in_lag():
    spec = sum_of(matern32(1.0, 2.0), matern52(0.5, 1.0))
    r = np.linspace(0, 5, 11)
    np.testing.assert_array_equal(kernel_eval(spec, r), kernel_eval(spec, -r))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="matern32", variance=-1.0, lengthscale=1.0),
        dict(family="matern32", variance=1.0, lengthscale=0.0),
        dict(family="matern52", variance=float("nan"), lengthscale=1.0),
        dict(family="sum", children=(matern12(1, 1),)),
    ],
)
def test_invalid_specs_rejected(kwargs):
    with pytest.raises(InvalidSpecError):
        KernelSpec(**kwargs)


def test_spec_dict_round_trip():
    spec = sum_of(matern52(1.0, 8.0), matern32(0.5, 1.0))
    assert KernelSpec.from_dict(spec.to_dict()) == spec


def test_log_params_round_trip():
    spec = sum_of(matern52(1.0, 8.0), matern32(0.5, 1.0))
    back = spec.with_log_params(spec.log_params())
    np.testing.assert_allclose(back.log_params(), spec.log_params(), rtol=1e-15)
    assert [leaf.family for leaf in back.leaves()] == [leaf.family for leaf in spec.leaves()]


def test_matern12_state_space():
    ssm = to_state_space(matern12(3.0, 2.0))
    np.testing.assert_allclose(ssm.F, [[-0.5]])
    np.testing.assert_allclose(ssm.Pinf, [[3.0]])
    np.testing.assert_allclose(ssm.h, [1.0])


def test_sum_state_space_is_block_diagonal():
    ssm = to_state_space(sum_of(matern12(1.0, 1.0), matern32(2.0, 3.0)))
    assert ssm.state_dim == 3
    np.testing.assert_allclose(ssm.h, [1.0, 1.0, 0.0])
    assert ssm.h @ ssm.Pinf @ ssm.h == pytest.approx(3.0)
    assert np.all(ssm.F[0, 1:] == 0) and np.all(ssm.F[1:, 0] == 0)


@pytest.mark.parametrize("r", [0.1, 0.5, 2.0])
def test_matern32_reconstruction(r):
    spec = matern32(1.0, 1.0)
    assert stationary_covariance(to_state_space(spec), r) == pytest.approx(kernel_eval(spec, r), abs=1e-9)


def test_discretize_zero_step():
    ssm = to_state_space(sum_of(matern52(1.0, 2.0), matern12(1.0, 1.0)))
    tr = discretize(ssm, 0.0)
    np.testing.assert_array_equal(tr.A, np.eye(4))
    np.testing.assert_array_equal(tr.Sigma, np.zeros((4, 4)))


def test_discretize_ou_closed_form():
    tr = discretize(to_state_space(matern12(1.0, 2.0)), 1.0)
    assert tr.A[0, 0] == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert tr.Sigma[0, 0] == pytest.approx(1.0 - math.exp(-1.0), rel=1e-13)


def test_discretize_matches_reference_expm():
    ssm = to_state_space(matern52(1.3, 0.8))
    np.testing.assert_allclose(discretize(ssm, 0.7).A, scipy.linalg.expm(ssm.F * 0.7), rtol=1e-10, atol=1e-12)


def test_negative_step_rejected():
    with pytest.raises(ValueError):
        discretize(to_state_space(matern32(1.0, 1.0)), -0.1)


@given(specs(), st.floats(0.0, 50.0))
def test_lyapunov_and_reconstruction(spec, r):
    ssm = to_state_space(spec)
    residual = ssm.F @ ssm.Pinf + ssm.Pinf @ ssm.F.T + ssm.L @ ssm.Qc @ ssm.L.T
    assert np.max(np.abs(residual)) <= 1e-9 * max(1.0, np.max(np.abs(ssm.F)) ** 3 * spec.total_variance)
    k = kernel_eval(spec, r)
    assert stationary_covariance(ssm, r) == pytest.approx(k, rel=1e-8, abs=1e-12 * spec.total_variance)


@given(specs(), st.floats(0.0, 30.0), st.floats(0.0, 30.0))
def test_semigroup(spec, a, b):
    ssm = to_state_space(spec)
    ta, tb, tab = discretize(ssm, a), discretize(ssm, b), discretize(ssm, a + b)
    np.testing.assert_allclose(tb.A @ ta.A, tab.A, atol=1e-10)
    # covariance composes as Sigma(a+b) = A(b) Sigma(a) A(b)^T + Sigma(b)
    scale = spec.total_variance * max(1.0, np.max(np.abs(ssm.Pinf)))
    np.testing.assert_allclose(tb.A @ ta.Sigma @ tb.A.T + tb.Sigma, tab.Sigma, atol=1e-10 * scale)


@given(specs(), st.floats(0.0, 1e3))
def test_transition_noise_is_psd(spec, dt):
    tr = discretize(to_state_space(spec), dt)
    np.testing.assert_array_equal(tr.Sigma, tr.Sigma.T)
    assert np.min(np.linalg.eigvalsh(tr.Sigma)) >= -1e-12 * spec.total_variance


@given(st.integers(1, 6), st.floats(-30, 30), st.integers(0, 2**32 - 1))
def test_expm_matches_scipy(d, scale, seed):
    M = np.random.default_rng(seed).normal(size=(d, d)) * scale / d
    ref = scipy.linalg.expm(M)
    np.testing.assert_allclose(expm(M), ref, rtol=1e-9, atol=1e-12 * max(1.0, np.max(np.abs(ref))))
