import numpy as np
import pytest
from hypothesis import settings

from lintel.kernels import matern12, matern32, matern52, sum_of

settings.register_profile("lintel", deadline=None, print_blob=True)
settings.load_profile("lintel")

LEAVES = (matern12, matern32, matern52)


def random_spec(rng: np.random.Generator, allow_sum: bool = True):
    """A random Matern leaf, or (with probability 1/4) a sum of two."""
    def leaf():
        make = LEAVES[rng.integers(3)]
        return make(float(rng.uniform(0.3, 2.0)), float(rng.uniform(0.5, 5.0)))

    if allow_sum and rng.random() < 0.25:
        return sum_of(leaf(), leaf())
    return leaf()


def random_grid(rng: np.random.Generator, n: int, mean_gap: float = 1.0) -> np.ndarray:
    return np.cumsum(rng.exponential(mean_gap, n) + 1e-3)


def dense_predict(spec, noise_var, mean, times, values, t_star):
    """Direct-inversion GP predictive, independent of the package's Cholesky path."""
    from lintel.kernels import kernel_eval

    if len(times) == 0:
        return mean, float(kernel_eval(spec, 0.0)) + noise_var
    K = kernel_eval(spec, np.abs(times[:, None] - times[None, :])) + noise_var * np.eye(len(times))
    k = kernel_eval(spec, np.abs(times - t_star))
    Kinv = np.linalg.inv(K)
    return mean + k @ Kinv @ (values - mean), float(kernel_eval(spec, 0.0)) - k @ Kinv @ k + noise_var


def dense_loglik(spec, noise_var, mean, times, values):
    from lintel.kernels import kernel_eval

    K = kernel_eval(spec, np.abs(times[:, None] - times[None, :])) + noise_var * np.eye(len(times))
    r = values - mean
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return -0.5 * (r @ np.linalg.solve(K, r) + logdet + len(r) * np.log(2 * np.pi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
